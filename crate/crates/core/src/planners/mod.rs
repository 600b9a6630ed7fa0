//! Planners: the joint time-indexed optimizer and four baselines.

mod current_practice;
mod optimus;
mod random;
mod saturn;

use alloc::string::String;

use serde::{Deserialize, Serialize};

pub use current_practice::plan_current_practice;
pub use optimus::{optimus_marginal_gain, plan_optimus};
pub use random::plan_random;
pub use saturn::{plan_saturn, SaturnOutcome};

use crate::milp::{BranchOptions, MilpError, DEFAULT_MAX_INTERVALS};
use crate::plan::{Plan, PlanEntry};
use crate::problem::{JobWork, Problem};
use crate::timeline::Occupancy;
use crate::workload::Config;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    /// Joint optimization through the time-indexed program, with introspection.
    Saturn,
    /// One job per node at a time on every GPU of the node.
    CurrentPractice,
    /// Random configs and ordering from the given seed.
    Random(u64),
    /// Greedy marginal-gain GPU allocation in FIFO waves.
    Optimus,
    /// [`PlannerKind::Optimus`] with introspection.
    OptimusDynamic,
}

impl PlannerKind {
    /// Position in the fixed reporting order.
    pub fn rank(self) -> u8 {
        match self {
            PlannerKind::Saturn => 0,
            PlannerKind::CurrentPractice => 1,
            PlannerKind::Random(_) => 2,
            PlannerKind::Optimus => 3,
            PlannerKind::OptimusDynamic => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PlannerKind::Saturn => "saturn",
            PlannerKind::CurrentPractice => "current-practice",
            PlannerKind::Random(_) => "random",
            PlannerKind::Optimus => "optimus",
            PlannerKind::OptimusDynamic => "optimus-dynamic",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            PlannerKind::Saturn => "Saturn",
            PlannerKind::CurrentPractice => "Current Practice",
            PlannerKind::Random(_) => "Random",
            PlannerKind::Optimus => "Optimus",
            PlannerKind::OptimusDynamic => "Optimus-Dynamic",
        }
    }

    /// Whether the planner re-plans during execution.
    pub fn introspective(self) -> bool {
        matches!(self, PlannerKind::Saturn | PlannerKind::OptimusDynamic)
    }

    pub fn seed(self) -> Option<u64> {
        match self {
            PlannerKind::Random(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerOptions {
    /// Horizon cap for the time-indexed program.
    pub max_intervals: u32,
    /// Smallest interval length to use; re-plans pass the initial one.
    pub min_delta: Option<f64>,
    pub branch: BranchOptions,
}

/// Node budget per solve. Desk-scale instances stay optimal well within it;
/// larger ones settle for the best incumbent found.
pub const DEFAULT_NODE_LIMIT: usize = 500;

impl Default for PlannerOptions {
    fn default() -> Self {
        PlannerOptions {
            max_intervals: DEFAULT_MAX_INTERVALS,
            min_delta: None,
            branch: BranchOptions {
                node_limit: Some(DEFAULT_NODE_LIMIT),
                ..BranchOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanningError {
    #[error("job `{0}` has no feasible configuration")]
    NoFeasibleConfig(String),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

/// Plans `problem` with the given planner.
pub fn plan(kind: PlannerKind, problem: &Problem<'_>, opts: &PlannerOptions) -> Result<Plan, PlanningError> {
    match kind {
        PlannerKind::Saturn => plan_saturn(problem, opts).map(|o| o.plan),
        PlannerKind::CurrentPractice => plan_current_practice(problem),
        PlannerKind::Random(seed) => plan_random(problem, seed),
        PlannerKind::Optimus | PlannerKind::OptimusDynamic => plan_optimus(problem),
    }
}

/// Earliest placement of `w` under `config` on any node that hosts it, given
/// current occupancy. A running job that keeps its placement and can start
/// right away continues without a checkpoint. Ties go to the lower node.
pub(crate) fn place_earliest(
    problem: &Problem<'_>,
    occupancy: &[Occupancy],
    w: &JobWork,
    config: Config,
    ready: f64,
    nodes: impl Iterator<Item = usize>,
) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for n in nodes {
        if !problem.hosts(w, config, n) {
            continue;
        }
        let mut candidate = None;
        if let Some(cur) = w.current {
            if cur.config == config && cur.node == n && ready <= problem.now {
                let t = problem.runtime(w, config, n, true)?;
                if occupancy[n].earliest_fit(config.gpus, t, problem.now) == Some(problem.now) {
                    candidate = Some((problem.now, t));
                }
            }
        }
        if candidate.is_none() {
            let t = problem.runtime(w, config, n, false)?;
            if let Some(s) = occupancy[n].earliest_fit(config.gpus, t, ready) {
                candidate = Some((s, t));
            }
        }
        if let Some((s, t)) = candidate {
            if best.is_none_or(|(_, bs, _)| s < bs) {
                best = Some((n, s, t));
            }
        }
    }
    best
}

/// A plan under construction together with per-node occupancy.
pub(crate) struct Schedule<'p, 'a> {
    pub problem: &'p Problem<'a>,
    pub occupancy: alloc::vec::Vec<Occupancy>,
    plan: Plan,
}

impl<'p, 'a> Schedule<'p, 'a> {
    pub fn new(problem: &'p Problem<'a>) -> Self {
        Schedule {
            problem,
            occupancy: problem
                .workload
                .cluster()
                .capacities()
                .into_iter()
                .map(Occupancy::new)
                .collect(),
            plan: Plan::default(),
        }
    }

    pub fn place(&mut self, w: &JobWork, config: Config, node: usize, start: f64, duration: f64) {
        self.occupancy[node].add(start, start + duration, config.gpus);
        self.plan.entries.insert(
            self.problem.job_id(w).into(),
            PlanEntry {
                config,
                node,
                start_time: start,
                predicted_end: start + duration,
            },
        );
    }

    pub fn finish(mut self) -> Plan {
        self.plan.refresh_makespan();
        self.plan.predicted_makespan = self.plan.predicted_makespan.max(self.problem.now);
        self.plan
    }
}
