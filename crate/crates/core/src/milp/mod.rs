//! Time-indexed joint program over configuration, node and start interval.
//!
//! Binary `x[j,c,n,i]` selects config `c` on node `n` starting at interval
//! `i` for job `j`; the job then holds `g(c)` GPUs for `d[j,c]` intervals.
//!
//! ```text
//! min M
//!   (assign)    sum_{c,n,i} x[j,c,n,i] = 1                       for every job j
//!   (capacity)  sum of g(c) x[j,c,n,i] active at t <= gpus(n)    for every node n, interval t
//!   (makespan)  sum_{c,n,i} (i + d[j,c]) delta x[j,c,n,i] <= M   for every job j
//! ```
//!
//! The makespan rows need no big-M constant because the assignment rows force
//! exactly one selected variable per job.

mod bnb;
mod brute;
mod dump;
mod simplex;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

pub use bnb::{branch_and_bound, BranchOptions};
pub use brute::{brute_force_schedule, brute_force_with_fixings, BRUTE_FORCE_MAX_JOBS, BRUTE_FORCE_MAX_VARS};

use crate::plan::{Plan, PlanEntry};
use crate::problem::{Placement, Problem};
use crate::timeline::capacity_violation;
use crate::workload::Config;

/// Default cap on the number of intervals in the horizon.
pub const DEFAULT_MAX_INTERVALS: u32 = 48;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MilpError {
    #[error("job `{0}` has no feasible configuration")]
    NoFeasibleConfig(String),
    #[error("horizon needs {needed} intervals, limit is {limit}")]
    HorizonOverflow { needed: u64, limit: u32 },
    #[error("interval length must be positive and finite")]
    InvalidDelta,
    #[error("linear relaxation is infeasible")]
    LpInfeasible,
    #[error("numerical failure in simplex: {0}")]
    NumericalFailure(&'static str),
    #[error("instance too large for enumeration")]
    TooLarge,
    #[error("decoded plan exceeds capacity on node {node} at t={time}")]
    CapacityViolation { node: usize, time: f64 },
    #[error("solution is infeasible")]
    InfeasibleSolution,
}

/// One binary variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MilpVar {
    /// Position in [`MilpInstance::jobs`].
    pub job: usize,
    pub config: Config,
    pub node: usize,
    pub start: u32,
    pub duration: u32,
}

impl MilpVar {
    pub fn end(&self) -> u32 {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Assign { job: usize },
    Capacity { node: usize, interval: u32 },
    Makespan { job: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Le,
}

/// A constraint `sum coeffs * x + makespan_coeff * M (sense) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub kind: RowKind,
    pub coeffs: Vec<(usize, f64)>,
    pub makespan_coeff: f64,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpInstance {
    /// Interval length, seconds.
    pub delta: f64,
    /// Number of intervals.
    pub horizon: u32,
    /// Absolute time of interval 0.
    pub origin: f64,
    /// Workload job index of each instance job, ascending id.
    pub jobs: Vec<usize>,
    pub job_ids: Vec<String>,
    pub capacities: Vec<u32>,
    /// Lexicographic in (job, technique, gpus, node, start).
    pub vars: Vec<MilpVar>,
    /// Contiguous variable range of each job.
    pub job_vars: Vec<Range<usize>>,
    pub rows: Vec<Row>,
}

impl MilpInstance {
    pub fn job_count(&self) -> usize {
        self.jobs.len()
    }

    /// Objective of a full assignment (one variable per job), seconds.
    pub fn objective_of(&self, assignment: &[usize]) -> f64 {
        assignment.iter().map(|&v| self.vars[v].end()).max().unwrap_or(0) as f64 * self.delta
    }

    /// Whether a full assignment satisfies every constraint.
    pub fn is_feasible(&self, assignment: &[usize]) -> bool {
        if assignment.len() != self.jobs.len() {
            return false;
        }
        for (j, &v) in assignment.iter().enumerate() {
            if !self.job_vars[j].contains(&v) {
                return false;
            }
        }
        let mut usage = alloc::vec![0u32; self.capacities.len() * self.horizon as usize];
        for &v in assignment {
            let var = &self.vars[v];
            if var.end() > self.horizon {
                return false;
            }
            for t in var.start..var.end() {
                let cell = &mut usage[var.node * self.horizon as usize + t as usize];
                *cell += var.config.gpus;
                if *cell > self.capacities[var.node] {
                    return false;
                }
            }
        }
        true
    }
}

/// Intervals needed to cover `seconds`, at least one.
fn intervals(seconds: f64, delta: f64) -> u32 {
    let x = libm::ceil(seconds / delta - 1e-9);
    if x < 1.0 {
        1
    } else if x > u32::MAX as f64 {
        u32::MAX
    } else {
        x as u32
    }
}

/// Per job: the undominated (config, node, duration) choices, plus the
/// duration of continuing in place for running jobs.
struct Choices {
    options: Vec<(Config, usize, u32)>,
    keep: Option<(Placement, u32)>,
}

fn job_choices(problem: &Problem<'_>, delta: f64) -> Result<Vec<Choices>, MilpError> {
    let nodes = problem.node_count();
    let mut all = Vec::with_capacity(problem.jobs.len());
    for w in &problem.jobs {
        let mut raw: Vec<(Config, usize, u32)> = Vec::new();
        for &cfg in problem.grid.configs(w.job) {
            for n in 0..nodes {
                if !problem.hosts(w, cfg, n) {
                    continue;
                }
                if let Some(t) = problem.runtime(w, cfg, n, false) {
                    raw.push((cfg, n, intervals(t, delta)));
                }
            }
        }
        if raw.is_empty() {
            return Err(MilpError::NoFeasibleConfig(problem.job_id(w).into()));
        }
        let keep = w.current.and_then(|p| {
            problem
                .runtime(w, p.config, p.node, true)
                .map(|t| (p, intervals(t, delta)))
        });
        // A choice is dominated by another on the same node that needs no more
        // GPUs for no longer; equal pairs keep the first in registration order.
        let options = raw
            .iter()
            .enumerate()
            .filter(|&(a, &(cfg, node, d))| {
                if keep.is_some_and(|(p, _)| p.config == cfg && p.node == node) {
                    return true;
                }
                !raw.iter().enumerate().any(|(b, &(c2, n2, d2))| {
                    b != a && n2 == node && c2.gpus <= cfg.gpus && d2 <= d && ((c2.gpus, d2) != (cfg.gpus, d) || b < a)
                })
            })
            .map(|(_, &o)| o)
            .collect();
        all.push(Choices { options, keep });
    }
    Ok(all)
}

fn sequential_horizon(choices: &[Choices]) -> u64 {
    choices
        .iter()
        .map(|c| c.options.iter().map(|o| o.2).min().unwrap_or(1) as u64)
        .sum()
}

/// Interval length: `max(sequential best / max_intervals, shortest job / 4)`,
/// never below `floor`, then widened until the horizon fits `max_intervals`.
pub fn choose_delta(problem: &Problem<'_>, max_intervals: u32, floor: Option<f64>) -> Result<f64, MilpError> {
    if max_intervals == 0 {
        return Err(MilpError::HorizonOverflow {
            needed: problem.jobs.len() as u64,
            limit: 0,
        });
    }
    let mut total = 0.0;
    let mut shortest = f64::INFINITY;
    for w in &problem.jobs {
        let best = problem
            .best_runtime(w)
            .ok_or_else(|| MilpError::NoFeasibleConfig(problem.job_id(w).into()))?;
        total += best;
        shortest = shortest.min(best);
    }
    if problem.jobs.len() as u64 > max_intervals as u64 {
        return Err(MilpError::HorizonOverflow {
            needed: problem.jobs.len() as u64,
            limit: max_intervals,
        });
    }
    if problem.jobs.is_empty() {
        return Ok(floor.unwrap_or(1.0));
    }
    let mut delta = (total / max_intervals as f64).max(shortest / 4.0);
    if let Some(f) = floor {
        delta = delta.max(f);
    }
    for _ in 0..64 {
        let needed = sequential_horizon(&job_choices(problem, delta)?);
        if needed <= max_intervals as u64 {
            return Ok(delta);
        }
        delta *= needed as f64 / max_intervals as f64 * (1.0 + 1e-9);
    }
    Err(MilpError::HorizonOverflow {
        needed: sequential_horizon(&job_choices(problem, delta)?),
        limit: max_intervals,
    })
}

/// Builds the program for `problem` on a grid of `delta` seconds anchored at
/// `problem.now`. The horizon is the sum over jobs of their shortest duration,
/// so running the jobs one after another is always feasible.
pub fn build_milp(problem: &Problem<'_>, delta: f64, max_intervals: u32) -> Result<MilpInstance, MilpError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(MilpError::InvalidDelta);
    }
    let choices = job_choices(problem, delta)?;
    let needed = sequential_horizon(&choices);
    if needed > max_intervals as u64 {
        return Err(MilpError::HorizonOverflow {
            needed,
            limit: max_intervals,
        });
    }
    let horizon = needed as u32;
    let capacities = problem.workload.cluster().capacities();

    let mut vars = Vec::new();
    let mut job_vars = Vec::with_capacity(choices.len());
    for (j, ch) in choices.iter().enumerate() {
        let first = vars.len();
        for &(config, node, duration) in &ch.options {
            for start in 0..horizon {
                let d = match ch.keep {
                    Some((p, d0)) if start == 0 && p.config == config && p.node == node => d0,
                    _ => duration,
                };
                if start + d <= horizon {
                    vars.push(MilpVar {
                        job: j,
                        config,
                        node,
                        start,
                        duration: d,
                    });
                }
            }
        }
        job_vars.push(first..vars.len());
    }

    let mut rows = Vec::new();
    for (j, r) in job_vars.iter().enumerate() {
        rows.push(Row {
            kind: RowKind::Assign { job: j },
            coeffs: r.clone().map(|v| (v, 1.0)).collect(),
            makespan_coeff: 0.0,
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    let mut cap_rows: BTreeMap<(usize, u32), Vec<(usize, f64)>> = BTreeMap::new();
    for n in 0..capacities.len() {
        for t in 0..horizon {
            cap_rows.insert((n, t), Vec::new());
        }
    }
    for (v, var) in vars.iter().enumerate() {
        for t in var.start..var.end() {
            cap_rows
                .get_mut(&(var.node, t))
                .expect("interval inside horizon")
                .push((v, var.config.gpus as f64));
        }
    }
    for ((node, interval), coeffs) in cap_rows {
        rows.push(Row {
            kind: RowKind::Capacity { node, interval },
            coeffs,
            makespan_coeff: 0.0,
            sense: Sense::Le,
            rhs: capacities[node] as f64,
        });
    }
    for (j, r) in job_vars.iter().enumerate() {
        rows.push(Row {
            kind: RowKind::Makespan { job: j },
            coeffs: r.clone().map(|v| (v, vars[v].end() as f64 * delta)).collect(),
            makespan_coeff: -1.0,
            sense: Sense::Le,
            rhs: 0.0,
        });
    }

    Ok(MilpInstance {
        delta,
        horizon,
        origin: problem.now,
        jobs: problem.jobs.iter().map(|w| w.job).collect(),
        job_ids: problem.jobs.iter().map(|w| problem.job_id(w).into()).collect(),
        capacities,
        vars,
        job_vars,
        rows,
    })
}

/// Partial assignment of binaries. Fixing a variable to one implicitly fixes
/// the job's other variables to zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fixings {
    values: BTreeMap<usize, bool>,
}

impl Fixings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fix(&mut self, var: usize, value: bool) {
        self.values.insert(var, value);
    }

    pub fn get(&self, var: usize) -> Option<bool> {
        self.values.get(&var).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Variables that may be nonzero, or `None` when some job has no
    /// admissible variable left or two variables fixed to one.
    pub(crate) fn allowed(&self, inst: &MilpInstance) -> Option<Vec<bool>> {
        let mut allowed = alloc::vec![true; inst.vars.len()];
        for (&v, &val) in &self.values {
            if v < allowed.len() && !val {
                allowed[v] = false;
            }
        }
        for range in &inst.job_vars {
            let ones: Vec<usize> = range.clone().filter(|&v| self.get(v) == Some(true)).collect();
            match ones.as_slice() {
                [] => {}
                [one] => {
                    for v in range.clone() {
                        if v != *one {
                            allowed[v] = false;
                        }
                    }
                }
                _ => return None,
            }
            if !range.clone().any(|v| allowed[v]) {
                return None;
            }
        }
        Some(allowed)
    }
}

/// Optimal value and point of the linear relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRelaxation {
    /// Seconds from the instance origin.
    pub value: f64,
    /// Value of each binary.
    pub x: Vec<f64>,
}

/// Solves the relaxation (`0 <= x <= 1`) under `fixings` with a two-phase
/// primal simplex. Its value bounds every integer completion from below.
pub fn solve_lp_relaxation(inst: &MilpInstance, fixings: &Fixings) -> Result<LpRelaxation, MilpError> {
    let allowed = fixings.allowed(inst).ok_or(MilpError::LpInfeasible)?;
    let lp = simplex::StandardForm::from_instance(inst);
    match lp.solve(&allowed)? {
        simplex::Outcome::Optimal { value, x, .. } => Ok(LpRelaxation {
            value: value * inst.delta,
            x: x[..inst.vars.len()].to_vec(),
        }),
        simplex::Outcome::Infeasible => Err(MilpError::LpInfeasible),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveStatus {
    Optimal,
    /// Incumbent with the remaining bound gap, seconds.
    Feasible {
        gap: f64,
    },
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    /// Selected variable of each instance job; empty when infeasible.
    pub assignment: Vec<usize>,
    /// Makespan relative to the instance origin, seconds.
    pub objective: f64,
    pub status: SolveStatus,
    pub node_count: usize,
}

/// Turns a solution into a plan with absolute times.
pub fn decode_plan(inst: &MilpInstance, solution: &MilpSolution) -> Result<Plan, MilpError> {
    if solution.status == SolveStatus::Infeasible || solution.assignment.len() != inst.jobs.len() {
        return Err(MilpError::InfeasibleSolution);
    }
    let mut plan = Plan {
        resolution: Some(inst.delta),
        ..Plan::default()
    };
    for (j, &v) in solution.assignment.iter().enumerate() {
        let var = &inst.vars[v];
        plan.entries.insert(
            inst.job_ids[j].clone(),
            PlanEntry {
                config: var.config,
                node: var.node,
                start_time: inst.origin + var.start as f64 * inst.delta,
                predicted_end: inst.origin + var.end() as f64 * inst.delta,
            },
        );
    }
    let usages = plan
        .entries
        .values()
        .map(|e| (e.node, e.start_time, e.predicted_end, e.config.gpus));
    if let Some((node, time)) = capacity_violation(&inst.capacities, usages) {
        return Err(MilpError::CapacityViolation { node, time });
    }
    plan.predicted_makespan = inst.origin + solution.objective;
    Ok(plan)
}

/// Fixings that pin every job to its plan entry, if each entry maps to a variable.
pub fn encode_plan(inst: &MilpInstance, plan: &Plan) -> Option<Fixings> {
    let mut fixings = Fixings::new();
    for (j, range) in inst.job_vars.iter().enumerate() {
        let e = plan.entries.get(&inst.job_ids[j])?;
        let start = libm::round((e.start_time - inst.origin) / inst.delta);
        let v = range.clone().find(|&v| {
            let var = &inst.vars[v];
            var.config == e.config && var.node == e.node && var.start as f64 == start
        })?;
        fixings.fix(v, true);
    }
    Some(fixings)
}

#[cfg(test)]
mod tests;
