//! Plans: per-job configuration, node and start time.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::timeline::capacity_violation;
use crate::workload::{Config, Workload};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub config: Config,
    /// Node index in the cluster.
    pub node: usize,
    pub start_time: f64,
    /// Start plus the planner's runtime estimate.
    pub predicted_end: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Plan {
    /// Keyed by job id.
    pub entries: BTreeMap<String, PlanEntry>,
    pub predicted_makespan: f64,
    /// Planning grid in seconds for time-indexed plans.
    pub resolution: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("job `{0}` is missing from the plan")]
    MissingJob(String),
    #[error("plan names unknown or unexpected job `{0}`")]
    UnexpectedJob(String),
    #[error("job `{0}` cannot run under its planned config on its planned node")]
    BadPlacement(String),
    #[error("node {node} over capacity at t={time}")]
    CapacityViolation { node: usize, time: f64 },
    #[error("predicted makespan {stated} differs from latest predicted end {actual}")]
    MakespanMismatch { stated: f64, actual: f64 },
}

impl Plan {
    fn check_with(&self, workload: &Workload, expected: impl Iterator<Item = usize>) -> Result<(), PlanError> {
        let mut want = BTreeSet::new();
        for j in expected {
            let id = &workload.jobs()[j].id;
            if !self.entries.contains_key(id) {
                return Err(PlanError::MissingJob(id.clone()));
            }
            want.insert(j);
        }
        let nodes = workload.cluster().nodes.len();
        for (id, e) in &self.entries {
            let j = workload
                .job_index(id)
                .filter(|j| want.contains(j))
                .ok_or_else(|| PlanError::UnexpectedJob(id.clone()))?;
            if e.node >= nodes
                || e.config.technique >= workload.techniques().len()
                || !workload.hosts(j, e.config, e.node)
                || !(e.start_time >= 0.0 && e.predicted_end >= e.start_time)
            {
                return Err(PlanError::BadPlacement(id.clone()));
            }
        }
        let caps = workload.cluster().capacities();
        let usages = self
            .entries
            .values()
            .map(|e| (e.node, e.start_time, e.predicted_end, e.config.gpus));
        if let Some((node, time)) = capacity_violation(&caps, usages) {
            return Err(PlanError::CapacityViolation { node, time });
        }
        let actual = self.entries.values().map(|e| e.predicted_end).fold(0.0, f64::max);
        if (actual - self.predicted_makespan).abs() > 1e-6 * actual.max(1.0) {
            return Err(PlanError::MakespanMismatch {
                stated: self.predicted_makespan,
                actual,
            });
        }
        Ok(())
    }

    /// Every job of the workload appears exactly once, placements are legal,
    /// and no node is ever over capacity.
    pub fn check(&self, workload: &Workload) -> Result<(), PlanError> {
        self.check_with(workload, 0..workload.jobs().len())
    }

    /// Like [`Plan::check`] but over a subset of jobs (by workload index).
    pub fn check_subset(&self, workload: &Workload, jobs: &[usize]) -> Result<(), PlanError> {
        self.check_with(workload, jobs.iter().copied())
    }

    /// Recomputes `predicted_makespan` from the entries.
    pub fn refresh_makespan(&mut self) {
        self.predicted_makespan = self.entries.values().map(|e| e.predicted_end).fold(0.0, f64::max);
    }
}
