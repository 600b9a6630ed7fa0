//! The input every planner consumes: the unfinished jobs at some instant,
//! their remaining work, and where the running ones currently sit.

use alloc::vec::Vec;

use crate::profile::LatencyGrid;
use crate::workload::{Config, Workload};

/// A running job's current configuration and node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub config: Config,
    pub node: usize,
}

/// Remaining work of one unfinished job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobWork {
    /// Index into the workload's jobs.
    pub job: usize,
    /// Completed mini-batches, floored. A job that is reconfigured resumes from here.
    pub batches_done: u64,
    /// Exact progress in mini-batches; differs from `batches_done` only while running.
    pub progress: f64,
    /// Current placement if the job is running.
    pub current: Option<Placement>,
}

/// A planning instance anchored at `now`.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub workload: &'a Workload,
    pub grid: &'a LatencyGrid,
    pub now: f64,
    /// Seconds charged to a running job that is moved, resized or paused.
    pub checkpoint_cost: f64,
    /// Unfinished jobs in ascending id order.
    pub jobs: Vec<JobWork>,
}

impl<'a> Problem<'a> {
    /// Every job pending with no progress, at time zero.
    pub fn initial(workload: &'a Workload, grid: &'a LatencyGrid) -> Self {
        Problem {
            workload,
            grid,
            now: 0.0,
            checkpoint_cost: 0.0,
            jobs: workload
                .id_order()
                .iter()
                .map(|&job| JobWork {
                    job,
                    batches_done: 0,
                    progress: 0.0,
                    current: None,
                })
                .collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.workload.cluster().nodes.len()
    }

    pub fn job_id(&self, w: &JobWork) -> &'a str {
        &self.workload.jobs()[w.job].id
    }

    pub fn remaining_batches(&self, w: &JobWork) -> u64 {
        self.workload.jobs()[w.job].total_batches - w.batches_done
    }

    /// Whether `node` can host the job under `config` with a profiled latency.
    pub fn hosts(&self, w: &JobWork, config: Config, node: usize) -> bool {
        self.grid.latency(w.job, config).is_some() && self.workload.hosts(w.job, config, node)
    }

    /// Seconds to finish `w` under `config` on `node`, starting at `now` when
    /// `starts_now` holds. Continuing in the current placement from `now` costs
    /// only the exact remaining work; any other choice for a running job pays
    /// the checkpoint and restarts from the last completed batch.
    pub fn runtime(&self, w: &JobWork, config: Config, node: usize, starts_now: bool) -> Option<f64> {
        let latency = self.grid.latency(w.job, config)?;
        let total = self.workload.jobs()[w.job].total_batches as f64;
        let keep = Placement { config, node };
        match w.current {
            Some(cur) if cur == keep && starts_now => Some((total - w.progress).max(0.0) * latency),
            Some(_) => Some(self.checkpoint_cost + (total - w.batches_done as f64) * latency),
            None => Some((total - w.batches_done as f64) * latency),
        }
    }

    /// Fastest runtime of `w` over every feasible config and node.
    pub fn best_runtime(&self, w: &JobWork) -> Option<f64> {
        let mut best: Option<f64> = None;
        for &cfg in self.grid.configs(w.job) {
            for n in 0..self.node_count() {
                if !self.workload.hosts(w.job, cfg, n) {
                    continue;
                }
                if let Some(t) = self.runtime(w, cfg, n, true) {
                    best = Some(best.map_or(t, |b: f64| b.min(t)));
                }
            }
        }
        best
    }
}
