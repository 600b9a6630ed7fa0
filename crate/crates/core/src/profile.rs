//! Trial runner: per-`(job, technique, gpus)` per-batch latencies.
//!
//! Latencies come from an [`Executor`]. The [`SyntheticExecutor`] evaluates
//! an analytic cost model; measured tables can be ingested instead (see the
//! `jointplan` crate for the CSV format). A [`LatencyGrid`] resolves a table
//! against a workload for fast index-based lookup.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::workload::{memory_feasible, ClusterSpec, Config, JobSpec, TechniqueSpec, Workload};

/// Mini-batches a trial run processes per profiled entry.
pub const TRIAL_BATCHES: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Latency {
    Seconds(f64),
    Infeasible,
}

impl Latency {
    pub fn seconds(self) -> Option<f64> {
        match self {
            Latency::Seconds(s) => Some(s),
            Latency::Infeasible => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    Ingested,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Synthetic => "synthetic profile",
            Provenance::Ingested => "ingested profile",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ProfileKey {
    pub job: String,
    pub technique: String,
    pub gpus: u32,
}

impl ProfileKey {
    pub fn new(job: &str, technique: &str, gpus: u32) -> Self {
        ProfileKey {
            job: job.to_string(),
            technique: technique.to_string(),
            gpus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("executor failed on ({}, {}, {}): {message}", .key.job, .key.technique, .key.gpus)]
    ExecutorFailure { key: ProfileKey, message: String },
    #[error("no profile entry for ({}, {}, {})", .0.job, .0.technique, .0.gpus)]
    MissingEntry(ProfileKey),
    #[error("profile entry ({}, {}, {}) is infeasible", .0.job, .0.technique, .0.gpus)]
    InfeasibleEntry(ProfileKey),
    #[error("latency for ({}, {}, {}) must be positive and finite", .0.job, .0.technique, .0.gpus)]
    NonPositiveLatency(ProfileKey),
    #[error("job `{0}` has no feasible configuration")]
    NoFeasibleConfig(String),
}

/// Per-batch latency or infeasibility for each profiled configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    entries: BTreeMap<ProfileKey, Latency>,
    provenance: Provenance,
}

impl ProfileTable {
    pub fn new(provenance: Provenance) -> Self {
        ProfileTable {
            entries: BTreeMap::new(),
            provenance,
        }
    }

    pub fn insert(&mut self, key: ProfileKey, latency: Latency) -> Result<(), ProfileError> {
        if let Latency::Seconds(s) = latency {
            if !(s.is_finite() && s > 0.0) {
                return Err(ProfileError::NonPositiveLatency(key));
            }
        }
        self.entries.insert(key, latency);
        Ok(())
    }

    pub fn get(&self, job: &str, technique: &str, gpus: u32) -> Option<Latency> {
        self.entries.get(&ProfileKey::new(job, technique, gpus)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ProfileKey, Latency)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Simulated seconds spent on trial runs: two mini-batches per feasible entry.
    pub fn profiling_seconds(&self) -> f64 {
        self.entries
            .values()
            .filter_map(|l| l.seconds())
            .map(|s| TRIAL_BATCHES * s)
            .sum()
    }

    /// `remaining_batches * latency` for a feasible entry.
    pub fn estimate_runtime(
        &self,
        job: &str,
        technique: &str,
        gpus: u32,
        remaining_batches: u64,
    ) -> Result<f64, ProfileError> {
        let key = ProfileKey::new(job, technique, gpus);
        match self.entries.get(&key) {
            None => Err(ProfileError::MissingEntry(key)),
            Some(Latency::Infeasible) => Err(ProfileError::InfeasibleEntry(key)),
            Some(Latency::Seconds(s)) => Ok(remaining_batches as f64 * s),
        }
    }
}

/// The two-call plugin surface of a profiling backend.
///
/// `profile` must be reentrant and free of side effects.
pub trait Executor {
    /// Per-batch latency of a short trial run.
    fn profile(&self, job: &JobSpec, technique: &TechniqueSpec, gpus: u32) -> Result<Latency, String>;

    /// Elapsed seconds to process `batches` mini-batches.
    fn execute(&self, job: &JobSpec, technique: &TechniqueSpec, gpus: u32, batches: u64) -> Result<f64, String>;
}

/// Analytic per-batch latency:
/// `mu * base * ((1 - sigma) / g + sigma + kappa * (g - 1))`, or
/// [`Latency::Infeasible`] when the memory rule rejects the configuration.
pub fn synthetic_latency(job: &JobSpec, technique: &TechniqueSpec, gpus: u32, gpu_memory: f64) -> Latency {
    if gpus == 0 || !memory_feasible(job, technique, gpus, gpu_memory) {
        return Latency::Infeasible;
    }
    let g = gpus as f64;
    let sigma = technique.serial_fraction;
    let scale = (1.0 - sigma) / g + sigma + technique.comm_overhead * (g - 1.0);
    Latency::Seconds(technique.offload_multiplier * job.base_batch_time * scale)
}

/// Executor backed by [`synthetic_latency`]. A `g`-GPU trial runs on the
/// largest-memory node that has at least `g` GPUs.
#[derive(Debug, Clone)]
pub struct SyntheticExecutor {
    /// Index `g - 1`: best per-GPU memory among nodes with at least `g` GPUs.
    memory_by_gpus: Vec<f64>,
}

impl SyntheticExecutor {
    pub fn for_cluster(cluster: &ClusterSpec) -> Self {
        let max = cluster.max_gpus() as usize;
        let memory_by_gpus = (1..=max)
            .map(|g| {
                cluster
                    .nodes
                    .iter()
                    .filter(|n| n.gpu_count as usize >= g)
                    .map(|n| n.gpu_memory)
                    .fold(0.0, f64::max)
            })
            .collect();
        SyntheticExecutor { memory_by_gpus }
    }
}

impl Executor for SyntheticExecutor {
    fn profile(&self, job: &JobSpec, technique: &TechniqueSpec, gpus: u32) -> Result<Latency, String> {
        match self.memory_by_gpus.get((gpus as usize).wrapping_sub(1)) {
            Some(&mem) => Ok(synthetic_latency(job, technique, gpus, mem)),
            None => Ok(Latency::Infeasible),
        }
    }

    fn execute(&self, job: &JobSpec, technique: &TechniqueSpec, gpus: u32, batches: u64) -> Result<f64, String> {
        match self.profile(job, technique, gpus)? {
            Latency::Seconds(s) => Ok(batches as f64 * s),
            Latency::Infeasible => Err("configuration does not fit in memory".to_string()),
        }
    }
}

/// Profiles every feasible config of every job, exactly once each.
pub fn build_profile_table(workload: &Workload, executor: &dyn Executor) -> Result<ProfileTable, ProfileError> {
    let mut table = ProfileTable::new(Provenance::Synthetic);
    for &j in workload.id_order() {
        let job = &workload.jobs()[j];
        for cfg in workload.configs(j) {
            let technique = &workload.techniques()[cfg.technique];
            let key = ProfileKey::new(&job.id, &technique.name, cfg.gpus);
            let latency =
                executor
                    .profile(job, technique, cfg.gpus)
                    .map_err(|message| ProfileError::ExecutorFailure {
                        key: key.clone(),
                        message,
                    })?;
            table.insert(key, latency)?;
        }
    }
    Ok(table)
}

/// A profile table resolved against a workload: `latency(job, config)` by index.
#[derive(Debug, Clone)]
pub struct LatencyGrid {
    max_gpus: u32,
    techniques: usize,
    /// `[job][technique][g - 1]`, flattened.
    cells: Vec<Option<f64>>,
    /// Feasible configs per job, in registration-then-g order.
    configs: Vec<Vec<Config>>,
    profiling_seconds: f64,
    provenance: Provenance,
}

impl LatencyGrid {
    /// Requires an entry for every feasible config of every job, and at least
    /// one non-infeasible entry per job.
    pub fn new(workload: &Workload, table: &ProfileTable) -> Result<Self, ProfileError> {
        let max_gpus = workload.cluster().max_gpus();
        let techniques = workload.techniques().len();
        let jobs = workload.jobs();
        let mut cells = vec![None; jobs.len() * techniques * max_gpus as usize];
        let mut configs = Vec::with_capacity(jobs.len());
        for (j, job) in jobs.iter().enumerate() {
            let mut feasible = Vec::new();
            for cfg in workload.configs(j) {
                let name = &workload.techniques()[cfg.technique].name;
                match table.get(&job.id, name, cfg.gpus) {
                    None => return Err(ProfileError::MissingEntry(ProfileKey::new(&job.id, name, cfg.gpus))),
                    Some(Latency::Infeasible) => {}
                    Some(Latency::Seconds(s)) => {
                        let idx = (j * techniques + cfg.technique) * max_gpus as usize + cfg.gpus as usize - 1;
                        cells[idx] = Some(s);
                        feasible.push(cfg);
                    }
                }
            }
            if feasible.is_empty() {
                return Err(ProfileError::NoFeasibleConfig(job.id.clone()));
            }
            configs.push(feasible);
        }
        Ok(LatencyGrid {
            max_gpus,
            techniques,
            cells,
            configs,
            profiling_seconds: table.profiling_seconds(),
            provenance: table.provenance(),
        })
    }

    pub fn latency(&self, job: usize, config: Config) -> Option<f64> {
        if config.gpus == 0 || config.gpus > self.max_gpus || config.technique >= self.techniques {
            return None;
        }
        let idx = (job * self.techniques + config.technique) * self.max_gpus as usize + config.gpus as usize - 1;
        self.cells.get(idx).copied().flatten()
    }

    /// Profiled-feasible configs of `job`.
    pub fn configs(&self, job: usize) -> &[Config] {
        &self.configs[job]
    }

    /// Fastest technique at `gpus` among those `accept` admits.
    /// Ties go to the earlier registered technique.
    pub fn best_at(&self, job: usize, gpus: u32, mut accept: impl FnMut(Config) -> bool) -> Option<(Config, f64)> {
        let mut best: Option<(Config, f64)> = None;
        for t in 0..self.techniques {
            let cfg = Config { technique: t, gpus };
            if let Some(l) = self.latency(job, cfg) {
                if accept(cfg) && best.is_none_or(|(_, b)| l < b) {
                    best = Some((cfg, l));
                }
            }
        }
        best
    }

    pub fn max_gpus(&self) -> u32 {
        self.max_gpus
    }

    pub fn profiling_seconds(&self) -> f64 {
        self.profiling_seconds
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}
