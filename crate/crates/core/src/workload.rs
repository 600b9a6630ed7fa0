//! Jobs, cluster, registered techniques and the memory rule deciding which
//! `(technique, gpus)` pairs a job may run under.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// One model-training trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub id: String,
    /// Mini-batches to train.
    pub total_batches: u64,
    /// Single-GPU, overhead-free seconds per mini-batch.
    pub base_batch_time: f64,
    /// Parameter and optimizer state, GiB.
    pub model_memory: f64,
    /// Per-GPU working memory, GiB.
    #[serde(default)]
    pub activation_memory: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub gpu_count: u32,
    /// Memory of each GPU on the node, GiB.
    pub gpu_memory: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub nodes: Vec<NodeSpec>,
}

impl ClusterSpec {
    /// `count` identical nodes named `node0`, `node1`, ...
    pub fn uniform(count: usize, gpu_count: u32, gpu_memory: f64) -> Self {
        ClusterSpec {
            nodes: (0..count)
                .map(|i| NodeSpec {
                    id: format!("node{i}"),
                    gpu_count,
                    gpu_memory,
                })
                .collect(),
        }
    }

    pub fn max_gpus(&self) -> u32 {
        self.nodes.iter().map(|n| n.gpu_count).max().unwrap_or(0)
    }

    pub fn total_gpus(&self) -> u32 {
        self.nodes.iter().map(|n| n.gpu_count).sum()
    }

    pub fn capacities(&self) -> Vec<u32> {
        self.nodes.iter().map(|n| n.gpu_count).collect()
    }
}

/// How a technique spreads a model over its GPUs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Archetype {
    /// Full replica per GPU (data parallel).
    Replicated,
    /// Parameters and optimizer state sharded across GPUs.
    Sharded,
    /// Layers split into pipeline stages.
    Pipelined,
    /// State kept in host memory and streamed in.
    Offloaded,
}

impl Archetype {
    pub const ALL: [Archetype; 4] = [
        Archetype::Replicated,
        Archetype::Sharded,
        Archetype::Pipelined,
        Archetype::Offloaded,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Archetype::Replicated => "replicated",
            Archetype::Sharded => "sharded",
            Archetype::Pipelined => "pipelined",
            Archetype::Offloaded => "offloaded",
        }
    }
}

fn one() -> f64 {
    1.0
}

/// A registered parallelism technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechniqueSpec {
    pub name: String,
    pub archetype: Archetype,
    /// Fraction of per-batch work that does not parallelize, in `[0, 1)`.
    pub serial_fraction: f64,
    /// Added latency per extra GPU, as a fraction of the base batch time.
    pub comm_overhead: f64,
    /// Slowdown factor for offloading; 1 for every other archetype.
    #[serde(default = "one")]
    pub offload_multiplier: f64,
    pub min_gpus: u32,
}

impl TechniqueSpec {
    /// Default parameters for an archetype.
    pub fn preset(archetype: Archetype) -> Self {
        let (name, serial_fraction, comm_overhead, offload_multiplier, min_gpus) = match archetype {
            Archetype::Replicated => ("ddp-like", 0.02, 0.01, 1.0, 1),
            Archetype::Sharded => ("fsdp-like", 0.05, 0.03, 1.0, 2),
            Archetype::Pipelined => ("gpipe-like", 0.15, 0.005, 1.0, 2),
            Archetype::Offloaded => ("offload-like", 0.02, 0.01, 2.5, 1),
        };
        TechniqueSpec {
            name: name.to_string(),
            archetype,
            serial_fraction,
            comm_overhead,
            offload_multiplier,
            min_gpus,
        }
    }

    /// One preset per archetype, in registration order.
    pub fn default_library() -> Vec<TechniqueSpec> {
        Archetype::ALL.iter().map(|&a| Self::preset(a)).collect()
    }
}

/// A technique (by registration index) and a GPU count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Config {
    pub technique: usize,
    pub gpus: u32,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorkloadError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("job `{0}` has no feasible configuration")]
    NoFeasibleConfig(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

/// Serialized shape of a workload: exactly `jobs`, `cluster`, `techniques`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub jobs: Vec<JobSpec>,
    pub cluster: ClusterSpec,
    pub techniques: Vec<TechniqueSpec>,
}

/// A validated workload. Immutable; obtain one through [`validate_workload`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WorkloadSpec", into = "WorkloadSpec")]
pub struct Workload {
    jobs: Vec<JobSpec>,
    cluster: ClusterSpec,
    techniques: Vec<TechniqueSpec>,
    /// Job indices sorted by id.
    id_order: Vec<usize>,
}

impl Workload {
    pub fn jobs(&self) -> &[JobSpec] {
        &self.jobs
    }

    pub fn cluster(&self) -> &ClusterSpec {
        &self.cluster
    }

    pub fn techniques(&self) -> &[TechniqueSpec] {
        &self.techniques
    }

    /// Job indices in ascending id order.
    pub fn id_order(&self) -> &[usize] {
        &self.id_order
    }

    pub fn job_index(&self, id: &str) -> Option<usize> {
        self.id_order
            .binary_search_by(|&j| self.jobs[j].id.as_str().cmp(id))
            .ok()
            .map(|pos| self.id_order[pos])
    }

    pub fn technique_index(&self, name: &str) -> Option<usize> {
        self.techniques.iter().position(|t| t.name == name)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.cluster.nodes.iter().position(|n| n.id == id)
    }

    pub fn spec(&self) -> WorkloadSpec {
        WorkloadSpec {
            jobs: self.jobs.clone(),
            cluster: self.cluster.clone(),
            techniques: self.techniques.clone(),
        }
    }

    /// Feasible configs of job `job`, see [`feasible_configs`].
    pub fn configs(&self, job: usize) -> Vec<Config> {
        feasible_configs(&self.jobs[job], &self.cluster, &self.techniques)
    }

    /// Whether node `node` can host job `job` under `config`.
    pub fn hosts(&self, job: usize, config: Config, node: usize) -> bool {
        let n = &self.cluster.nodes[node];
        let t = &self.techniques[config.technique];
        config.gpus >= t.min_gpus
            && config.gpus <= n.gpu_count
            && memory_feasible(&self.jobs[job], t, config.gpus, n.gpu_memory)
    }
}

impl TryFrom<WorkloadSpec> for Workload {
    type Error = WorkloadError;

    fn try_from(spec: WorkloadSpec) -> Result<Self, Self::Error> {
        validate_workload(spec.jobs, spec.cluster, spec.techniques)
    }
}

impl From<Workload> for WorkloadSpec {
    fn from(w: Workload) -> Self {
        WorkloadSpec {
            jobs: w.jobs,
            cluster: w.cluster,
            techniques: w.techniques,
        }
    }
}

fn violation(what: String) -> WorkloadError {
    WorkloadError::InvariantViolation(what)
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), WorkloadError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(WorkloadError::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// Checks every type invariant and that each job has at least one feasible
/// config. Validating an already validated workload returns it unchanged.
pub fn validate_workload(
    jobs: Vec<JobSpec>,
    cluster: ClusterSpec,
    techniques: Vec<TechniqueSpec>,
) -> Result<Workload, WorkloadError> {
    if cluster.nodes.is_empty() {
        return Err(violation("cluster.nodes is empty".into()));
    }
    check_unique(cluster.nodes.iter().map(|n| n.id.as_str()))?;
    for n in &cluster.nodes {
        if n.gpu_count == 0 {
            return Err(violation(format!("node `{}`: gpu_count", n.id)));
        }
        if !positive(n.gpu_memory) {
            return Err(violation(format!("node `{}`: gpu_memory", n.id)));
        }
    }

    check_unique(techniques.iter().map(|t| t.name.as_str()))?;
    for t in &techniques {
        let field = |f: &str| violation(format!("technique `{}`: {f}", t.name));
        if !(t.serial_fraction.is_finite() && (0.0..1.0).contains(&t.serial_fraction)) {
            return Err(field("serial_fraction"));
        }
        if !(t.comm_overhead.is_finite() && t.comm_overhead >= 0.0) {
            return Err(field("comm_overhead"));
        }
        if !(t.offload_multiplier.is_finite() && t.offload_multiplier >= 1.0) {
            return Err(field("offload_multiplier"));
        }
        if t.archetype != Archetype::Offloaded && t.offload_multiplier != 1.0 {
            return Err(field("offload_multiplier"));
        }
        if t.min_gpus == 0 {
            return Err(field("min_gpus"));
        }
    }

    check_unique(jobs.iter().map(|j| j.id.as_str()))?;
    for j in &jobs {
        let field = |f: &str| violation(format!("job `{}`: {f}", j.id));
        if j.total_batches == 0 {
            return Err(field("total_batches"));
        }
        if !positive(j.base_batch_time) {
            return Err(field("base_batch_time"));
        }
        if !positive(j.model_memory) {
            return Err(field("model_memory"));
        }
        if !(j.activation_memory.is_finite() && j.activation_memory >= 0.0) {
            return Err(field("activation_memory"));
        }
        if feasible_configs(j, &cluster, &techniques).is_empty() {
            return Err(WorkloadError::NoFeasibleConfig(j.id.clone()));
        }
    }

    let mut id_order: Vec<usize> = (0..jobs.len()).collect();
    id_order.sort_by(|&a, &b| jobs[a].id.cmp(&jobs[b].id));
    Ok(Workload {
        jobs,
        cluster,
        techniques,
        id_order,
    })
}

/// Coarse shard-factor memory rule: the model state divided by the shard
/// factor plus activations must fit one GPU. Offloading always fits.
pub fn memory_feasible(job: &JobSpec, technique: &TechniqueSpec, gpus: u32, gpu_memory: f64) -> bool {
    let shard = match technique.archetype {
        Archetype::Offloaded => return true,
        Archetype::Replicated => 1.0,
        Archetype::Sharded | Archetype::Pipelined => gpus.max(1) as f64,
    };
    job.model_memory / shard + job.activation_memory <= gpu_memory
}

/// Every `(technique, g)` with `min_gpus <= g <= max node size` that some node
/// of at least `g` GPUs can hold in memory. Ordered by registration, then `g`.
pub fn feasible_configs(job: &JobSpec, cluster: &ClusterSpec, techniques: &[TechniqueSpec]) -> Vec<Config> {
    let max = cluster.max_gpus();
    let mut out = Vec::new();
    for (ti, t) in techniques.iter().enumerate() {
        for g in t.min_gpus..=max {
            let fits = cluster
                .nodes
                .iter()
                .any(|n| n.gpu_count >= g && memory_feasible(job, t, g, n.gpu_memory));
            if fits {
                out.push(Config { technique: ti, gpus: g });
            }
        }
    }
    out
}
