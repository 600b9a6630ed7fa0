//! Workload presets shaped like a two-model hyperparameter grid, plus a
//! seeded random generator for sweeps.
//!
//! A preset crosses two models (a small one that fits a single GPU and a
//! large one that needs sharding, pipelining or offloading) with three
//! learning rates and two batch sizes: 12 jobs on `nodes` nodes of 8 GPUs.
//! Learning rate only changes the job id. Batch size scales the per-batch
//! time and divides the batch count, and ten epochs fold into the count.

use jointplan_core::rng::SplitMix64;
use jointplan_core::{validate_workload, ClusterSpec, JobSpec, TechniqueSpec, Workload, WorkloadError};

pub const PRESETS: [&str; 2] = ["wikitext_mirror", "imagenet_mirror"];

const EPOCHS: u64 = 10;
const GPUS_PER_NODE: u32 = 8;
/// Preset nodes carry 80 GiB GPUs, so the large tier shards over two.
const GPU_MEMORY: f64 = 80.0;
/// Random sweeps use 40 GiB GPUs, where large models need more of them.
const RANDOM_GPU_MEMORY: f64 = 40.0;
const LEARNING_RATES: [&str; 3] = ["1e-5", "1e-4", "1e-3"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenerateError {
    #[error("unknown preset `{0}` (expected one of wikitext_mirror, imagenet_mirror)")]
    UnknownPreset(String),
    #[error("node count must be at least 1")]
    NoNodes,
    #[error(transparent)]
    Workload(#[from] WorkloadError),
}

struct Model {
    name: &'static str,
    /// Parameters plus optimizer state, GiB.
    model_memory: f64,
    activation_memory: f64,
    /// Single-GPU seconds per training sample.
    sample_time: f64,
}

struct Preset {
    samples_per_epoch: u64,
    batch_sizes: [u64; 2],
    models: [Model; 2],
}

fn preset(name: &str) -> Option<Preset> {
    match name {
        "wikitext_mirror" => Some(Preset {
            samples_per_epoch: 115_200,
            batch_sizes: [16, 32],
            models: [
                Model {
                    name: "gpt2",
                    model_memory: 20.0,
                    activation_memory: 6.0,
                    sample_time: 0.0125,
                },
                Model {
                    name: "gptj",
                    model_memory: 96.0,
                    activation_memory: 8.0,
                    sample_time: 0.0625,
                },
            ],
        }),
        "imagenet_mirror" => Some(Preset {
            samples_per_epoch: 128_000,
            batch_sizes: [64, 128],
            models: [
                Model {
                    name: "vitg",
                    model_memory: 96.0,
                    activation_memory: 8.0,
                    sample_time: 0.045,
                },
                Model {
                    name: "resnet200",
                    model_memory: 20.0,
                    activation_memory: 6.0,
                    sample_time: 0.008,
                },
            ],
        }),
        _ => None,
    }
}

/// Builds a preset workload. Per-batch times get a seeded ±10% jitter.
pub fn generate_workload(name: &str, nodes: usize, seed: u64) -> Result<Workload, GenerateError> {
    let p = preset(name).ok_or_else(|| GenerateError::UnknownPreset(name.to_string()))?;
    if nodes == 0 {
        return Err(GenerateError::NoNodes);
    }
    let mut rng = SplitMix64::new(seed);
    let mut jobs = Vec::with_capacity(12);
    for m in &p.models {
        for lr in LEARNING_RATES {
            for bs in p.batch_sizes {
                let jitter = rng.range_f64(0.9, 1.1);
                jobs.push(JobSpec {
                    id: format!("{}-lr{lr}-bs{bs}", m.name),
                    total_batches: EPOCHS * p.samples_per_epoch.div_ceil(bs),
                    base_batch_time: m.sample_time * bs as f64 * jitter,
                    model_memory: m.model_memory,
                    activation_memory: m.activation_memory,
                });
            }
        }
    }
    let cluster = ClusterSpec::uniform(nodes, GPUS_PER_NODE, GPU_MEMORY);
    Ok(validate_workload(jobs, cluster, TechniqueSpec::default_library())?)
}

/// Shape of [`random_workload`] output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomShape {
    pub min_jobs: u64,
    pub max_jobs: u64,
    pub min_nodes: u64,
    pub max_nodes: u64,
    pub gpus_per_node: u32,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape {
            min_jobs: 4,
            max_jobs: 8,
            min_nodes: 1,
            max_nodes: 2,
            gpus_per_node: 4,
        }
    }
}

/// Random jobs over the default technique library: a mix of models that fit
/// one GPU and models that must be sharded or offloaded.
pub fn random_workload(seed: u64, shape: &RandomShape) -> Workload {
    let mut rng = SplitMix64::new(seed);
    let pick = |rng: &mut SplitMix64, lo: u64, hi: u64| lo + rng.below(hi - lo + 1);
    let n_jobs = pick(&mut rng, shape.min_jobs, shape.max_jobs);
    let n_nodes = pick(&mut rng, shape.min_nodes, shape.max_nodes) as usize;
    let jobs = (0..n_jobs)
        .map(|i| {
            let large = rng.below(3) == 0;
            let model_memory = if large {
                rng.range_f64(48.0, 100.0)
            } else {
                rng.range_f64(4.0, 30.0)
            };
            JobSpec {
                id: format!("job{i:02}"),
                total_batches: pick(&mut rng, 200, 2_000),
                base_batch_time: rng.range_f64(0.2, 2.0),
                model_memory,
                activation_memory: rng.range_f64(0.0, 6.0),
            }
        })
        .collect();
    let cluster = ClusterSpec::uniform(n_nodes, shape.gpus_per_node, RANDOM_GPU_MEMORY);
    validate_workload(jobs, cluster, TechniqueSpec::default_library()).expect("offloading always fits")
}
