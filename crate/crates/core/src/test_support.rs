//! Fixtures shared by unit tests across modules.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::milp::build_milp;
use crate::problem::Problem;
use crate::profile::{build_profile_table, LatencyGrid, SyntheticExecutor};
use crate::rng::SplitMix64;
use crate::workload::{validate_workload, Archetype, ClusterSpec, JobSpec, TechniqueSpec, Workload};

pub(crate) fn technique(name: &str, sigma: f64, kappa: f64) -> TechniqueSpec {
    TechniqueSpec {
        name: name.to_string(),
        archetype: Archetype::Replicated,
        serial_fraction: sigma,
        comm_overhead: kappa,
        offload_multiplier: 1.0,
        min_gpus: 1,
    }
}

pub(crate) fn job(id: &str, batches: u64, base: f64) -> JobSpec {
    JobSpec {
        id: id.to_string(),
        total_batches: batches,
        base_batch_time: base,
        model_memory: 1.0,
        activation_memory: 0.0,
    }
}

pub(crate) fn fixture(
    jobs: Vec<JobSpec>,
    techniques: Vec<TechniqueSpec>,
    cluster: ClusterSpec,
) -> (Workload, LatencyGrid) {
    let w = validate_workload(jobs, cluster, techniques).unwrap();
    let table = build_profile_table(&w, &SyntheticExecutor::for_cluster(w.cluster())).unwrap();
    let grid = LatencyGrid::new(&w, &table).unwrap();
    (w, grid)
}

/// Two jobs on one 2-GPU node: 10 s on one GPU, 6 s on two.
pub(crate) fn two_job_fixture() -> (Workload, LatencyGrid) {
    fixture(
        vec![job("a", 10, 1.0), job("b", 10, 1.0)],
        vec![technique("t", 0.2, 0.0)],
        ClusterSpec::uniform(1, 2, 40.0),
    )
}

/// Random instance with at most 3 jobs, 2 techniques, 4 GPUs and 8 unit intervals.
pub(crate) fn tiny_fixture(seed: u64) -> (Workload, LatencyGrid) {
    let mut rng = SplitMix64::new(seed);
    loop {
        let jobs: Vec<JobSpec> = (0..1 + rng.below(3))
            .map(|i| {
                let batches = 1 + rng.below(4);
                let base = [0.5, 1.0, 1.5][rng.below(3) as usize];
                job(&alloc::format!("j{i}"), batches, base)
            })
            .collect();
        let techniques: Vec<TechniqueSpec> = (0..1 + rng.below(2))
            .map(|i| {
                let sigma = [0.0, 0.1, 0.3][rng.below(3) as usize];
                let kappa = [0.0, 0.02, 0.1][rng.below(3) as usize];
                technique(&alloc::format!("t{i}"), sigma, kappa)
            })
            .collect();
        let cluster = match rng.below(3) {
            0 => ClusterSpec::uniform(1, 4, 40.0),
            1 => ClusterSpec::uniform(1, 2 + rng.below(2) as u32, 40.0),
            _ => ClusterSpec::uniform(2, 2, 40.0),
        };
        let (w, grid) = fixture(jobs, techniques, cluster);
        let p = Problem::initial(&w, &grid);
        if build_milp(&p, 1.0, 8).is_ok() {
            return (w, grid);
        }
    }
}
