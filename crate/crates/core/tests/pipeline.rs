//! The public pipeline on hand-checkable workloads: profile, plan, simulate.

use jointplan_core::milp::{
    branch_and_bound, brute_force_schedule, build_milp, choose_delta, decode_plan, encode_plan, solve_lp_relaxation,
    BranchOptions,
};
use jointplan_core::planners::plan;
use jointplan_core::{
    build_profile_table, simulate, validate_workload, ClusterSpec, JobSpec, LatencyGrid, PlannerKind, PlannerOptions,
    Problem, SimOptions, SyntheticExecutor, TechniqueSpec, Workload,
};
use proptest::prelude::*;

fn job(id: &str, batches: u64, base: f64, memory: f64) -> JobSpec {
    JobSpec {
        id: id.into(),
        total_batches: batches,
        base_batch_time: base,
        model_memory: memory,
        activation_memory: 1.0,
    }
}

fn setup(jobs: Vec<JobSpec>, cluster: ClusterSpec) -> (Workload, LatencyGrid) {
    let w = validate_workload(jobs, cluster, TechniqueSpec::default_library()).unwrap();
    let table = build_profile_table(&w, &SyntheticExecutor::for_cluster(w.cluster())).unwrap();
    let grid = LatencyGrid::new(&w, &table).unwrap();
    (w, grid)
}

/// Amdahl-style latency evaluated independently of the crate.
fn oracle_latency(base: f64, sigma: f64, kappa: f64, mu: f64, g: f64) -> f64 {
    mu * base * ((1.0 - sigma) / g + sigma + kappa * (g - 1.0))
}

#[test]
fn current_practice_runs_jobs_back_to_back_on_the_whole_node() {
    let (w, grid) = setup(
        vec![job("a", 100, 1.0, 4.0), job("b", 50, 2.0, 4.0)],
        ClusterSpec::uniform(1, 4, 40.0),
    );
    let p = Problem::initial(&w, &grid);
    let plan0 = plan(PlannerKind::CurrentPractice, &p, &PlannerOptions::default()).unwrap();
    let r = simulate(&w, &grid, &plan0, &SimOptions::new(PlannerKind::CurrentPractice)).unwrap();
    // Four-GPU replication beats the other techniques for a model this small.
    let per_batch = oracle_latency(1.0, 0.02, 0.01, 1.0, 4.0);
    let expected = 100.0 * per_batch + 50.0 * 2.0 * per_batch;
    assert!((r.makespan - expected).abs() < 1e-9, "{} vs {expected}", r.makespan);
    assert_eq!(r.replan_count, 0);
}

#[test]
fn saturn_beats_sequential_execution_on_a_mixed_pair() {
    let (w, grid) = setup(
        vec![job("small", 400, 0.5, 4.0), job("large", 400, 0.5, 60.0)],
        ClusterSpec::uniform(1, 8, 40.0),
    );
    let p = Problem::initial(&w, &grid);
    let saturn = plan(PlannerKind::Saturn, &p, &PlannerOptions::default()).unwrap();
    let cp = plan(PlannerKind::CurrentPractice, &p, &PlannerOptions::default()).unwrap();
    assert!(saturn.predicted_makespan < cp.predicted_makespan);
    for kind in [PlannerKind::Saturn, PlannerKind::CurrentPractice] {
        let plan0 = if kind == PlannerKind::Saturn { &saturn } else { &cp };
        let r = simulate(&w, &grid, plan0, &SimOptions::new(kind)).unwrap();
        r.verify(&w, &grid).unwrap();
    }
}

fn small_instance(seed: u64) -> (Workload, LatencyGrid) {
    let mut rng = jointplan_core::rng::SplitMix64::new(seed);
    let jobs = (0..2 + rng.below(2))
        .map(|i| {
            job(
                &format!("j{i}"),
                2 + rng.below(6),
                rng.range_f64(0.5, 2.0),
                4.0 + rng.below(50) as f64,
            )
        })
        .collect();
    setup(jobs, ClusterSpec::uniform(1, 2 + rng.below(3) as u32, 40.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decoded_optimum_round_trips_through_fixings(seed in 0u64..5_000) {
        let (w, grid) = small_instance(seed);
        let p = Problem::initial(&w, &grid);
        let delta = choose_delta(&p, 12, None).unwrap();
        let inst = build_milp(&p, delta, 12).unwrap();
        let sol = branch_and_bound(&inst, &BranchOptions { node_limit: None, ..BranchOptions::default() }).unwrap();
        let brute = brute_force_schedule(&inst).unwrap();
        prop_assert!((sol.objective - brute.objective).abs() < 1e-6);
        let decoded = decode_plan(&inst, &sol).unwrap();
        let fixed = encode_plan(&inst, &decoded).unwrap();
        let lp = solve_lp_relaxation(&inst, &fixed).unwrap();
        prop_assert!((lp.value - decoded.predicted_makespan).abs() < 1e-6);
    }
}
