//! End-to-end acceptance checks. Runs without the libtest harness so each
//! criterion prints exactly one PASS or FAIL line, followed by a non-zero
//! exit if any failed.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use jointplan::experiment::{run_experiment, run_one, Experiment, ExperimentConfig, Prepared, WorkloadSource};
use jointplan::generate::{random_workload, RandomShape};
use jointplan_core::milp::{
    branch_and_bound, brute_force_schedule, build_milp, solve_lp_relaxation, BranchOptions, Fixings, MilpInstance,
};
use jointplan_core::rng::SplitMix64;
use jointplan_core::{
    build_profile_table, validate_workload, Archetype, ClusterSpec, JobSpec, LatencyGrid, PlannerKind, Problem,
    SimReport, SyntheticExecutor, TechniqueSpec,
};

const TINY_INSTANCES: u64 = 50;
const RANDOM_WORKLOADS: u64 = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// A seeded MILP small enough for exhaustive search: up to four jobs, one or
/// two techniques, one or two small nodes, unit intervals.
fn tiny_instance(seed: u64) -> MilpInstance {
    let mut rng = SplitMix64::new(seed);
    loop {
        let jobs: Vec<JobSpec> = (0..2 + rng.below(3))
            .map(|i| JobSpec {
                id: format!("j{i}"),
                total_batches: 1 + rng.below(4),
                base_batch_time: [0.5, 1.0, 1.5][rng.below(3) as usize],
                model_memory: 1.0,
                activation_memory: 0.0,
            })
            .collect();
        let techniques: Vec<TechniqueSpec> = (0..1 + rng.below(2))
            .map(|i| TechniqueSpec {
                name: format!("t{i}"),
                archetype: Archetype::Replicated,
                serial_fraction: [0.0, 0.1, 0.3][rng.below(3) as usize],
                comm_overhead: [0.0, 0.02, 0.1][rng.below(3) as usize],
                offload_multiplier: 1.0,
                min_gpus: 1,
            })
            .collect();
        let cluster = match rng.below(3) {
            0 => ClusterSpec::uniform(1, 4, 40.0),
            1 => ClusterSpec::uniform(1, 2 + rng.below(2) as u32, 40.0),
            _ => ClusterSpec::uniform(2, 2, 40.0),
        };
        let w = validate_workload(jobs, cluster, techniques).expect("tiny workloads are valid");
        let table = build_profile_table(&w, &SyntheticExecutor::for_cluster(w.cluster())).unwrap();
        let grid = LatencyGrid::new(&w, &table).unwrap();
        if let Ok(inst) = build_milp(&Problem::initial(&w, &grid), 1.0, 10) {
            return inst;
        }
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    if took > limit {
        o.pass = false;
    }
    o.detail = format!("{} ({:.1}s, limit {}s)", o.detail, took.as_secs_f64(), limit.as_secs());
    o
}

fn milp_optimality(instances: &[MilpInstance]) -> Outcome {
    let opts = BranchOptions {
        node_limit: None,
        ..BranchOptions::default()
    };
    let mut worst = 0.0f64;
    for inst in instances {
        let bnb = branch_and_bound(inst, &opts).unwrap();
        let brute = brute_force_schedule(inst).unwrap();
        worst = worst.max((bnb.objective - brute.objective).abs());
    }
    outcome(
        worst <= 1e-6,
        format!("{} instances, max |bnb - brute| = {worst:.2e}", instances.len()),
    )
}

fn lp_soundness(instances: &[MilpInstance]) -> Outcome {
    let mut violations = 0;
    let mut strict = 0;
    for inst in instances {
        let lp = solve_lp_relaxation(inst, &Fixings::new()).unwrap();
        let opt = brute_force_schedule(inst).unwrap().objective;
        if lp.value > opt + 1e-6 {
            violations += 1;
        }
        if lp.value < opt - 1e-6 {
            strict += 1;
        }
    }
    outcome(
        violations == 0 && strict > 0,
        format!("{violations} bound violations, strictly below optimum on {strict}"),
    )
}

fn simulate_all(prepared: &Prepared, config: &ExperimentConfig) -> Vec<SimReport> {
    config
        .planners
        .iter()
        .map(|&k| run_one(prepared, config, k).expect("every planner succeeds").1)
        .collect()
}

/// Runs every planner on the random sweep with default options.
fn random_sweep() -> Vec<Vec<SimReport>> {
    (0..RANDOM_WORKLOADS)
        .map(|seed| {
            let prepared = Prepared::synthetic(random_workload(seed, &RandomShape::default())).unwrap();
            let planners = vec![
                PlannerKind::Saturn,
                PlannerKind::CurrentPractice,
                PlannerKind::Random(seed),
                PlannerKind::Optimus,
            ];
            let config = ExperimentConfig::new(WorkloadSource::File("random".into()), planners);
            simulate_all(&prepared, &config)
        })
        .collect()
}

fn dominance(sweep: &[Vec<SimReport>]) -> Outcome {
    let mut losses = Vec::new();
    for (seed, reports) in sweep.iter().enumerate() {
        let saturn = &reports[0];
        let delta = saturn.resolution.unwrap();
        let best = reports[1..].iter().map(|r| r.makespan).fold(f64::INFINITY, f64::min);
        if saturn.makespan > best + delta {
            losses.push(seed);
        }
    }
    outcome(
        losses.is_empty(),
        format!(
            "Saturn within one interval of the best baseline on {}/{} seeds {losses:?}",
            sweep.len() - losses.len(),
            sweep.len()
        ),
    )
}

fn preset(nodes: usize) -> ExperimentConfig {
    let planners = vec![
        PlannerKind::Saturn,
        PlannerKind::CurrentPractice,
        PlannerKind::Random(7),
        PlannerKind::Optimus,
        PlannerKind::OptimusDynamic,
    ];
    let source = WorkloadSource::Preset {
        name: "wikitext_mirror".into(),
        nodes,
        seed: 7,
    };
    ExperimentConfig::new(source, planners)
}

fn ordering(reports: &[SimReport]) -> Outcome {
    let m = |k: PlannerKind| reports.iter().find(|r| r.planner == k).unwrap().makespan;
    let (s, od, cp, r) = (
        m(PlannerKind::Saturn),
        m(PlannerKind::OptimusDynamic),
        m(PlannerKind::CurrentPractice),
        m(PlannerKind::Random(7)),
    );
    outcome(
        s < od && od < cp && cp < r,
        format!("Saturn {s:.0} < Optimus-Dynamic {od:.0} < Current Practice {cp:.0} < Random {r:.0}"),
    )
}

fn scaling(one: &[SimReport], two: &[SimReport]) -> Outcome {
    let ratio = two[0].makespan / one[0].makespan;
    outcome(
        (0.45..=0.65).contains(&ratio),
        format!("2-node / 1-node Saturn makespan = {ratio:.3}"),
    )
}

fn conservation<'a>(runs: impl Iterator<Item = (&'a Prepared, &'a SimReport)>) -> Outcome {
    let mut checked = 0;
    let mut failures = Vec::new();
    for (prepared, report) in runs {
        checked += 1;
        if let Err(e) = report.verify(&prepared.workload, &prepared.grid) {
            failures.push(format!("{}: {e}", report.planner.label()));
        }
    }
    outcome(
        failures.is_empty(),
        format!("{checked} reports checked, {} failed {failures:?}", failures.len()),
    )
}

fn no_regression() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for seed in 0..RANDOM_WORKLOADS {
        let prepared = Prepared::synthetic(random_workload(seed, &RandomShape::default())).unwrap();
        let mut config = ExperimentConfig::new(WorkloadSource::File("random".into()), vec![PlannerKind::Saturn]);
        config.checkpoint_cost = 0.0;
        let (plan, report) = run_one(&prepared, &config, PlannerKind::Saturn).unwrap();
        let excess = report.makespan - plan.predicted_makespan;
        worst = worst.max(excess);
        if excess > report.resolution.unwrap() {
            failures.push(seed);
        }
    }
    outcome(
        failures.is_empty(),
        format!("max makespan - predicted = {worst:.3}s, over one interval on {failures:?}"),
    )
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() == "comparison.csv" || p.extension().is_some_and(|x| x == "json"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism(first_dir: &Path) -> Outcome {
    let again = tempfile::tempdir().unwrap();
    run_experiment(&preset(1)).unwrap().write(again.path()).unwrap();
    let (a, b) = (read_outputs(first_dir), read_outputs(again.path()));
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    outcome(
        a.len() == b.len() && a.len() > 1 && differing.is_empty(),
        format!("{} files compared, differing {differing:?}", a.len()),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u8, Outcome)> = Vec::new();
    let instances: Vec<MilpInstance> = (0..TINY_INSTANCES).map(tiny_instance).collect();
    results.push((1, timed(Duration::from_secs(60), || milp_optimality(&instances))));
    results.push((2, timed(Duration::from_secs(10), || lp_soundness(&instances))));

    let mut sweep = Vec::new();
    results.push((
        3,
        timed(Duration::from_secs(300), || {
            sweep = random_sweep();
            dominance(&sweep)
        }),
    ));

    let first = tempfile::tempdir().unwrap();
    let mut one_exp = None;
    results.push((
        4,
        timed(Duration::from_secs(120), || {
            let exp = run_experiment(&preset(1)).unwrap();
            exp.write(first.path()).unwrap();
            let o = ordering(&reports(&exp));
            one_exp = Some(exp);
            o
        }),
    ));
    let one_exp = one_exp.unwrap();
    let one = reports(&one_exp);

    let mut two_exp = None;
    results.push((
        5,
        timed(Duration::from_secs(120), || {
            let exp = run_experiment(&preset(2)).unwrap();
            let o = scaling(&one, &reports(&exp));
            two_exp = Some(exp);
            o
        }),
    ));
    let two_exp = two_exp.unwrap();
    let two = reports(&two_exp);

    let sweep_prepared: Vec<Prepared> = (0..RANDOM_WORKLOADS)
        .map(|seed| Prepared::synthetic(random_workload(seed, &RandomShape::default())).unwrap())
        .collect();
    let runs = sweep_prepared
        .iter()
        .zip(&sweep)
        .flat_map(|(p, reports)| reports.iter().map(move |r| (p, r)))
        .chain(one.iter().map(|r| (&one_exp.prepared, r)))
        .chain(two.iter().map(|r| (&two_exp.prepared, r)));
    results.push((6, conservation(runs)));

    results.push((7, timed(Duration::from_secs(300), no_regression)));
    results.push((8, timed(Duration::from_secs(120), || determinism(first.path()))));

    let mut failed = 0;
    for (n, o) in &results {
        println!("criterion {n}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

/// Reports in planner order.
fn reports(exp: &Experiment) -> Vec<SimReport> {
    exp.runs
        .iter()
        .map(|r| r.outcome.as_ref().expect("every planner succeeds").1.clone())
        .collect()
}
