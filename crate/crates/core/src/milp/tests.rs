use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::test_support::*;
use crate::workload::ClusterSpec;

fn assignment_key(inst: &MilpInstance, sol: &MilpSolution) -> Vec<(String, Config, usize, u32)> {
    sol.assignment
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let var = inst.vars[v];
            (inst.job_ids[j].clone(), var.config, var.node, var.start)
        })
        .collect()
}

#[test]
fn single_choice_instance() {
    let (w, grid) = fixture(
        vec![job("a", 10, 1.0)],
        vec![technique("t", 0.0, 0.0)],
        ClusterSpec::uniform(1, 1, 40.0),
    );
    let p = Problem::initial(&w, &grid);
    let inst = build_milp(&p, 10.0, DEFAULT_MAX_INTERVALS).unwrap();
    assert_eq!(inst.horizon, 1);
    assert_eq!(inst.vars.len(), 1);
    let sol = branch_and_bound(&inst, &BranchOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_eq!(sol.objective, 10.0);
    assert_eq!(sol.node_count, 1);
    let plan = decode_plan(&inst, &sol).unwrap();
    assert_eq!(plan.entries["a"].start_time, 0.0);
    assert_eq!(plan.predicted_makespan, 10.0);
}

#[test]
fn rows_follow_the_formulation() {
    let (w, grid) = two_job_fixture();
    let p = Problem::initial(&w, &grid);
    let inst = build_milp(&p, 1.0, 100).unwrap();
    assert_eq!(inst.horizon, 12);
    let assigns = inst
        .rows
        .iter()
        .filter(|r| matches!(r.kind, RowKind::Assign { .. }))
        .count();
    let caps = inst
        .rows
        .iter()
        .filter(|r| matches!(r.kind, RowKind::Capacity { .. }))
        .count();
    let spans = inst
        .rows
        .iter()
        .filter(|r| matches!(r.kind, RowKind::Makespan { .. }))
        .count();
    assert_eq!((assigns, caps, spans), (2, 12, 2));
    for v in &inst.vars {
        assert!(v.end() <= inst.horizon);
    }
    // g=1 lasts 10 intervals (starts 0..=2), g=2 lasts 6 (starts 0..=6), per job
    assert_eq!(inst.vars.len(), 2 * (3 + 7));
    assert!(matches!(
        build_milp(&p, 1.0, 11),
        Err(MilpError::HorizonOverflow { needed: 12, limit: 11 })
    ));
    assert!(matches!(build_milp(&p, 0.0, 11), Err(MilpError::InvalidDelta)));
}

#[test]
fn two_jobs_share_the_node() {
    let (w, grid) = two_job_fixture();
    let p = Problem::initial(&w, &grid);
    let inst = build_milp(&p, 1.0, 100).unwrap();

    let oracle = brute_force_schedule(&inst).unwrap();
    assert_eq!(oracle.objective, 10.0);
    let sol = branch_and_bound(&inst, &BranchOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_eq!(sol.objective, 10.0);

    let plan = decode_plan(&inst, &sol).unwrap();
    for id in ["a", "b"] {
        let e = plan.entries[id];
        assert_eq!((e.start_time, e.node, e.config.gpus), (0.0, 0, 1));
    }
    plan.check(&w).unwrap();

    let relax = solve_lp_relaxation(&inst, &Fixings::new()).unwrap();
    assert!(relax.value <= 10.0 + 1e-9);

    let fixed = encode_plan(&inst, &plan).unwrap();
    let value = solve_lp_relaxation(&inst, &fixed).unwrap().value;
    assert!((value - plan.predicted_makespan).abs() < 1e-9);
}

#[test]
fn overlapping_full_node_fixings_are_infeasible() {
    let (w, grid) = two_job_fixture();
    let p = Problem::initial(&w, &grid);
    let inst = build_milp(&p, 1.0, 100).unwrap();
    let mut fixings = Fixings::new();
    for range in &inst.job_vars {
        let v = range
            .clone()
            .find(|&v| inst.vars[v].config.gpus == 2 && inst.vars[v].start == 0)
            .unwrap();
        fixings.fix(v, true);
    }
    assert_eq!(solve_lp_relaxation(&inst, &fixings), Err(MilpError::LpInfeasible));
    let oracle = brute_force_with_fixings(&inst, &fixings).unwrap();
    assert_eq!(oracle.status, SolveStatus::Infeasible);
}

#[test]
fn brute_force_single_job_takes_fastest_config() {
    let (w, grid) = fixture(
        vec![job("a", 12, 1.0)],
        vec![technique("slow", 0.5, 0.0), technique("fast", 0.1, 0.0)],
        ClusterSpec::uniform(1, 2, 40.0),
    );
    let p = Problem::initial(&w, &grid);
    let inst = build_milp(&p, 1.0, 100).unwrap();
    let sol = brute_force_schedule(&inst).unwrap();
    let var = inst.vars[sol.assignment[0]];
    assert_eq!((var.config, var.start), (Config { technique: 1, gpus: 2 }, 0));
    // 12 * (0.9 / 2 + 0.1) = 6.6 -> 7 intervals
    assert_eq!(sol.objective, 7.0);
}

#[test]
fn brute_force_refuses_large_instances() {
    let jobs = (0..5).map(|i| job(&alloc::format!("j{i}"), 2, 1.0)).collect();
    let (w, grid) = fixture(jobs, vec![technique("t", 0.0, 0.0)], ClusterSpec::uniform(1, 1, 40.0));
    let p = Problem::initial(&w, &grid);
    let inst = build_milp(&p, 1.0, 100).unwrap();
    assert_eq!(brute_force_schedule(&inst), Err(MilpError::TooLarge));
}

#[test]
fn three_jobs_two_techniques_match_oracle() {
    let (w, grid) = fixture(
        vec![job("a", 3, 1.0), job("b", 2, 1.5), job("c", 2, 1.0)],
        vec![technique("x", 0.1, 0.02), technique("y", 0.3, 0.0)],
        ClusterSpec::uniform(1, 4, 40.0),
    );
    let p = Problem::initial(&w, &grid);
    let inst = build_milp(&p, 1.0, 8).unwrap();
    assert!(inst.horizon <= 8);
    let oracle = brute_force_schedule(&inst).unwrap();
    let sol = branch_and_bound(&inst, &BranchOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective - oracle.objective).abs() < 1e-6);
    assert!(inst.is_feasible(&sol.assignment));
}

#[test]
fn node_limit_returns_rounded_incumbent() {
    // Find a tiny instance whose root relaxation is fractional.
    let mut found = false;
    for seed in 0..200 {
        let (w, grid) = tiny_fixture(seed);
        let p = Problem::initial(&w, &grid);
        let inst = build_milp(&p, 1.0, 8).unwrap();
        let root = solve_lp_relaxation(&inst, &Fixings::new()).unwrap();
        let fractional = root.x.iter().any(|&x| x > 1e-6 && x < 1.0 - 1e-6);
        let oracle = brute_force_schedule(&inst).unwrap();
        if !fractional || root.value > oracle.objective - 1.0 + 1e-9 {
            continue;
        }
        let opts = BranchOptions {
            node_limit: Some(1),
            ..BranchOptions::default()
        };
        let sol = branch_and_bound(&inst, &opts).unwrap();
        assert_eq!(sol.node_count, 1);
        assert!(inst.is_feasible(&sol.assignment));
        match sol.status {
            SolveStatus::Feasible { gap } => assert!(gap > 0.0),
            SolveStatus::Optimal => assert!((sol.objective - oracle.objective).abs() < 1e-6),
            SolveStatus::Infeasible => panic!("incumbent expected"),
        }
        found = true;
        break;
    }
    assert!(found);
}

#[test]
fn seeded_sweep_matches_oracle() {
    let mut strict = 0;
    for seed in 0..50 {
        let (w, grid) = tiny_fixture(1000 + seed);
        let p = Problem::initial(&w, &grid);
        let inst = build_milp(&p, 1.0, 8).unwrap();
        let oracle = brute_force_schedule(&inst).unwrap();
        let sol = branch_and_bound(&inst, &BranchOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "seed {seed}");
        assert!((sol.objective - oracle.objective).abs() < 1e-6, "seed {seed}");
        assert_eq!(inst.objective_of(&sol.assignment), sol.objective);
        let root = solve_lp_relaxation(&inst, &Fixings::new()).unwrap();
        assert!(root.value <= oracle.objective + 1e-9, "seed {seed}");
        if root.value < oracle.objective - 1e-6 {
            strict += 1;
        }
        let plan = decode_plan(&inst, &sol).unwrap();
        plan.check(&w).unwrap();
    }
    assert!(strict > 0);
}

#[test]
fn brute_force_breaks_ties_lexicographically() {
    let (w, grid) = two_job_fixture();
    let p = Problem::initial(&w, &grid);
    let inst = build_milp(&p, 1.0, 100).unwrap();
    let sol = brute_force_schedule(&inst).unwrap();
    let key = assignment_key(&inst, &sol);
    assert_eq!(key[0], ("a".to_string(), Config { technique: 0, gpus: 1 }, 0, 0));
    assert_eq!(key[1], ("b".to_string(), Config { technique: 0, gpus: 1 }, 0, 0));
}

#[test]
fn dominated_configs_are_dropped() {
    // kappa large enough that 4 GPUs are slower than 3: g=4 is dominated.
    let (w, grid) = fixture(
        vec![job("a", 10, 1.0)],
        vec![technique("t", 0.0, 0.2)],
        ClusterSpec::uniform(1, 4, 40.0),
    );
    let p = Problem::initial(&w, &grid);
    let inst = build_milp(&p, 0.5, 100).unwrap();
    assert!(inst.vars.iter().all(|v| v.config.gpus < 4));
}

#[test]
fn choose_delta_respects_interval_cap() {
    let (w, grid) = tiny_fixture(5);
    let p = Problem::initial(&w, &grid);
    for cap in [4u32, 8, 48] {
        if let Ok(delta) = choose_delta(&p, cap, None) {
            let inst = build_milp(&p, delta, cap).unwrap();
            assert!(inst.horizon <= cap);
        }
    }
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn relaxation_bounds_every_fixing(seed in 0u64..10_000, pick in 0usize..1000) {
            let (w, grid) = tiny_fixture(seed);
            let p = Problem::initial(&w, &grid);
            let inst = build_milp(&p, 1.0, 8).unwrap();
            let mut fixings = Fixings::new();
            fixings.fix(pick % inst.vars.len(), pick % 2 == 0);
            let oracle = brute_force_with_fixings(&inst, &fixings).unwrap();
            match solve_lp_relaxation(&inst, &fixings) {
                Ok(r) => prop_assert!(r.value <= oracle.objective + 1e-9),
                Err(MilpError::LpInfeasible) => prop_assert_eq!(oracle.status, SolveStatus::Infeasible),
                Err(e) => return Err(TestCaseError::fail(alloc::format!("{e}"))),
            }
        }

        #[test]
        fn halving_delta_never_costs_more_than_one_interval(seed in 0u64..10_000) {
            let (w, grid) = tiny_fixture(seed);
            let p = Problem::initial(&w, &grid);
            let coarse = build_milp(&p, 1.0, 8).unwrap();
            let fine = build_milp(&p, 0.5, 16).unwrap();
            let a = branch_and_bound(&coarse, &BranchOptions::default()).unwrap();
            let b = branch_and_bound(&fine, &BranchOptions::default()).unwrap();
            prop_assert!(b.objective <= a.objective + 1.0 + 1e-9);
            let plan = decode_plan(&fine, &b).unwrap();
            prop_assert!(plan.check(&w).is_ok());
        }
    }
}

#[test]
fn dump_round_trips() {
    for seed in [1u64, 5, 9] {
        let (w, grid) = tiny_fixture(seed);
        let p = Problem::initial(&w, &grid);
        let inst = build_milp(&p, 1.0, 8).unwrap();
        let text = inst.dump();
        assert!(text.lines().any(|l| l == "min M"));
        assert_eq!(super::dump::parse_dump(&text).unwrap(), inst);
    }
    let (w, grid) = two_job_fixture();
    let p = Problem::initial(&w, &grid);
    let inst = build_milp(&p, 0.75, 48).unwrap();
    assert_eq!(super::dump::parse_dump(&inst.dump()).unwrap(), inst);
}
