use alloc::vec::Vec;

use super::{place_earliest, PlannerOptions, PlanningError, Schedule};
use crate::milp::{branch_and_bound, build_milp, choose_delta, decode_plan, SolveStatus};
use crate::plan::Plan;
use crate::problem::Problem;

/// A joint plan with the solver's grid and status.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturnOutcome {
    pub plan: Plan,
    /// Interval length of the grid, seconds.
    pub delta: f64,
    pub status: SolveStatus,
    /// Relaxations solved during branch-and-bound.
    pub nodes: usize,
}

/// Chooses the interval length, builds the time-indexed program and solves
/// it by branch-and-bound. Running jobs in `problem` are priced so that
/// keeping them in place is free and every change pays the checkpoint.
pub fn plan_saturn(problem: &Problem<'_>, opts: &PlannerOptions) -> Result<SaturnOutcome, PlanningError> {
    let delta = choose_delta(problem, opts.max_intervals, opts.min_delta)?;
    let inst = build_milp(problem, delta, opts.max_intervals)?;
    let solution = branch_and_bound(&inst, &opts.branch)?;
    if let SolveStatus::Feasible { gap } = solution.status {
        log::debug!(
            "time-indexed solve stopped after {} nodes, gap {gap:.3} s",
            solution.node_count
        );
    }
    let grid_plan = decode_plan(&inst, &solution)?;
    Ok(SaturnOutcome {
        plan: compact(problem, &grid_plan)?,
        delta,
        status: solution.status,
        nodes: solution.node_count,
    })
}

/// Replays a grid plan in order of grid start, each job at its earliest fit
/// on its planned node with its exact runtime. No job ends later than on the
/// grid, so the predicted makespan can only tighten.
fn compact(problem: &Problem<'_>, grid_plan: &Plan) -> Result<Plan, PlanningError> {
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(problem.jobs.len());
    for (i, w) in problem.jobs.iter().enumerate() {
        let e = grid_plan
            .entries
            .get(problem.job_id(w))
            .ok_or_else(|| PlanningError::NoFeasibleConfig(problem.job_id(w).into()))?;
        order.push((e.start_time, i));
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut schedule = Schedule::new(problem);
    for (_, i) in order {
        let w = &problem.jobs[i];
        let e = grid_plan.entries[problem.job_id(w)];
        let (n, start, t) = place_earliest(
            problem,
            &schedule.occupancy,
            w,
            e.config,
            problem.now,
            e.node..e.node + 1,
        )
        .ok_or_else(|| PlanningError::NoFeasibleConfig(problem.job_id(w).into()))?;
        schedule.place(w, e.config, n, start, t);
    }
    let mut plan = schedule.finish();
    plan.resolution = grid_plan.resolution;
    Ok(plan)
}
