use alloc::vec::Vec;

use super::{place_earliest, PlanningError, Schedule};
use crate::plan::Plan;
use crate::problem::Problem;
use crate::rng::SplitMix64;
use crate::workload::Config;

/// A uniformly random feasible config per job (drawn in id order), then a
/// random submission order, list-scheduled at the earliest fit.
pub fn plan_random(problem: &Problem<'_>, seed: u64) -> Result<Plan, PlanningError> {
    let mut rng = SplitMix64::new(seed);
    let nodes = problem.node_count();
    let mut chosen: Vec<Config> = Vec::with_capacity(problem.jobs.len());
    for w in &problem.jobs {
        let options: Vec<Config> = problem
            .grid
            .configs(w.job)
            .iter()
            .copied()
            .filter(|&c| (0..nodes).any(|n| problem.hosts(w, c, n)))
            .collect();
        if options.is_empty() {
            return Err(PlanningError::NoFeasibleConfig(problem.job_id(w).into()));
        }
        chosen.push(options[rng.below(options.len() as u64) as usize]);
    }
    let mut order: Vec<usize> = (0..problem.jobs.len()).collect();
    rng.shuffle(&mut order);

    let mut schedule = Schedule::new(problem);
    for i in order {
        let w = &problem.jobs[i];
        let (n, start, t) = place_earliest(problem, &schedule.occupancy, w, chosen[i], problem.now, 0..nodes)
            .ok_or_else(|| PlanningError::NoFeasibleConfig(problem.job_id(w).into()))?;
        schedule.place(w, chosen[i], n, start, t);
    }
    Ok(schedule.finish())
}
