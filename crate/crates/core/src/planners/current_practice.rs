use alloc::vec;

use super::{PlanningError, Schedule};
use crate::plan::Plan;
use crate::problem::Problem;
use crate::workload::Config;

/// Jobs in id order, each alone on the node that frees up first, using every
/// GPU of the node under its fastest technique. A job that cannot use the
/// whole node falls back to its largest feasible GPU count there.
pub fn plan_current_practice(problem: &Problem<'_>) -> Result<Plan, PlanningError> {
    let nodes = &problem.workload.cluster().nodes;
    let mut free_at = vec![problem.now; nodes.len()];
    let mut schedule = Schedule::new(problem);
    for w in &problem.jobs {
        let mut pick: Option<(usize, Config)> = None;
        for (n, node) in nodes.iter().enumerate() {
            if pick.is_some_and(|(p, _)| free_at[n] >= free_at[p]) {
                continue;
            }
            let cfg = (1..=node.gpu_count)
                .rev()
                .find_map(|g| problem.grid.best_at(w.job, g, |c| problem.hosts(w, c, n)));
            if let Some((cfg, _)) = cfg {
                pick = Some((n, cfg));
            }
        }
        let (n, cfg) = pick.ok_or_else(|| PlanningError::NoFeasibleConfig(problem.job_id(w).into()))?;
        let start = free_at[n];
        let t = problem
            .runtime(w, cfg, n, start <= problem.now)
            .ok_or_else(|| PlanningError::NoFeasibleConfig(problem.job_id(w).into()))?;
        schedule.place(w, cfg, n, start, t);
        free_at[n] = start + t;
    }
    Ok(schedule.finish())
}
