use alloc::vec;
use alloc::vec::Vec;

use super::{PlanningError, Schedule};
use crate::plan::Plan;
use crate::problem::{JobWork, Problem};
use crate::profile::LatencyGrid;
use crate::workload::Config;
use crate::TIME_EPS;

/// Seconds saved by running `job` on `gpus + 1` instead of `gpus` GPUs, each
/// under its fastest technique. Zero when `gpus + 1` is infeasible or slower.
pub fn optimus_marginal_gain(grid: &LatencyGrid, job: usize, gpus: u32, remaining_batches: u64) -> f64 {
    let Some((_, now)) = grid.best_at(job, gpus, |_| true) else {
        return 0.0;
    };
    let Some((_, next)) = grid.best_at(job, gpus + 1, |_| true) else {
        return 0.0;
    };
    (remaining_batches as f64 * (now - next)).max(0.0)
}

fn min_gpus(problem: &Problem<'_>, w: &JobWork) -> Option<u32> {
    let nodes = problem.node_count();
    problem
        .grid
        .configs(w.job)
        .iter()
        .filter(|&&c| (0..nodes).any(|n| problem.hosts(w, c, n)))
        .map(|c| c.gpus)
        .min()
}

/// First-fit by descending GPU count over the free GPUs of each node. Each
/// job runs its fastest technique that the chosen node can host.
fn place_wave(problem: &Problem<'_>, wave: &[usize], gpus: &[u32], free: &[u32]) -> Option<Vec<(usize, Config)>> {
    let mut free = free.to_vec();
    let mut order: Vec<usize> = (0..wave.len()).collect();
    order.sort_by(|&a, &b| gpus[b].cmp(&gpus[a]).then(a.cmp(&b)));
    let mut out = vec![(0, Config { technique: 0, gpus: 0 }); wave.len()];
    for k in order {
        let w = &problem.jobs[wave[k]];
        let (n, cfg) = (0..free.len()).find_map(|n| {
            if free[n] < gpus[k] {
                return None;
            }
            problem
                .grid
                .best_at(w.job, gpus[k], |c| problem.hosts(w, c, n))
                .map(|(c, _)| (n, c))
        })?;
        free[n] -= gpus[k];
        out[k] = (n, cfg);
    }
    Some(out)
}

/// FIFO waves over the free cluster. A wave takes queued jobs in order while
/// their minimum GPU counts fit; each wave job starts at its minimum and the
/// leftover GPUs go one at a time to the job with the largest marginal gain.
/// A new wave forms whenever a job completes. Running jobs queue first.
pub fn plan_optimus(problem: &Problem<'_>) -> Result<Plan, PlanningError> {
    let caps = problem.workload.cluster().capacities();
    let mut queue: Vec<usize> = (0..problem.jobs.len()).collect();
    queue.sort_by_key(|&i| problem.jobs[i].current.is_none());
    let mut need = Vec::with_capacity(problem.jobs.len());
    for w in &problem.jobs {
        need.push(min_gpus(problem, w).ok_or_else(|| PlanningError::NoFeasibleConfig(problem.job_id(w).into()))?);
    }

    let mut schedule = Schedule::new(problem);
    let mut free = caps.clone();
    // (end, node, gpus) of placed jobs still holding GPUs.
    let mut running: Vec<(f64, usize, u32)> = Vec::new();
    let mut now = problem.now;
    while !queue.is_empty() {
        let total_free: u32 = free.iter().sum();
        let mut wave = Vec::new();
        let mut used = 0;
        for &i in &queue {
            if used + need[i] > total_free {
                break;
            }
            used += need[i];
            wave.push(i);
        }
        let mut gpus: Vec<u32> = wave.iter().map(|&i| need[i]).collect();
        while !wave.is_empty() && place_wave(problem, &wave, &gpus, &free).is_none() {
            wave.pop();
            gpus.pop();
        }

        if !wave.is_empty() {
            loop {
                let spare = free.iter().sum::<u32>() - gpus.iter().sum::<u32>();
                if spare == 0 {
                    break;
                }
                let mut pick: Option<(usize, f64)> = None;
                for (k, &i) in wave.iter().enumerate() {
                    let w = &problem.jobs[i];
                    let gain = optimus_marginal_gain(problem.grid, w.job, gpus[k], problem.remaining_batches(w));
                    if gain <= 0.0 || pick.is_some_and(|(_, g)| gain <= g) {
                        continue;
                    }
                    gpus[k] += 1;
                    if place_wave(problem, &wave, &gpus, &free).is_some() {
                        pick = Some((k, gain));
                    }
                    gpus[k] -= 1;
                }
                match pick {
                    Some((k, _)) => gpus[k] += 1,
                    None => break,
                }
            }
            let placed = place_wave(problem, &wave, &gpus, &free).expect("wave placement was checked");
            for (k, &i) in wave.iter().enumerate() {
                let w = &problem.jobs[i];
                let (n, cfg) = placed[k];
                let t = problem
                    .runtime(w, cfg, n, now <= problem.now)
                    .ok_or_else(|| PlanningError::NoFeasibleConfig(problem.job_id(w).into()))?;
                schedule.place(w, cfg, n, now, t);
                free[n] -= cfg.gpus;
                running.push((now + t, n, cfg.gpus));
            }
            queue.retain(|i| !wave.contains(i));
            if queue.is_empty() {
                break;
            }
        }

        let Some(next) = running.iter().map(|r| r.0).min_by(f64::total_cmp) else {
            // Nothing holds GPUs yet the head of the queue does not fit.
            let w = &problem.jobs[queue[0]];
            return Err(PlanningError::NoFeasibleConfig(problem.job_id(w).into()));
        };
        now = next;
        running.retain(|&(end, n, g)| {
            if end <= next + TIME_EPS {
                free[n] += g;
                false
            } else {
                true
            }
        });
    }
    Ok(schedule.finish())
}
