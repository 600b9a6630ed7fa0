//! LP-based branch-and-bound.
//!
//! Nodes dive depth-first along the up-branch; when a dive ends the open node
//! with the smallest bound is resumed. Objective values live on the interval
//! grid, so a node is pruned as soon as its bound cannot beat the incumbent by
//! a whole interval, and variables ending at or after the incumbent are
//! excluded from every relaxation.

use alloc::vec;
use alloc::vec::Vec;

use super::simplex::{Outcome, StandardForm, Warm};
use super::{Fixings, MilpError, MilpInstance, MilpSolution, SolveStatus};
use crate::workload::Config;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchOptions {
    pub abs_gap: f64,
    pub rel_gap: f64,
    /// Relaxations to solve before giving up optimality.
    pub node_limit: Option<usize>,
}

impl Default for BranchOptions {
    fn default() -> Self {
        BranchOptions {
            abs_gap: 1e-6,
            rel_gap: 1e-6,
            node_limit: Some(50_000),
        }
    }
}

struct Node {
    fix: Vec<(usize, bool)>,
    /// Parent relaxation value, intervals.
    bound: f64,
    /// Parent optimal basis, the warm start for this node. Only the dive
    /// child keeps the inverse.
    warm: Option<Warm>,
}

struct Incumbent {
    assignment: Vec<usize>,
    end: u32,
}

fn consider(best: &mut Option<Incumbent>, inst: &MilpInstance, assignment: Option<Vec<usize>>) {
    let Some(assignment) = assignment else { return };
    let end = assignment.iter().map(|&v| inst.vars[v].end()).max().unwrap_or(0);
    if best.as_ref().is_none_or(|b| end < b.end) {
        *best = Some(Incumbent { assignment, end });
    }
}

/// Places jobs in `order` at the earliest grid slot on any node, each under
/// its preferred config. `None` if some job does not fit in the horizon.
fn list_schedule(inst: &MilpInstance, prefer: &[Config], order: &[usize]) -> Option<Vec<usize>> {
    let h = inst.horizon as usize;
    let mut usage = vec![0u32; inst.capacities.len() * h];
    let mut out = vec![usize::MAX; inst.jobs.len()];
    for &j in order {
        let mut pick: Option<usize> = None;
        for v in inst.job_vars[j].clone() {
            let var = &inst.vars[v];
            if var.config != prefer[j] {
                continue;
            }
            if let Some(p) = pick {
                let cur = &inst.vars[p];
                if (var.start, var.node) >= (cur.start, cur.node) {
                    continue;
                }
            }
            let cap = inst.capacities[var.node];
            let fits = (var.start..var.end()).all(|t| usage[var.node * h + t as usize] + var.config.gpus <= cap);
            if fits {
                pick = Some(v);
            }
        }
        let v = pick?;
        let var = &inst.vars[v];
        for t in var.start..var.end() {
            usage[var.node * h + t as usize] += var.config.gpus;
        }
        out[j] = v;
    }
    Some(out)
}

/// Rounds a fractional point: each job keeps the config of its largest
/// variable, and jobs are list-scheduled by fractional start time.
fn round(inst: &MilpInstance, x: &[f64]) -> Option<Vec<usize>> {
    let mut prefer = Vec::with_capacity(inst.jobs.len());
    let mut keys = Vec::with_capacity(inst.jobs.len());
    for range in &inst.job_vars {
        let mut best = range.start;
        let mut start = 0.0;
        for v in range.clone() {
            if x[v] > x[best] {
                best = v;
            }
            start += x[v] * inst.vars[v].start as f64;
        }
        prefer.push(inst.vars[best].config);
        keys.push(start);
    }
    let mut order: Vec<usize> = (0..inst.jobs.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    list_schedule(inst, &prefer, &order)
}

/// Longest-first list schedules under two per-job config choices: shortest
/// duration, and smallest GPU-interval area.
fn initial_incumbent(inst: &MilpInstance) -> Option<Incumbent> {
    let mut best = None;
    type Key = fn(u32, u32) -> (u64, u64);
    let rules: [Key; 2] = [|g, d| (d as u64, g as u64), |g, d| (g as u64 * d as u64, d as u64)];
    for rule in rules {
        let mut prefer = Vec::new();
        let mut length = Vec::new();
        for range in &inst.job_vars {
            let v = range
                .clone()
                .min_by_key(|&v| rule(inst.vars[v].config.gpus, inst.vars[v].duration))
                .unwrap_or(range.start);
            prefer.push(inst.vars[v].config);
            length.push(inst.vars[v].duration);
        }
        let mut order: Vec<usize> = (0..inst.jobs.len()).collect();
        order.sort_by(|&a, &b| length[b].cmp(&length[a]).then(a.cmp(&b)));
        consider(&mut best, inst, list_schedule(inst, &prefer, &order));
    }
    best
}

/// Solves the instance to optimality unless the node limit is reached, in
/// which case the incumbent comes back with its remaining gap.
pub fn branch_and_bound(inst: &MilpInstance, opts: &BranchOptions) -> Result<MilpSolution, MilpError> {
    let nx = inst.vars.len();
    if inst.jobs.is_empty() {
        return Ok(MilpSolution {
            assignment: Vec::new(),
            objective: 0.0,
            status: SolveStatus::Optimal,
            node_count: 0,
        });
    }
    let lp = StandardForm::from_instance(inst);
    let mut incumbent = initial_incumbent(inst);
    let mut open: Vec<Node> = Vec::new();
    let mut dive = Some(Node {
        fix: Vec::new(),
        bound: 0.0,
        warm: None,
    });
    let mut nodes = 0usize;
    let mut hit_limit = false;

    // Largest end (in intervals) a strictly better solution may use.
    let cutoff = |inc: &Option<Incumbent>| -> f64 {
        match inc {
            None => f64::INFINITY,
            Some(b) => {
                let gap = opts.abs_gap.max(opts.rel_gap * b.end as f64 * inst.delta) / inst.delta;
                (b.end as f64 - 1.0).min(b.end as f64 - gap)
            }
        }
    };

    loop {
        let node = match dive.take() {
            Some(n) => n,
            None => {
                let Some(i) = (0..open.len()).min_by(|&a, &b| open[a].bound.total_cmp(&open[b].bound)) else {
                    break;
                };
                open.swap_remove(i)
            }
        };
        if node.bound > cutoff(&incumbent) + 1e-6 {
            continue;
        }
        if opts.node_limit.is_some_and(|l| nodes >= l) {
            open.push(node);
            hit_limit = true;
            break;
        }
        nodes += 1;

        let mut fixings = Fixings::new();
        for &(v, val) in &node.fix {
            fixings.fix(v, val);
        }
        let Some(mut allowed) = fixings.allowed(inst) else {
            continue;
        };
        let limit = cutoff(&incumbent);
        if limit.is_finite() {
            for (v, var) in inst.vars.iter().enumerate() {
                if var.end() as f64 > limit + 1e-9 {
                    allowed[v] = false;
                }
            }
            if inst.job_vars.iter().any(|r| !r.clone().any(|v| allowed[v])) {
                continue;
            }
        }
        let solved = match node.warm {
            Some(w) => lp.solve_from(&allowed, w)?,
            None => lp.solve(&allowed)?,
        };
        let (value, x, warm) = match solved {
            Outcome::Infeasible => continue,
            Outcome::Optimal { value, x, warm } => (value, x, warm),
        };
        if value > limit + 1e-6 {
            continue;
        }

        let mut branch = None;
        let mut frac = 1e-6;
        for (v, &xv) in x[..nx].iter().enumerate() {
            let f = xv.min(1.0 - xv);
            if f > frac {
                frac = f;
                branch = Some(v);
            }
        }
        match branch {
            None => {
                let assignment = inst
                    .job_vars
                    .iter()
                    .map(|r| {
                        r.clone()
                            .max_by(|&a, &b| x[a].total_cmp(&x[b]).then(b.cmp(&a)))
                            .unwrap()
                    })
                    .collect();
                consider(&mut incumbent, inst, Some(assignment));
            }
            Some(v) => {
                consider(&mut incumbent, inst, round(inst, &x));
                let mut up = node.fix.clone();
                up.push((v, true));
                let mut down = node.fix;
                down.push((v, false));
                open.push(Node {
                    fix: down,
                    bound: value,
                    warm: warm.as_ref().map(Warm::without_inverse),
                });
                dive = Some(Node {
                    fix: up,
                    bound: value,
                    warm,
                });
            }
        }
    }

    let Some(best) = incumbent else {
        return Ok(MilpSolution {
            assignment: Vec::new(),
            objective: f64::INFINITY,
            status: SolveStatus::Infeasible,
            node_count: nodes,
        });
    };
    let objective = best.end as f64 * inst.delta;
    let status = if hit_limit {
        let floor = open
            .iter()
            .chain(dive.iter())
            .map(|n| n.bound)
            .fold(f64::INFINITY, f64::min);
        let bound = libm::ceil(floor - 1e-6).max(0.0) * inst.delta;
        let gap = (objective - bound).max(0.0);
        if gap <= 1e-9 {
            SolveStatus::Optimal
        } else {
            SolveStatus::Feasible { gap }
        }
    } else {
        SolveStatus::Optimal
    };
    Ok(MilpSolution {
        assignment: best.assignment,
        objective,
        status,
        node_count: nodes,
    })
}
