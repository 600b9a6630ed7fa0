//! Exhaustive search over per-job `(config, node, start)` choices. A testing
//! oracle for small instances, independent of the relaxation machinery.

use alloc::vec;
use alloc::vec::Vec;

use super::{Fixings, MilpError, MilpInstance, MilpSolution, SolveStatus};

pub const BRUTE_FORCE_MAX_JOBS: usize = 4;
pub const BRUTE_FORCE_MAX_VARS: usize = 5000;

pub fn brute_force_schedule(inst: &MilpInstance) -> Result<MilpSolution, MilpError> {
    brute_force_with_fixings(inst, &Fixings::new())
}

/// Exact optimum; among equal objectives the lexicographically first
/// assignment wins.
pub fn brute_force_with_fixings(inst: &MilpInstance, fixings: &Fixings) -> Result<MilpSolution, MilpError> {
    if inst.jobs.len() > BRUTE_FORCE_MAX_JOBS || inst.vars.len() > BRUTE_FORCE_MAX_VARS {
        return Err(MilpError::TooLarge);
    }
    let infeasible = MilpSolution {
        assignment: Vec::new(),
        objective: f64::INFINITY,
        status: SolveStatus::Infeasible,
        node_count: 0,
    };
    let Some(allowed) = fixings.allowed(inst) else {
        return Ok(infeasible);
    };
    let mut search = Search {
        inst,
        allowed,
        usage: vec![0; inst.capacities.len() * inst.horizon as usize],
        current: Vec::with_capacity(inst.jobs.len()),
        best: None,
        visited: 0,
    };
    search.descend(0);
    let visited = search.visited;
    Ok(match search.best {
        Some((end, assignment)) => MilpSolution {
            assignment,
            objective: end as f64 * inst.delta,
            status: SolveStatus::Optimal,
            node_count: visited,
        },
        None => MilpSolution {
            node_count: visited,
            ..infeasible
        },
    })
}

struct Search<'a> {
    inst: &'a MilpInstance,
    allowed: Vec<bool>,
    usage: Vec<u32>,
    current: Vec<usize>,
    best: Option<(u32, Vec<usize>)>,
    visited: usize,
}

impl Search<'_> {
    fn partial_end(&self) -> u32 {
        self.current.iter().map(|&v| self.inst.vars[v].end()).max().unwrap_or(0)
    }

    fn descend(&mut self, job: usize) {
        self.visited += 1;
        let end = self.partial_end();
        if let Some((b, _)) = &self.best {
            if end >= *b {
                return;
            }
        }
        if job == self.inst.jobs.len() {
            self.best = Some((end, self.current.clone()));
            return;
        }
        let h = self.inst.horizon as usize;
        for v in self.inst.job_vars[job].clone() {
            if !self.allowed[v] {
                continue;
            }
            let var = self.inst.vars[v];
            let cap = self.inst.capacities[var.node];
            let base = var.node * h;
            let fits = (var.start..var.end()).all(|t| self.usage[base + t as usize] + var.config.gpus <= cap);
            if !fits {
                continue;
            }
            for t in var.start..var.end() {
                self.usage[base + t as usize] += var.config.gpus;
            }
            self.current.push(v);
            self.descend(job + 1);
            self.current.pop();
            for t in var.start..var.end() {
                self.usage[base + t as usize] -= var.config.gpus;
            }
        }
    }
}
