//! Two-phase primal simplex over `A x = b, x >= 0`, revised form with an
//! explicit dense basis inverse.
//!
//! Pricing is Dantzig's rule; after a run of degenerate pivots it falls back
//! to Bland's rule until the objective moves again. The ratio test is Harris's
//! two-pass variant, which prefers large pivots among near-ties.
//!
//! A solve may start from an earlier optimal basis. Basic columns that are no
//! longer allowed then play the part of artificials: phase one drives them to
//! zero and they never re-enter.

#![allow(clippy::needless_range_loop)]

use alloc::vec;
use alloc::vec::Vec;

use super::{MilpError, MilpInstance, RowKind, Sense};

const COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const MIN_PIVOT: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-7;
const HARRIS_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 50;

pub(crate) enum Outcome {
    Optimal {
        value: f64,
        x: Vec<f64>,
        /// Final basis, when it holds no artificial column.
        warm: Option<Warm>,
    },
    Infeasible,
}

/// A basis to restart from, optionally with its inverse.
#[derive(Clone)]
pub(crate) struct Warm {
    pub basis: Vec<usize>,
    pub inverse: Option<Vec<f64>>,
    pivots: usize,
}

impl Warm {
    pub(crate) fn without_inverse(&self) -> Self {
        Warm {
            basis: self.basis.clone(),
            inverse: None,
            pivots: 0,
        }
    }
}

/// `min c x  s.t.  A x = b, x >= 0` with `b >= 0`.
pub(crate) struct StandardForm {
    rows: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    /// Column forming a unit vector in each row, usable as a starting basis.
    unit: Vec<Option<usize>>,
}

impl StandardForm {
    /// Columns: binaries, then `M` (in intervals), then one slack per `<=` row.
    pub(crate) fn from_instance(inst: &MilpInstance) -> Self {
        let nx = inst.vars.len();
        let rows = inst.rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nx + 1];
        let mut cost = vec![0.0; nx + 1];
        cost[nx] = 1.0;
        let mut rhs = vec![0.0; rows];
        let mut unit = vec![None; rows];
        for (r, row) in inst.rows.iter().enumerate() {
            let scale = match row.kind {
                RowKind::Makespan { .. } => 1.0 / inst.delta,
                _ => 1.0,
            };
            for &(v, a) in &row.coeffs {
                cols[v].push((r, a * scale));
            }
            if row.makespan_coeff != 0.0 {
                cols[nx].push((r, row.makespan_coeff));
            }
            rhs[r] = row.rhs * scale;
            if row.sense == Sense::Le {
                unit[r] = Some(cols.len());
                cols.push(vec![(r, 1.0)]);
                cost.push(0.0);
            }
        }
        StandardForm {
            rows,
            cols,
            cost,
            rhs,
            unit,
        }
    }

    /// `allowed[j]` for the leading columns; columns past its end are free.
    pub(crate) fn solve(&self, allowed: &[bool]) -> Result<Outcome, MilpError> {
        Solver::new(self, allowed).run()
    }

    /// Like [`StandardForm::solve`], starting from `warm` when it is still
    /// nonsingular and primal feasible, and from scratch otherwise.
    pub(crate) fn solve_from(&self, allowed: &[bool], warm: Warm) -> Result<Outcome, MilpError> {
        if let Some(solver) = Solver::warm(self, allowed, warm) {
            if let Ok(out) = solver.run() {
                return Ok(out);
            }
        }
        self.solve(allowed)
    }
}

const NONE: usize = usize::MAX;

struct Solver<'a> {
    lp: &'a StandardForm,
    allowed: &'a [bool],
    m: usize,
    /// Structural columns; artificials follow.
    n: usize,
    art_row: Vec<usize>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    since_refactor: usize,
    phase_one: bool,
    /// Allowed structural columns, the only ones that may enter.
    candidates: Vec<usize>,
}

impl<'a> Solver<'a> {
    fn new(lp: &'a StandardForm, allowed: &'a [bool]) -> Self {
        let m = lp.rows;
        let n = lp.cols.len();
        let mut art_row = Vec::new();
        let mut basis = Vec::with_capacity(m);
        for r in 0..m {
            match lp.unit[r] {
                Some(c) => basis.push(c),
                None => {
                    basis.push(n + art_row.len());
                    art_row.push(r);
                }
            }
        }
        let mut pos = vec![NONE; n + art_row.len()];
        for (r, &c) in basis.iter().enumerate() {
            pos[c] = r;
        }
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = 1.0;
        }
        Solver {
            lp,
            allowed,
            m,
            n,
            art_row,
            basis,
            pos,
            binv,
            xb: lp.rhs.clone(),
            since_refactor: 0,
            phase_one: true,
            candidates: (0..n).filter(|&j| allowed.get(j).copied().unwrap_or(true)).collect(),
        }
    }

    fn warm(lp: &'a StandardForm, allowed: &'a [bool], warm: Warm) -> Option<Self> {
        let n = lp.cols.len();
        let m = lp.rows;
        if warm.basis.len() != m || warm.basis.iter().any(|&c| c >= n) {
            return None;
        }
        let mut solver = Solver::new(lp, allowed);
        solver.art_row.clear();
        solver.pos = vec![NONE; n];
        for (r, &c) in warm.basis.iter().enumerate() {
            if solver.pos[c] != NONE {
                return None;
            }
            solver.pos[c] = r;
        }
        solver.basis = warm.basis;
        match warm.inverse {
            Some(inv) if inv.len() == m * m => {
                for r in 0..m {
                    let row = &inv[r * m..(r + 1) * m];
                    solver.xb[r] = row.iter().zip(&lp.rhs).map(|(a, b)| a * b).sum();
                }
                solver.binv = inv;
                solver.since_refactor = warm.pivots;
            }
            _ => solver.refactor().ok()?,
        }
        if solver.xb.iter().any(|&v| v < -FEAS_TOL) {
            return None;
        }
        Some(solver)
    }

    fn is_allowed(&self, j: usize) -> bool {
        j >= self.n || self.allowed.get(j).copied().unwrap_or(true)
    }

    /// Artificial, or structural but no longer allowed.
    fn penalized(&self, j: usize) -> bool {
        !self.is_allowed(j) || j >= self.n
    }

    fn cost(&self, j: usize) -> f64 {
        if self.phase_one {
            if self.penalized(j) {
                1.0
            } else {
                0.0
            }
        } else if j >= self.n {
            0.0
        } else {
            self.lp.cost[j]
        }
    }

    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for &(r, a) in &self.lp.cols[j] {
                f(r, a);
            }
        } else {
            f(self.art_row[j - self.n], 1.0);
        }
    }

    fn run(mut self) -> Result<Outcome, MilpError> {
        if self.basis.iter().any(|&c| self.penalized(c)) {
            self.iterate()?;
            let infeasibility: f64 = (0..self.m)
                .filter(|&r| self.penalized(self.basis[r]))
                .map(|r| self.xb[r])
                .sum();
            if infeasibility > FEAS_TOL {
                return Ok(Outcome::Infeasible);
            }
            self.drive_out_artificials()?;
        }
        self.phase_one = false;
        self.iterate()?;

        let mut x = vec![0.0; self.n];
        for (r, &c) in self.basis.iter().enumerate() {
            if c < self.n {
                x[c] = self.xb[r].max(0.0);
            }
        }
        let value = (0..self.n).map(|j| self.lp.cost[j] * x[j]).sum();
        let warm = self.basis.iter().all(|&c| c < self.n).then_some(Warm {
            basis: self.basis,
            inverse: Some(self.binv),
            pivots: self.since_refactor,
        });
        Ok(Outcome::Optimal { value, x, warm })
    }

    fn iterate(&mut self) -> Result<(), MilpError> {
        let m = self.m;
        let limit = 50 * (m + self.n) + 1000;
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut y = vec![0.0; m];
        let mut u = vec![0.0; m];
        for _ in 0..limit {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            y.fill(0.0);
            for r in 0..m {
                let cb = self.cost(self.basis[r]);
                if cb != 0.0 {
                    let row = &self.binv[r * m..(r + 1) * m];
                    for k in 0..m {
                        y[k] += cb * row[k];
                    }
                }
            }

            // Artificials never re-enter once they leave.
            let mut enter = NONE;
            let mut best = -COST_TOL;
            for &j in &self.candidates {
                if self.pos[j] != NONE {
                    continue;
                }
                let mut d = self.cost(j);
                for &(r, a) in &self.lp.cols[j] {
                    d -= y[r] * a;
                }
                if bland {
                    if d < -COST_TOL {
                        enter = j;
                        break;
                    }
                } else if d < best {
                    best = d;
                    enter = j;
                }
            }
            if enter == NONE {
                return Ok(());
            }

            u.fill(0.0);
            let binv = &self.binv;
            self.for_column(enter, |k, a| {
                for r in 0..m {
                    u[r] += binv[r * m + k] * a;
                }
            });

            let leave = if bland {
                self.bland_ratio(&u)
            } else {
                self.harris_ratio(&u)
            };
            if leave == NONE {
                return Err(MilpError::NumericalFailure("unbounded direction"));
            }
            if u[leave].abs() < MIN_PIVOT {
                return Err(MilpError::NumericalFailure("pivot below tolerance"));
            }
            if self.xb[leave].max(0.0) / u[leave] <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
            self.pivot(leave, enter, &u);
        }
        Err(MilpError::NumericalFailure("iteration limit"))
    }

    /// Smallest ratio, ties to the lowest basic column.
    fn bland_ratio(&self, u: &[f64]) -> usize {
        let mut leave = NONE;
        let mut ratio = f64::INFINITY;
        for r in 0..self.m {
            if u[r] <= PIVOT_TOL {
                continue;
            }
            let q = self.xb[r].max(0.0) / u[r];
            if leave == NONE || q < ratio - 1e-12 || (q <= ratio + 1e-12 && self.basis[r] < self.basis[leave]) {
                leave = r;
                ratio = q;
            }
        }
        leave
    }

    /// Bounds the step with relaxed ratios first, then takes the largest
    /// pivot whose exact ratio fits under that bound.
    fn harris_ratio(&self, u: &[f64]) -> usize {
        let mut bound = f64::INFINITY;
        for r in 0..self.m {
            if u[r] > PIVOT_TOL {
                bound = bound.min((self.xb[r].max(0.0) + HARRIS_TOL) / u[r]);
            }
        }
        let mut leave = NONE;
        for r in 0..self.m {
            if u[r] > PIVOT_TOL && self.xb[r].max(0.0) / u[r] <= bound && (leave == NONE || u[r] > u[leave]) {
                leave = r;
            }
        }
        leave
    }

    fn pivot(&mut self, p: usize, q: usize, u: &[f64]) {
        let m = self.m;
        let up = u[p];
        let theta = self.xb[p].max(0.0) / up;
        for r in 0..m {
            if r != p {
                self.xb[r] -= theta * u[r];
                if self.xb[r].abs() < 1e-13 || (self.xb[r] < 0.0 && self.xb[r] > -HARRIS_TOL) {
                    self.xb[r] = 0.0;
                }
            }
        }
        self.xb[p] = theta;
        let (before, rest) = self.binv.split_at_mut(p * m);
        let (prow, after) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= up;
        }
        for (r, row) in before.chunks_mut(m).enumerate() {
            let f = u[r];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
            }
        }
        for (i, row) in after.chunks_mut(m).enumerate() {
            let f = u[p + 1 + i];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
            }
        }
        let old = self.basis[p];
        self.pos[old] = NONE;
        self.basis[p] = q;
        self.pos[q] = p;
        self.since_refactor += 1;
    }

    /// Pivots zero-level penalized columns out of the basis where an allowed
    /// column can replace them; rows where none can are redundant.
    fn drive_out_artificials(&mut self) -> Result<(), MilpError> {
        let m = self.m;
        let mut u = vec![0.0; m];
        for r in 0..m {
            if !self.penalized(self.basis[r]) {
                continue;
            }
            let mut found = NONE;
            for j in 0..self.n {
                if self.pos[j] != NONE || !self.is_allowed(j) {
                    continue;
                }
                let row = &self.binv[r * m..(r + 1) * m];
                let mut v = 0.0;
                for &(k, a) in &self.lp.cols[j] {
                    v += row[k] * a;
                }
                if v.abs() > 1e-7 {
                    found = j;
                    break;
                }
            }
            if found == NONE {
                continue;
            }
            for x in u.iter_mut() {
                *x = 0.0;
            }
            let binv = &self.binv;
            self.for_column(found, |k, a| {
                for i in 0..m {
                    u[i] += binv[i * m + k] * a;
                }
            });
            self.pivot(r, found, &u);
        }
        Ok(())
    }

    /// Recomputes the basis inverse by Gauss-Jordan elimination.
    fn refactor(&mut self) -> Result<(), MilpError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (c, &col) in self.basis.iter().enumerate() {
            self.for_column(col, |r, v| a[r * m + c] = v);
        }
        let mut inv = vec![0.0; m * m];
        for r in 0..m {
            inv[r * m + r] = 1.0;
        }
        for c in 0..m {
            let mut piv = c;
            for r in c + 1..m {
                if a[r * m + c].abs() > a[piv * m + c].abs() {
                    piv = r;
                }
            }
            if a[piv * m + c].abs() < MIN_PIVOT {
                return Err(MilpError::NumericalFailure("singular basis"));
            }
            if piv != c {
                for k in 0..m {
                    a.swap(c * m + k, piv * m + k);
                    inv.swap(c * m + k, piv * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            let v: f64 = row.iter().zip(&self.lp.rhs).map(|(a, b)| a * b).sum();
            self.xb[r] = if v.abs() < 1e-12 { 0.0 } else { v };
        }
        self.since_refactor = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(cols: Vec<Vec<(usize, f64)>>, cost: Vec<f64>, rhs: Vec<f64>, unit: Vec<Option<usize>>) -> StandardForm {
        StandardForm {
            rows: rhs.len(),
            cols,
            cost,
            rhs,
            unit,
        }
    }

    #[test]
    fn textbook_problem() {
        // max 3a + 5b  s.t. a <= 4, 2b <= 12, 3a + 2b <= 18  => 36 at (2, 6)
        let p = lp(
            vec![
                vec![(0, 1.0), (2, 3.0)],
                vec![(1, 2.0), (2, 2.0)],
                vec![(0, 1.0)],
                vec![(1, 1.0)],
                vec![(2, 1.0)],
            ],
            vec![-3.0, -5.0, 0.0, 0.0, 0.0],
            vec![4.0, 12.0, 18.0],
            vec![Some(2), Some(3), Some(4)],
        );
        match p.solve(&[]).unwrap() {
            Outcome::Optimal { value, x, .. } => {
                assert!((value + 36.0).abs() < 1e-9);
                assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
            }
            Outcome::Infeasible => panic!("infeasible"),
        }
    }

    #[test]
    fn equality_rows_use_phase_one() {
        // min a + 2b  s.t. a + b = 3, a - b + s = 1  => a = 2, b = 1, value 4
        let p = lp(
            vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, -1.0)], vec![(1, 1.0)]],
            vec![1.0, 2.0, 0.0],
            vec![3.0, 1.0],
            vec![None, Some(2)],
        );
        match p.solve(&[]).unwrap() {
            Outcome::Optimal { value, .. } => assert!((value - 4.0).abs() < 1e-9),
            Outcome::Infeasible => panic!("infeasible"),
        }
        // With `a` forbidden, b = 3 and the slack absorbs 4: value 6.
        match p.solve(&[false, true]).unwrap() {
            Outcome::Optimal { value, .. } => assert!((value - 6.0).abs() < 1e-9),
            Outcome::Infeasible => panic!("infeasible"),
        }
    }

    #[test]
    fn detects_infeasibility() {
        // a + b = 3 with a <= 1 and b forbidden
        let p = lp(
            vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0)], vec![(1, 1.0)]],
            vec![1.0, 1.0, 0.0],
            vec![3.0, 1.0],
            vec![None, Some(2)],
        );
        assert!(matches!(p.solve(&[true, false]).unwrap(), Outcome::Infeasible));
    }
}
