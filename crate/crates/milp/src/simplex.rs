//! Dense bounded-variable dual simplex.
//!
//! Every row gets a slack (`[0, inf)` for `<=`, `[0, 0]` for `=`), so the
//! slack basis is always available as a start. Nonbasic variables sit at one
//! of their bounds; a variable whose needed bound is infinite gets an
//! artificial box at `BIG`, and ending on such a bound means the LP is
//! unbounded.

#![allow(clippy::needless_range_loop)]

use crate::problem::{MilpProblem, Sense};

const BIG: f64 = 1e7;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 60;

/// Row-major dense copy of a problem's constraint matrix.
#[derive(Debug, Clone)]
pub(crate) struct LpData {
    pub m: usize,
    pub n: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Costs of structurals and slacks (`n + m` entries).
    pub c: Vec<f64>,
    pub slack_hi: Vec<f64>,
}

impl LpData {
    pub fn from_problem(p: &MilpProblem) -> Self {
        let n = p.vars.len();
        let m = p.constraints.len();
        let mut a = vec![0.0; m * n];
        let mut b = vec![0.0; m];
        let mut slack_hi = vec![f64::INFINITY; m];
        for (i, row) in p.constraints.iter().enumerate() {
            let sign = if row.sense == Sense::Ge { -1.0 } else { 1.0 };
            for (j, coef) in row.expr.compacted() {
                a[i * n + j] = sign * coef;
            }
            b[i] = sign * row.rhs;
            if row.sense == Sense::Eq {
                slack_hi[i] = 0.0;
            }
        }
        let mut c = vec![0.0; n + m];
        for (j, coef) in p.objective.compacted() {
            c[j] = coef;
        }
        LpData {
            m,
            n,
            a,
            b,
            c,
            slack_hi,
        }
    }

    pub fn ntot(&self) -> usize {
        self.n + self.m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Basis snapshot used to warm-start a tableau.
#[derive(Debug, Clone)]
pub(crate) struct Basis {
    pub basic: Vec<usize>,
    pub at_upper: Vec<bool>,
}

#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    m: usize,
    ntot: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    art: Vec<bool>,
    t: Vec<f64>,
    d: Vec<f64>,
    basic: Vec<usize>,
    row_of: Vec<usize>,
    at_upper: Vec<bool>,
    x: Vec<f64>,
    since_refactor: usize,
}

impl Tableau {
    /// Slack basis start; `lo`/`hi` are the structural bounds.
    pub fn slack_start(lp: &LpData, lo: &[f64], hi: &[f64]) -> Tableau {
        let (m, n, ntot) = (lp.m, lp.n, lp.ntot());
        let mut tab = Tableau::empty(lp, lo, hi);
        tab.t = vec![0.0; m * ntot];
        for i in 0..m {
            tab.t[i * ntot..i * ntot + n].copy_from_slice(&lp.a[i * n..(i + 1) * n]);
            tab.t[i * ntot + n + i] = 1.0;
            tab.basic[i] = n + i;
            tab.row_of[n + i] = i;
        }
        tab.d = lp.c.clone();
        tab.make_dual_feasible();
        tab.recompute_basic_values(lp);
        tab
    }

    /// Rebuilds the tableau for a stored basis. Returns `None` when the basis
    /// matrix is numerically singular.
    pub fn from_basis(lp: &LpData, lo: &[f64], hi: &[f64], basis: &Basis) -> Option<Tableau> {
        let mut tab = Tableau::empty(lp, lo, hi);
        tab.at_upper = basis.at_upper.clone();
        tab.basic = basis.basic.clone();
        if !tab.refactor(lp) {
            return None;
        }
        tab.make_dual_feasible();
        tab.recompute_basic_values(lp);
        Some(tab)
    }

    fn empty(lp: &LpData, lo: &[f64], hi: &[f64]) -> Tableau {
        let (m, n, ntot) = (lp.m, lp.n, lp.ntot());
        let mut l = Vec::with_capacity(ntot);
        let mut h = Vec::with_capacity(ntot);
        l.extend_from_slice(&lo[..n]);
        h.extend_from_slice(&hi[..n]);
        for i in 0..m {
            l.push(0.0);
            h.push(lp.slack_hi[i]);
        }
        Tableau {
            m,
            ntot,
            lo: l,
            hi: h,
            art: vec![false; ntot],
            t: Vec::new(),
            d: vec![0.0; ntot],
            basic: vec![usize::MAX; m],
            row_of: vec![usize::MAX; ntot],
            at_upper: vec![false; ntot],
            x: vec![0.0; ntot],
            since_refactor: 0,
        }
    }

    pub fn basis(&self) -> Basis {
        Basis {
            basic: self.basic.clone(),
            at_upper: self.at_upper.clone(),
        }
    }

    pub fn values(&self, n: usize) -> Vec<f64> {
        self.x[..n].to_vec()
    }

    pub fn objective(&self, lp: &LpData) -> f64 {
        lp.c.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    fn is_basic(&self, j: usize) -> bool {
        self.row_of[j] != usize::MAX
    }

    /// Changes the bounds of structural `j`, keeping the tableau consistent.
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        self.art[j] = false;
        if self.is_basic(j) {
            return;
        }
        let target = self.nonbasic_target(j);
        let delta = target - self.x[j];
        if delta != 0.0 {
            self.shift_nonbasic(j, delta);
        }
    }

    fn nonbasic_target(&mut self, j: usize) -> f64 {
        if self.at_upper[j] && self.hi[j].is_finite() {
            return self.hi[j];
        }
        if self.lo[j].is_finite() {
            self.at_upper[j] = false;
            return self.lo[j];
        }
        if self.hi[j].is_finite() {
            self.at_upper[j] = true;
            return self.hi[j];
        }
        // free variable: park on an artificial box side
        if self.d[j] < 0.0 {
            self.hi[j] = BIG;
            self.art[j] = true;
            self.at_upper[j] = true;
            BIG
        } else {
            self.lo[j] = -BIG;
            self.art[j] = true;
            self.at_upper[j] = false;
            -BIG
        }
    }

    fn shift_nonbasic(&mut self, j: usize, delta: f64) {
        self.x[j] += delta;
        for i in 0..self.m {
            let tij = self.t[i * self.ntot + j];
            if tij != 0.0 {
                self.x[self.basic[i]] -= tij * delta;
            }
        }
    }

    /// Puts each nonbasic variable on the bound its reduced cost asks for,
    /// adding artificial boxes where that bound is infinite.
    fn make_dual_feasible(&mut self) {
        for j in 0..self.ntot {
            if self.is_basic(j) {
                continue;
            }
            if self.d[j] < -DUAL_TOL && !self.at_upper[j] {
                if !self.hi[j].is_finite() {
                    self.hi[j] = BIG.max(self.lo[j] + BIG);
                    self.art[j] = true;
                }
                self.at_upper[j] = true;
            } else if self.d[j] > DUAL_TOL && self.at_upper[j] {
                if !self.lo[j].is_finite() {
                    self.lo[j] = -BIG.max(BIG - self.hi[j]);
                    self.art[j] = true;
                }
                self.at_upper[j] = false;
            }
            let _ = self.nonbasic_target(j);
        }
    }

    fn recompute_basic_values(&mut self, lp: &LpData) {
        for j in 0..self.ntot {
            if !self.is_basic(j) {
                self.x[j] = if self.at_upper[j] { self.hi[j] } else { self.lo[j] };
            }
        }
        // x_B = B^-1 b - sum_N (B^-1 a_j) x_j; B^-1 sits in the slack columns
        let (m, n, ntot) = (self.m, lp.n, self.ntot);
        for i in 0..m {
            let row = &self.t[i * ntot..(i + 1) * ntot];
            let mut v = 0.0;
            for k in 0..m {
                v += row[n + k] * lp.b[k];
            }
            for j in 0..ntot {
                if self.row_of[j] == usize::MAX && self.x[j] != 0.0 {
                    v -= row[j] * self.x[j];
                }
            }
            self.x[self.basic[i]] = v;
        }
    }

    /// Gauss-Jordan rebuild of `B^-1 [A I]` and reduced costs.
    fn refactor(&mut self, lp: &LpData) -> bool {
        let (m, n, ntot) = (self.m, lp.n, self.ntot);
        let mut t = vec![0.0; m * ntot];
        for i in 0..m {
            t[i * ntot..i * ntot + n].copy_from_slice(&lp.a[i * n..(i + 1) * n]);
            t[i * ntot + n + i] = 1.0;
        }
        let mut assigned = vec![false; m];
        let mut new_basic = vec![usize::MAX; m];
        let order = self.basic.clone();
        let mut col = vec![0.0; m];
        for &bj in &order {
            // pick the unassigned row with the largest entry in column bj
            let mut best = usize::MAX;
            let mut best_abs = 1e-11;
            for i in 0..m {
                if !assigned[i] {
                    let v = t[i * ntot + bj].abs();
                    if v > best_abs {
                        best_abs = v;
                        best = i;
                    }
                }
            }
            if best == usize::MAX {
                return false;
            }
            assigned[best] = true;
            new_basic[best] = bj;
            pivot_rows(&mut t, m, ntot, best, bj, &mut col);
        }
        self.t = t;
        self.basic = new_basic;
        self.row_of.iter_mut().for_each(|r| *r = usize::MAX);
        for (i, &bj) in self.basic.iter().enumerate() {
            self.row_of[bj] = i;
        }
        // d_j = c_j - c_B^T T_j
        let mut d = lp.c.clone();
        for i in 0..m {
            let cb = lp.c[self.basic[i]];
            if cb != 0.0 {
                let row = &self.t[i * ntot..(i + 1) * ntot];
                for j in 0..ntot {
                    d[j] -= cb * row[j];
                }
            }
        }
        for &bj in &self.basic {
            d[bj] = 0.0;
        }
        self.d = d;
        self.since_refactor = 0;
        true
    }

    fn refresh(&mut self, lp: &LpData) -> bool {
        let keep = self.basic.clone();
        if !self.refactor(lp) {
            self.basic = keep;
            return false;
        }
        self.make_dual_feasible();
        self.recompute_basic_values(lp);
        true
    }

    fn infeasibility(&self, row: usize) -> f64 {
        let j = self.basic[row];
        let x = self.x[j];
        let tol = PRIMAL_TOL * (1.0 + x.abs().min(1e6));
        if x < self.lo[j] - tol {
            self.lo[j] - x
        } else if x > self.hi[j] + tol {
            x - self.hi[j]
        } else {
            0.0
        }
    }

    /// Runs dual simplex iterations until primal feasibility (optimal) or a
    /// proof of infeasibility.
    pub fn dual_simplex(&mut self, lp: &LpData, max_iter: usize) -> LpStatus {
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            if self.since_refactor >= REFACTOR_EVERY && !self.refresh(lp) {
                return LpStatus::IterationLimit;
            }
            let bland = degenerate_run > 50;
            // leaving row
            let mut r = usize::MAX;
            let mut best = 0.0;
            for i in 0..self.m {
                let inf = self.infeasibility(i);
                if inf > 0.0 {
                    if bland {
                        if r == usize::MAX || self.basic[i] < self.basic[r] {
                            r = i;
                        }
                    } else if inf > best {
                        best = inf;
                        r = i;
                    }
                }
            }
            if r == usize::MAX {
                // clean accumulated drift before declaring optimality
                if self.since_refactor > 0 {
                    if !self.refresh(lp) {
                        return LpStatus::IterationLimit;
                    }
                    continue;
                }
                return if self.art.iter().enumerate().any(|(j, &a)| {
                    a && !self.is_basic(j) && (self.x[j].abs() >= BIG * 0.5)
                }) || self.basic_on_artificial()
                {
                    LpStatus::Unbounded
                } else {
                    LpStatus::Optimal
                };
            }
            let p = self.basic[r];
            let increase = self.x[p] < self.lo[p];
            let target = if increase { self.lo[p] } else { self.hi[p] };
            let row_off = r * self.ntot;

            // Harris ratio test, pass 1: relaxed bound
            let mut theta_max = f64::INFINITY;
            for j in 0..self.ntot {
                if self.is_basic(j) || self.lo[j] == self.hi[j] {
                    continue;
                }
                let a = self.t[row_off + j];
                if !self.eligible(j, a, increase) {
                    continue;
                }
                let ratio = (self.d[j].abs() + DUAL_TOL) / a.abs();
                if ratio < theta_max {
                    theta_max = ratio;
                }
            }
            if !theta_max.is_finite() {
                return LpStatus::Infeasible;
            }
            // pass 2: largest pivot among candidates within the relaxed ratio
            let mut q = usize::MAX;
            let mut q_abs = 0.0;
            let mut q_ratio = f64::INFINITY;
            for j in 0..self.ntot {
                if self.is_basic(j) || self.lo[j] == self.hi[j] {
                    continue;
                }
                let a = self.t[row_off + j];
                if !self.eligible(j, a, increase) {
                    continue;
                }
                let ratio = self.d[j].abs() / a.abs();
                if ratio <= theta_max {
                    let better = if bland {
                        q == usize::MAX || ratio < q_ratio - 1e-12
                    } else {
                        a.abs() > q_abs
                    };
                    if better {
                        q = j;
                        q_abs = a.abs();
                        q_ratio = ratio;
                    }
                }
            }
            if q == usize::MAX {
                return LpStatus::Infeasible;
            }
            if q_ratio < 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            let arq = self.t[row_off + q];
            let delta = (self.x[p] - target) / arq;
            // primal update
            self.x[q] += delta;
            for i in 0..self.m {
                let tiq = self.t[i * self.ntot + q];
                if tiq != 0.0 {
                    self.x[self.basic[i]] -= tiq * delta;
                }
            }
            self.x[p] = target;
            self.at_upper[p] = !increase;
            // dual update
            let dq = self.d[q] / arq;
            if dq != 0.0 {
                for j in 0..self.ntot {
                    let a = self.t[row_off + j];
                    if a != 0.0 {
                        self.d[j] -= dq * a;
                    }
                }
            }
            self.d[q] = 0.0;
            let mut col = vec![0.0; self.m];
            pivot_rows(&mut self.t, self.m, self.ntot, r, q, &mut col);
            self.row_of[p] = usize::MAX;
            self.row_of[q] = r;
            self.basic[r] = q;
            self.since_refactor += 1;
        }
        LpStatus::IterationLimit
    }

    fn basic_on_artificial(&self) -> bool {
        self.basic
            .iter()
            .any(|&j| self.art[j] && self.x[j].abs() >= BIG * 0.5)
    }

    fn eligible(&self, j: usize, a: f64, increase: bool) -> bool {
        if a.abs() <= PIVOT_TOL {
            return false;
        }
        // x_p changes by -a * dx_j; nonbasic at lower can only grow, at upper only shrink
        let at_upper = self.at_upper[j];
        if increase {
            (!at_upper && a < 0.0) || (at_upper && a > 0.0)
        } else {
            (!at_upper && a > 0.0) || (at_upper && a < 0.0)
        }
    }
}

/// Pivot the dense tableau on `(r, q)`: row `r` is scaled to a unit pivot and
/// column `q` is eliminated from every other row.
fn pivot_rows(t: &mut [f64], m: usize, ntot: usize, r: usize, q: usize, col: &mut [f64]) {
    let piv = t[r * ntot + q];
    {
        let row = &mut t[r * ntot..(r + 1) * ntot];
        let inv = 1.0 / piv;
        for v in row.iter_mut() {
            *v *= inv;
        }
        row[q] = 1.0;
    }
    for i in 0..m {
        col[i] = t[i * ntot + q];
    }
    let (before, rest) = t.split_at_mut(r * ntot);
    let (prow, after) = rest.split_at_mut(ntot);
    for (i, chunk) in before.chunks_exact_mut(ntot).enumerate() {
        let f = col[i];
        if f != 0.0 {
            for (v, p) in chunk.iter_mut().zip(prow.iter()) {
                *v -= f * p;
            }
            chunk[q] = 0.0;
        }
    }
    for (k, chunk) in after.chunks_exact_mut(ntot).enumerate() {
        let f = col[r + 1 + k];
        if f != 0.0 {
            for (v, p) in chunk.iter_mut().zip(prow.iter()) {
                *v -= f * p;
            }
            chunk[q] = 0.0;
        }
    }
}

#[cfg(test)]
/// One-shot LP solve of the relaxation (binaries treated as `[0, 1]`).
pub(crate) fn solve_relaxation(
    lp: &LpData,
    lo: &[f64],
    hi: &[f64],
) -> (LpStatus, Option<Tableau>) {
    let mut tab = Tableau::slack_start(lp, lo, hi);
    let status = tab.dual_simplex(lp, iteration_budget(lp));
    (status, Some(tab))
}

pub(crate) fn iteration_budget(lp: &LpData) -> usize {
    50 * (lp.m + lp.n) + 1000
}
