//! Bounded dual simplex on the computational form
//! `min cᵀx  s.t.  A x − r = 0,  l ≤ (x, r) ≤ u`.
//!
//! Every variable has finite bounds (infinite structural bounds are boxed at
//! [`INF_BOX`]; row activities get their implied bounds), so any basis can be
//! made dual feasible by moving nonbasic variables to the bound matching the
//! sign of their reduced cost. The method therefore never needs a primal
//! phase: it starts from the all-logical basis or from a warm basis.

use alloc::vec;
use alloc::vec::Vec;

use super::lu::LuFactor;
use crate::clock::Deadline;
use crate::milp::{Cmp, MilpModel, ObjSense};

pub(crate) const INF_BOX: f64 = 1e7;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_SWITCH: usize = 200;
const PERTURBATION: f64 = 5e-7;
const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    Numerical,
}

#[derive(Clone, Debug)]
pub(crate) struct StdLp {
    pub n: usize,
    pub m: usize,
    pub cols: Vec<Vec<(usize, f64)>>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Structural bounds that were infinite in the model.
    pub open_lower: Vec<bool>,
    pub open_upper: Vec<bool>,
    /// `+1` when the model minimizes, `-1` when it maximizes.
    pub sign: f64,
}

impl StdLp {
    pub(crate) fn from_model(model: &MilpModel) -> StdLp {
        let n = model.num_vars();
        let m = model.num_constraints();
        let sign = if model.sense == ObjSense::Maximize { -1.0 } else { 1.0 };
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        let mut open_lower = Vec::with_capacity(n);
        let mut open_upper = Vec::with_capacity(n);
        for v in &model.vars {
            open_lower.push(v.lower == f64::NEG_INFINITY);
            open_upper.push(v.upper == f64::INFINITY);
            lower.push(v.lower.max(-INF_BOX));
            upper.push(v.upper.min(INF_BOX));
        }
        let mut cols = vec![Vec::new(); n];
        let mut rows = Vec::with_capacity(m);
        for (i, c) in model.constraints.iter().enumerate() {
            let mut lo_act = 0.0;
            let mut hi_act = 0.0;
            for &(v, a) in &c.terms {
                let j = v.index();
                cols[j].push((i, a));
                if a > 0.0 {
                    lo_act += a * lower[j];
                    hi_act += a * upper[j];
                } else {
                    lo_act += a * upper[j];
                    hi_act += a * lower[j];
                }
            }
            rows.push(c.terms.iter().map(|&(v, a)| (v.index(), a)).collect::<Vec<_>>());
            let (l, u) = match c.cmp {
                Cmp::Le => (lo_act.min(c.rhs), c.rhs),
                Cmp::Ge => (c.rhs, hi_act.max(c.rhs)),
                Cmp::Eq => (c.rhs, c.rhs),
            };
            lower.push(l);
            upper.push(u);
        }
        let mut cost = vec![0.0; n + m];
        for &(v, a) in &model.objective.terms {
            cost[v.index()] += sign * a;
        }
        StdLp { n, m, cols, rows, cost, lower, upper, open_lower, open_upper, sign }
    }
}

/// Basis snapshot used for warm starts.
#[derive(Clone, Debug)]
pub(crate) struct Basis {
    head: Vec<u32>,
    at_upper: Vec<bool>,
}

#[derive(Clone)]
pub(crate) struct Simplex<'a> {
    lp: &'a StdLp,
    lo: Vec<f64>,
    up: Vec<f64>,
    /// Working costs; perturbed while the main loop runs.
    cost: Vec<f64>,
    perturbed: bool,
    head: Vec<usize>,
    pos: Vec<usize>,
    at_upper: Vec<bool>,
    x: Vec<f64>,
    d: Vec<f64>,
    /// Dual Devex reference weights, one per basis position.
    weight: Vec<f64>,
    lu: LuFactor,
    pub iterations: usize,
    troubles: usize,
}

struct Candidate {
    j: usize,
    ratio: f64,
    abs_alpha: f64,
    slack: f64,
}

impl<'a> Simplex<'a> {
    pub(crate) fn new(lp: &'a StdLp, lo: Vec<f64>, up: Vec<f64>, warm: Option<&Basis>) -> Self {
        let (n, m) = (lp.n, lp.m);
        let (head, at_upper) = match warm {
            Some(b) => (b.head.iter().map(|&h| h as usize).collect(), b.at_upper.clone()),
            None => {
                let head: Vec<usize> = (n..n + m).collect();
                let mut at_upper = vec![false; n + m];
                for j in 0..n {
                    at_upper[j] = lp.cost[j] < 0.0;
                }
                (head, at_upper)
            }
        };
        let mut pos = vec![NONE; n + m];
        for (k, &h) in head.iter().enumerate() {
            pos[h] = k;
        }
        let mut s = Simplex {
            lp,
            lo,
            up,
            cost: lp.cost.clone(),
            perturbed: false,
            head,
            pos,
            at_upper,
            x: vec![0.0; n + m],
            d: vec![0.0; n + m],
            weight: vec![1.0; m],
            lu: LuFactor::default(),
            iterations: 0,
            troubles: 0,
        };
        s.refactor();
        s.recompute();
        s
    }

    /// Replaces the bounds of variable `j`, keeping the basis.
    pub(crate) fn set_bounds(&mut self, changes: &[(u32, f64, f64)]) {
        for &(j, l, u) in changes {
            let j = j as usize;
            self.lo[j] = l;
            self.up[j] = u;
        }
        self.compute_primal();
    }

    pub(crate) fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.up)
    }

    pub(crate) fn basis(&self) -> Basis {
        Basis { head: self.head.iter().map(|&h| h as u32).collect(), at_upper: self.at_upper.clone() }
    }

    pub(crate) fn structural_values(&self) -> Vec<f64> {
        self.x[..self.lp.n].to_vec()
    }

    /// Objective in the model's own sense.
    pub(crate) fn objective(&self) -> f64 {
        let v: f64 = (0..self.lp.n).map(|j| self.lp.cost[j] * self.x[j]).sum();
        v * self.lp.sign
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.lp.n {
            self.lp.cols[j].clone()
        } else {
            vec![(j - self.lp.n, -1.0)]
        }
    }

    fn refactor(&mut self) {
        let m = self.lp.m;
        loop {
            let cols: Vec<Vec<(usize, f64)>> = self.head.iter().map(|&j| self.column(j)).collect();
            match LuFactor::factor(m, &cols) {
                Ok(lu) => {
                    self.lu = lu;
                    return;
                }
                Err(sing) => {
                    // swap dependent columns for the logicals of uncovered rows
                    for (&k, &row) in sing.cols.iter().zip(&sing.rows) {
                        let out = self.head[k];
                        let inn = self.lp.n + row;
                        self.pos[out] = NONE;
                        self.at_upper[out] = false;
                        self.head[k] = inn;
                        self.pos[inn] = k;
                        self.weight[k] = 1.0;
                    }
                    self.troubles += 1;
                }
            }
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.up[j]
        } else {
            self.lo[j]
        }
    }

    fn compute_primal(&mut self) {
        let (n, m) = (self.lp.n, self.lp.m);
        let mut rhs = vec![0.0; m];
        for j in 0..n + m {
            if self.pos[j] != NONE {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v == 0.0 {
                continue;
            }
            if j < n {
                for &(i, a) in &self.lp.cols[j] {
                    rhs[i] -= a * v;
                }
            } else {
                rhs[j - n] += v;
            }
        }
        let xb = self.lu.ftran(&rhs);
        for (k, &h) in self.head.iter().enumerate() {
            self.x[h] = xb[k];
        }
    }

    fn compute_duals(&mut self) {
        let (n, m) = (self.lp.n, self.lp.m);
        let cb: Vec<f64> = self.head.iter().map(|&h| self.cost[h]).collect();
        let y = self.lu.btran(&cb);
        for j in 0..n {
            self.d[j] = if self.pos[j] != NONE {
                0.0
            } else {
                self.cost[j] - self.lp.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>()
            };
        }
        for i in 0..m {
            let j = n + i;
            self.d[j] = if self.pos[j] != NONE { 0.0 } else { self.cost[j] + y[i] };
        }
    }

    /// Moves nonbasic variables to the bound their reduced cost prefers.
    fn restore_dual_feasibility(&mut self) -> bool {
        let mut flipped = false;
        for j in 0..self.lp.n + self.lp.m {
            if self.pos[j] != NONE || self.lo[j] == self.up[j] {
                continue;
            }
            if !self.at_upper[j] && self.d[j] < -DUAL_TOL {
                self.at_upper[j] = true;
                flipped = true;
            } else if self.at_upper[j] && self.d[j] > DUAL_TOL {
                self.at_upper[j] = false;
                flipped = true;
            }
        }
        flipped
    }

    fn recompute(&mut self) {
        self.compute_duals();
        self.restore_dual_feasibility();
        self.compute_primal();
    }

    /// Shifts the costs of nonbasic variables away from their bound so
    /// that ties in the ratio test become rare.
    fn perturb(&mut self) {
        for j in 0..self.lp.n + self.lp.m {
            if self.pos[j] != NONE || self.lo[j] == self.up[j] {
                continue;
            }
            let h = (j as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11;
            let u = h as f64 / (1u64 << 53) as f64;
            let xi = PERTURBATION * (1.0 + libm::fabs(self.cost[j])) * (0.5 + 0.5 * u);
            if self.at_upper[j] {
                self.cost[j] -= xi;
                self.d[j] -= xi;
            } else {
                self.cost[j] += xi;
                self.d[j] += xi;
            }
        }
        self.perturbed = true;
    }

    fn unperturb(&mut self) {
        self.cost.copy_from_slice(&self.lp.cost);
        self.perturbed = false;
        self.recompute();
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - PRIMAL_TOL {
            self.lo[j] - v
        } else if v > self.up[j] + PRIMAL_TOL {
            v - self.up[j]
        } else {
            0.0
        }
    }

    fn choose_leaving(&self, bland: bool) -> Option<usize> {
        let mut best = None;
        let mut best_val = 0.0;
        let mut best_var = NONE;
        for (k, &h) in self.head.iter().enumerate() {
            let inf = self.infeasibility(h);
            if inf <= 0.0 {
                continue;
            }
            if bland {
                if h < best_var {
                    best_var = h;
                    best = Some(k);
                }
            } else {
                let score = inf * inf / self.weight[k];
                if score > best_val {
                    best_val = score;
                    best = Some(k);
                }
            }
        }
        best
    }

    pub(crate) fn solve(&mut self, deadline: Option<&Deadline<'_>>) -> LpStatus {
        self.perturb();
        loop {
            let st = self.run(deadline);
            if st != LpStatus::Optimal {
                return st;
            }
            if !self.perturbed {
                return self.finish();
            }
            self.unperturb();
        }
    }

    /// Dual simplex iterations until no basic variable violates its bounds.
    fn run(&mut self, deadline: Option<&Deadline<'_>>) -> LpStatus {
        let (n, m) = (self.lp.n, self.lp.m);
        let limit = 50_000 + 50 * (n + m);
        let mut degenerate = 0usize;
        let mut alpha = vec![0.0; n + m];
        let mut seen = vec![false; n + m];
        let mut touched: Vec<usize> = Vec::new();
        let mut cands: Vec<Candidate> = Vec::new();
        loop {
            if self.iterations > limit || self.troubles > 50 {
                return LpStatus::Numerical;
            }
            if self.iterations % 64 == 0 && deadline.is_some_and(|d| d.expired()) {
                return LpStatus::TimeLimit;
            }
            let bland = degenerate > DEGENERATE_SWITCH;
            let Some(r) = self.choose_leaving(bland) else {
                if self.lu.num_etas() > 0 {
                    // confirm against a fresh solve with the current factors
                    self.compute_primal();
                    if self.choose_leaving(false).is_some() {
                        continue;
                    }
                }
                return LpStatus::Optimal;
            };
            let p = self.head[r];
            let (s, target) = if self.x[p] > self.up[p] { (1.0, self.up[p]) } else { (-1.0, self.lo[p]) };

            let mut e = vec![0.0; m];
            e[r] = 1.0;
            let rho = self.lu.btran(&e);
            for &j in &touched {
                alpha[j] = 0.0;
                seen[j] = false;
            }
            touched.clear();
            for (i, &ri) in rho.iter().enumerate() {
                if libm::fabs(ri) < 1e-14 {
                    continue;
                }
                for &(j, a) in &self.lp.rows[i] {
                    alpha[j] += ri * a;
                    if !seen[j] {
                        seen[j] = true;
                        touched.push(j);
                    }
                }
                alpha[n + i] = -ri;
                seen[n + i] = true;
                touched.push(n + i);
            }

            cands.clear();
            for &j in &touched {
                if self.pos[j] != NONE || self.lo[j] == self.up[j] {
                    continue;
                }
                let sa = s * alpha[j];
                let (eligible, dj) = if self.at_upper[j] { (sa < -PIVOT_TOL, -self.d[j]) } else { (sa > PIVOT_TOL, self.d[j]) };
                if eligible {
                    let a = libm::fabs(alpha[j]);
                    cands.push(Candidate { j, ratio: dj.max(0.0) / a, abs_alpha: a, slack: (dj.max(0.0) + DUAL_TOL) / a });
                }
            }
            if cands.is_empty() {
                return LpStatus::Infeasible;
            }

            let (q, flips) = if bland {
                let mut best = 0;
                for (k, c) in cands.iter().enumerate() {
                    let b = &cands[best];
                    if c.ratio < b.ratio - 1e-12 || (c.ratio <= b.ratio + 1e-12 && c.j < b.j) {
                        best = k;
                    }
                }
                (cands[best].j, 0)
            } else {
                // pass breakpoints while the dual objective keeps improving
                cands.sort_by(|a, b| a.ratio.total_cmp(&b.ratio));
                let mut slope = libm::fabs(self.x[p] - target);
                let mut k = 0;
                while k + 1 < cands.len() {
                    let c = &cands[k];
                    let next = slope - c.abs_alpha * (self.up[c.j] - self.lo[c.j]);
                    if next <= 0.0 {
                        break;
                    }
                    slope = next;
                    k += 1;
                }
                // Harris choice among the remaining breakpoints
                let bound = cands[k..].iter().map(|c| c.slack).fold(f64::INFINITY, f64::min);
                let mut best = k;
                for (i, c) in cands.iter().enumerate().skip(k) {
                    if c.ratio <= bound && c.abs_alpha > cands[best].abs_alpha {
                        best = i;
                    }
                }
                cands.swap(k, best);
                (cands[k].j, k)
            };
            let theta = cands.iter().find(|c| c.j == q).map_or(0.0, |c| c.ratio);

            let col_q = self.column(q);
            let mut dense = vec![0.0; m];
            for &(i, a) in &col_q {
                dense[i] = a;
            }
            let col = self.lu.ftran(&dense);
            if libm::fabs(col[r] - alpha[q]) > 1e-7 * (1.0 + libm::fabs(col[r])) || libm::fabs(col[r]) < 1e-12 {
                self.troubles += 1;
                self.refactor();
                self.recompute();
                continue;
            }

            if flips > 0 {
                let mut rhs = vec![0.0; m];
                for c in &cands[..flips] {
                    let j = c.j;
                    let (from, to) = if self.at_upper[j] { (self.up[j], self.lo[j]) } else { (self.lo[j], self.up[j]) };
                    let dv = to - from;
                    if j < n {
                        for &(i, a) in &self.lp.cols[j] {
                            rhs[i] -= a * dv;
                        }
                    } else {
                        rhs[j - n] += dv;
                    }
                    self.x[j] = to;
                    self.at_upper[j] = !self.at_upper[j];
                }
                let dx = self.lu.ftran(&rhs);
                for (k, &h) in self.head.iter().enumerate() {
                    self.x[h] += dx[k];
                }
            }

            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for &j in &touched {
                if self.pos[j] == NONE && alpha[j] != 0.0 {
                    self.d[j] -= s * theta * alpha[j];
                }
            }
            self.d[q] = 0.0;
            self.d[p] = -s * theta;

            let delta = (self.x[p] - target) / col[r];
            for (k, &h) in self.head.iter().enumerate() {
                if col[k] != 0.0 {
                    self.x[h] -= delta * col[k];
                }
            }
            self.x[q] += delta;
            self.x[p] = target;

            let ar = col[r];
            let wr = self.weight[r];
            for (k, w) in self.weight.iter_mut().enumerate() {
                if k != r && col[k] != 0.0 {
                    let ratio = col[k] / ar;
                    *w = w.max(ratio * ratio * wr);
                }
            }
            self.weight[r] = (wr / (ar * ar)).max(1.0);
            if self.weight[r] > 1e8 || self.weight.iter().any(|&w| w > 1e8) {
                self.weight.iter_mut().for_each(|w| *w = 1.0);
            }

            self.head[r] = q;
            self.pos[q] = r;
            self.pos[p] = NONE;
            self.at_upper[p] = s > 0.0;
            self.lu.push_eta(r, &col);
            self.iterations += 1;

            if self.lu.num_etas() >= REFACTOR_EVERY {
                self.refactor();
                self.recompute();
            }
        }
    }

    fn finish(&mut self) -> LpStatus {
        for j in 0..self.lp.n {
            let at_box_lo = self.lp.open_lower[j] && self.x[j] <= -INF_BOX * (1.0 - 1e-9);
            let at_box_up = self.lp.open_upper[j] && self.x[j] >= INF_BOX * (1.0 - 1e-9);
            if at_box_lo || at_box_up {
                return LpStatus::Unbounded;
            }
        }
        LpStatus::Optimal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{LinExpr, MilpModel};

    fn solve(model: &MilpModel) -> (LpStatus, f64, Vec<f64>) {
        let lp = StdLp::from_model(model);
        let mut s = Simplex::new(&lp, lp.lower.clone(), lp.upper.clone(), None);
        let st = s.solve(None);
        (st, s.objective(), s.structural_values())
    }

    #[test]
    fn two_variable_max() {
        // max 3x + 2y  s.t. x + y <= 4, x + 3y <= 6, x <= 3
        let mut m = MilpModel::new("t");
        let x = m.continuous("x", 0.0, f64::INFINITY);
        let y = m.continuous("y", 0.0, f64::INFINITY);
        m.add_constraint("a", LinExpr::var(x).term(y, 1.0), Cmp::Le, 4.0);
        m.add_constraint("b", LinExpr::var(x).term(y, 3.0), Cmp::Le, 6.0);
        m.add_constraint("c", LinExpr::var(x), Cmp::Le, 3.0);
        m.set_objective(ObjSense::Maximize, LinExpr::new().term(x, 3.0).term(y, 2.0));
        let (st, obj, v) = solve(&m);
        assert_eq!(st, LpStatus::Optimal);
        assert!((obj - 11.0).abs() < 1e-9, "{obj} {v:?}");
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut m = MilpModel::new("t");
        let x = m.continuous("x", 0.0, 10.0);
        m.add_constraint("a", LinExpr::var(x), Cmp::Le, 0.0);
        m.add_constraint("b", LinExpr::var(x), Cmp::Ge, 1.0);
        m.set_objective(ObjSense::Maximize, LinExpr::var(x));
        assert_eq!(solve(&m).0, LpStatus::Infeasible);

        let mut m = MilpModel::new("t");
        let x = m.continuous("x", 0.0, f64::INFINITY);
        let y = m.continuous("y", 0.0, f64::INFINITY);
        m.add_constraint("a", LinExpr::var(x).term(y, -1.0), Cmp::Le, 1.0);
        m.set_objective(ObjSense::Maximize, LinExpr::var(x));
        assert_eq!(solve(&m).0, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_and_minimization() {
        // min x + 2y + 3z  s.t. x + y + z = 6, y - z >= 1
        let mut m = MilpModel::new("t");
        let x = m.continuous("x", 0.0, 4.0);
        let y = m.continuous("y", 0.0, 10.0);
        let z = m.continuous("z", 0.0, 10.0);
        m.add_constraint("a", LinExpr::var(x).term(y, 1.0).term(z, 1.0), Cmp::Eq, 6.0);
        m.add_constraint("b", LinExpr::var(y).term(z, -1.0), Cmp::Ge, 1.0);
        m.set_objective(ObjSense::Minimize, LinExpr::var(x).term(y, 2.0).term(z, 3.0));
        let (st, obj, v) = solve(&m);
        assert_eq!(st, LpStatus::Optimal);
        assert!((obj - 8.0).abs() < 1e-9, "{obj} {v:?}");
    }
}
