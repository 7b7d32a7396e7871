//! Bounded dual simplex on a sparse revised basis, kept warm across bound changes.
//!
//! Every row gets a logical `r_i = a_i·x` carrying the row's bounds, so the
//! constraint matrix is `[A, −I]` and the slack basis is always available as
//! a restart point. The basis inverse is held in product form on top of the
//! slack basis and rebuilt every few dozen pivots. Node solves in
//! branch-and-bound only move bounds, which leaves the current basis dual
//! feasible.

use super::{LinearProgram, Relation};

const PRIMAL_TOL: f64 = 1e-7;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;
/// Pivots between rebuilds of the basis inverse.
const REFACTOR_EVERY: usize = 80;
/// Consecutive zero-step pivots before costs are shifted.
const DEGENERATE_RUN: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum At {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free column held at zero.
    Zero,
}

#[derive(Debug)]
pub(crate) enum DualResult {
    /// Primal solution and a lower bound from the true reduced costs.
    Optimal(Vec<f64>, f64),
    Infeasible,
    /// The dual objective reached the cutoff before primal feasibility.
    Cutoff,
    Failed,
}

/// Elementary column transform: pivot `piv` at position `r`, other entries in `col`.
struct Eta {
    r: usize,
    piv: f64,
    col: Vec<(usize, f64)>,
}

pub(crate) struct DualSimplex {
    m: usize,
    n: usize,
    w: usize,
    cols: Vec<Vec<(usize, f64)>>,
    rows: Vec<Vec<(usize, f64)>>,
    etas: Vec<Eta>,
    /// Etas produced by the last rebuild.
    base_etas: usize,
    basis: Vec<usize>,
    at: Vec<At>,
    x: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    /// Cost shifts applied against dual degeneracy, removed before returning.
    shift: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    base_lo: Vec<f64>,
    base_hi: Vec<f64>,
    pub iterations: usize,
}

fn jitter(j: usize) -> f64 {
    let mut h = (j as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^= h >> 31;
    0.5 + 0.5 * (h >> 11) as f64 / (1u64 << 53) as f64
}

impl DualSimplex {
    /// `None` when a cost points at an infinite bound, so the slack basis is not dual feasible.
    pub fn new(lp: &LinearProgram) -> Option<Self> {
        let (n, m) = (lp.num_vars(), lp.num_constraints());
        let w = n + m;
        for j in 0..n {
            let c = lp.objective[j];
            if (c > 0.0 && lp.lower[j] == f64::NEG_INFINITY) || (c < 0.0 && lp.upper[j] == f64::INFINITY) {
                return None;
            }
        }
        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        let mut rows = Vec::with_capacity(m);
        let mut cols = vec![Vec::new(); n];
        for (i, row) in lp.constraints.iter().enumerate() {
            let (l, h) = match row.relation {
                Relation::Le => (f64::NEG_INFINITY, row.rhs),
                Relation::Ge => (row.rhs, f64::INFINITY),
                Relation::Eq => (row.rhs, row.rhs),
            };
            lo.push(l);
            hi.push(h);
            let mut merged: Vec<(usize, f64)> = row.coeffs.clone();
            merged.sort_by_key(|e| e.0);
            merged.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            merged.retain(|e| e.1 != 0.0);
            for &(j, a) in &merged {
                cols[j].push((i, a));
            }
            rows.push(merged);
        }
        let mut cost = lp.objective.clone();
        cost.resize(w, 0.0);
        let mut s = Self {
            m,
            n,
            w,
            cols,
            rows,
            etas: Vec::new(),
            base_etas: 0,
            basis: Vec::new(),
            at: Vec::new(),
            x: vec![0.0; w],
            d: Vec::new(),
            cost,
            shift: vec![0.0; w],
            base_lo: lo.clone(),
            base_hi: hi.clone(),
            lo,
            hi,
            iterations: 0,
        };
        s.reset_basis();
        Some(s)
    }

    fn reset_basis(&mut self) {
        let (n, w) = (self.n, self.w);
        self.etas.clear();
        self.base_etas = 0;
        self.basis = (n..w).collect();
        self.at = (0..w).map(|j| if j < n { At::Lower } else { At::Basic }).collect();
        self.d = self.cost.clone();
        self.shift.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Scatters column `j` of `[A, −I]` into the dense row-space vector `v`.
    fn scatter(&self, j: usize, scale: f64, v: &mut [f64]) {
        if j < self.n {
            for &(i, a) in &self.cols[j] {
                v[i] += scale * a;
            }
        } else {
            v[j - self.n] -= scale;
        }
    }

    /// `v ← B⁻¹ v`, row space in, basis positions out.
    fn ftran(&self, v: &mut [f64]) {
        v.iter_mut().for_each(|e| *e = -*e);
        for eta in &self.etas {
            let vr = v[eta.r];
            if vr == 0.0 {
                continue;
            }
            let vr = vr / eta.piv;
            v[eta.r] = vr;
            for &(i, a) in &eta.col {
                v[i] -= a * vr;
            }
        }
    }

    /// `v ← (vᵀ B⁻¹)ᵀ`, basis positions in, row space out.
    fn btran(&self, v: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = v[eta.r];
            for &(i, a) in &eta.col {
                s -= a * v[i];
            }
            v[eta.r] = s / eta.piv;
        }
        v.iter_mut().for_each(|e| *e = -*e);
    }

    fn push_eta(&mut self, r: usize, y: &[f64]) {
        let col = y
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != r && a.abs() > DROP_TOL)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta { r, piv: y[r], col });
    }

    /// Rebuilds the product form for the current basis set. `false` if singular.
    fn reinvert(&mut self) -> bool {
        let (n, m) = (self.n, self.m);
        let mut in_basis = vec![false; self.w];
        for &b in &self.basis {
            in_basis[b] = true;
        }
        let mut structs: Vec<usize> = self.basis.iter().copied().filter(|&b| b < n).collect();
        structs.sort_by_key(|&j| (self.cols[j].len(), j));
        self.etas.clear();
        let mut pos: Vec<usize> = (n..n + m).collect();
        let mut open: Vec<bool> = (0..m).map(|i| !in_basis[n + i]).collect();
        let mut y = vec![0.0; m];
        let mut mark = vec![false; m];
        let mut nz: Vec<usize> = Vec::new();
        for q in structs {
            for &i in &nz {
                y[i] = 0.0;
                mark[i] = false;
            }
            nz.clear();
            for &(i, a) in &self.cols[q] {
                y[i] -= a;
                if !mark[i] {
                    mark[i] = true;
                    nz.push(i);
                }
            }
            // sparse ftran: the slack inverse is −I, already applied above
            for eta in &self.etas {
                let vr = y[eta.r];
                if vr == 0.0 {
                    continue;
                }
                let vr = vr / eta.piv;
                y[eta.r] = vr;
                for &(i, a) in &eta.col {
                    y[i] -= a * vr;
                    if !mark[i] {
                        mark[i] = true;
                        nz.push(i);
                    }
                }
            }
            let mut best = (usize::MAX, 1e-8);
            for &i in &nz {
                if open[i] && y[i].abs() > best.1 {
                    best = (i, y[i].abs());
                }
            }
            let r = best.0;
            if r == usize::MAX {
                return false;
            }
            let col = nz.iter().filter(|&&i| i != r && y[i].abs() > DROP_TOL).map(|&i| (i, y[i])).collect();
            self.etas.push(Eta { r, piv: y[r], col });
            pos[r] = q;
            open[r] = false;
        }
        self.basis = pos;
        self.base_etas = self.etas.len();
        true
    }

    /// Resets column bounds to the base program, then applies `(j, lo, hi)` tightenings.
    pub fn set_bounds(&mut self, changes: &[(usize, f64, f64)]) {
        self.lo.copy_from_slice(&self.base_lo);
        self.hi.copy_from_slice(&self.base_hi);
        for &(j, l, h) in changes {
            self.lo[j] = self.lo[j].max(l);
            self.hi[j] = self.hi[j].min(h);
        }
    }

    /// Moves nonbasic columns to the bound their reduced cost asks for.
    fn place(&mut self) -> bool {
        for j in 0..self.w {
            if self.at[j] == At::Basic {
                continue;
            }
            let (l, h, dj) = (self.lo[j], self.hi[j], self.d[j]);
            let side = if dj > DUAL_TOL {
                At::Lower
            } else if dj < -DUAL_TOL {
                At::Upper
            } else if self.at[j] == At::Upper && h.is_finite() {
                At::Upper
            } else if l.is_finite() {
                At::Lower
            } else if h.is_finite() {
                At::Upper
            } else {
                At::Zero
            };
            let v = match side {
                At::Lower => l,
                At::Upper => h,
                _ => 0.0,
            };
            if !v.is_finite() {
                return false;
            }
            self.at[j] = side;
            self.x[j] = v;
        }
        true
    }

    fn recompute_primal(&mut self) {
        let mut v = vec![0.0; self.m];
        for j in 0..self.w {
            if self.at[j] != At::Basic && self.x[j] != 0.0 {
                self.scatter(j, self.x[j], &mut v);
            }
        }
        self.ftran(&mut v);
        for (p, &b) in self.basis.iter().enumerate() {
            self.x[b] = -v[p];
        }
    }

    /// Reduced costs for `cost + shift`.
    fn recompute_duals(&mut self) {
        let mut y: Vec<f64> = self.basis.iter().map(|&b| self.cost[b] + self.shift[b]).collect();
        self.btran(&mut y);
        for j in 0..self.w {
            self.d[j] = if self.at[j] == At::Basic {
                0.0
            } else if j < self.n {
                self.cost[j] + self.shift[j] - self.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>()
            } else {
                self.shift[j] + y[j - self.n]
            };
        }
    }

    fn refresh(&mut self) -> bool {
        if !self.reinvert() {
            return false;
        }
        self.recompute_primal();
        self.recompute_duals();
        true
    }

    fn leaving(&self) -> Option<usize> {
        let mut best = PRIMAL_TOL;
        let mut r = None;
        for (p, &b) in self.basis.iter().enumerate() {
            let v = self.x[b];
            let inf = (self.lo[b] - v).max(v - self.hi[b]);
            if inf > best * (1.0 + v.abs().min(1e3)) {
                best = inf;
                r = Some(p);
            }
        }
        r
    }

    fn shift_costs(&mut self) {
        for j in 0..self.n {
            let (l, h) = (self.lo[j], self.hi[j]);
            if !(l.is_finite() && h.is_finite()) || l == h {
                continue;
            }
            let e = 1e-6 * (1.0 + self.cost[j].abs()) * jitter(j);
            let e = match self.at[j] {
                At::Lower => e,
                At::Upper => -e,
                _ => continue,
            };
            self.d[j] += e;
            self.shift[j] += e;
        }
    }

    /// Largest change in `c·x` over the box caused by the shifts.
    fn shift_error(&self) -> f64 {
        (0..self.n)
            .filter(|&j| self.shift[j] != 0.0)
            .map(|j| self.shift[j].abs() * self.lo[j].abs().max(self.hi[j].abs()))
            .sum()
    }

    fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    /// Drops the shifts, recomputes `d` from the true costs, and returns the
    /// Lagrangian bound of the current basis over the box.
    fn finish(&mut self) -> f64 {
        self.shift.iter_mut().for_each(|v| *v = 0.0);
        self.recompute_duals();
        let mut bound = self.objective();
        for j in 0..self.w {
            let dj = self.d[j];
            let (l, h) = (self.lo[j], self.hi[j]);
            let loss = match self.at[j] {
                At::Lower if dj < 0.0 => -dj * (h - l),
                At::Upper if dj > 0.0 => dj * (h - l),
                At::Zero if dj != 0.0 => f64::INFINITY,
                _ => 0.0,
            };
            bound -= loss;
        }
        bound
    }

    /// Solves from the current basis, stopping once the dual bound reaches `cutoff`.
    pub fn solve(&mut self, cutoff: f64, iter_limit: usize) -> DualResult {
        if (0..self.n).any(|j| self.lo[j] > self.hi[j] + PRIMAL_TOL) {
            return DualResult::Infeasible;
        }
        if !self.place() {
            self.reset_basis();
            if !self.place() {
                return DualResult::Failed;
            }
        }
        self.recompute_primal();
        let (m, w) = (self.m, self.w);
        let mut fresh = true;
        let mut degenerate = 0usize;
        let mut slack = 0.0;
        let mut rho = vec![0.0; m];
        let mut alpha = vec![0.0; w];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; w];
        let mut col = vec![0.0; m];
        for _ in 0..iter_limit {
            let Some(r) = self.leaving() else {
                if fresh {
                    let bound = self.finish();
                    return DualResult::Optimal(self.x[..self.n].to_vec(), bound);
                }
                if !self.refresh() {
                    return self.fail();
                }
                fresh = true;
                continue;
            };
            fresh = false;
            let b = self.basis[r];
            let below = self.x[b] < self.lo[b];

            // pivot row of B⁻¹[A, −I]
            rho.iter_mut().for_each(|e| *e = 0.0);
            rho[r] = 1.0;
            self.btran(&mut rho);
            for &j in &touched {
                alpha[j] = 0.0;
                mark[j] = false;
            }
            touched.clear();
            for (i, &ri) in rho.iter().enumerate() {
                if ri.abs() <= DROP_TOL {
                    continue;
                }
                for &(j, a) in &self.rows[i] {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    alpha[j] += ri * a;
                }
                let j = self.n + i;
                if !mark[j] {
                    mark[j] = true;
                    touched.push(j);
                }
                alpha[j] -= ri;
            }

            // Harris two-pass ratio test
            let eligible = |j: usize| -> Option<f64> {
                let a = alpha[j];
                if a.abs() <= PIVOT_TOL || self.lo[j] == self.hi[j] {
                    return None;
                }
                let s = if below { -a } else { a };
                match self.at[j] {
                    At::Lower if s > 0.0 => Some(a),
                    At::Upper if s < 0.0 => Some(a),
                    At::Zero => Some(a),
                    _ => None,
                }
            };
            let mut tmax = f64::INFINITY;
            for &j in &touched {
                if let Some(a) = eligible(j) {
                    tmax = tmax.min((self.d[j].abs() + DUAL_TOL) / a.abs());
                }
            }
            if tmax == f64::INFINITY {
                self.finish();
                return DualResult::Infeasible;
            }
            let mut q = usize::MAX;
            let mut best = 0.0;
            for &j in &touched {
                if let Some(a) = eligible(j) {
                    if self.d[j].abs() / a.abs() <= tmax && a.abs() > best {
                        best = a.abs();
                        q = j;
                    }
                }
            }

            col.iter_mut().for_each(|e| *e = 0.0);
            self.scatter(q, 1.0, &mut col);
            self.ftran(&mut col);
            let aq = col[r];
            if (aq - alpha[q]).abs() > 1e-6 * (1.0 + aq.abs()) || aq.abs() <= PIVOT_TOL {
                // row and column disagree: rebuild and retry
                if !self.refresh() {
                    return self.fail();
                }
                fresh = true;
                continue;
            }
            let theta = self.d[q] / aq;
            let target = if below { self.lo[b] } else { self.hi[b] };
            let step = (self.x[b] - target) / aq;
            for (p, &cp) in col.iter().enumerate() {
                if cp != 0.0 {
                    self.x[self.basis[p]] -= cp * step;
                }
            }
            self.x[q] += step;
            if theta != 0.0 {
                for &j in &touched {
                    self.d[j] -= theta * alpha[j];
                }
            }
            self.d[q] = 0.0;
            self.d[b] = -theta;
            self.push_eta(r, &col);
            self.basis[r] = q;
            self.at[q] = At::Basic;
            self.at[b] = if below { At::Lower } else { At::Upper };
            self.x[b] = target;
            for &j in &touched {
                match self.at[j] {
                    At::Lower if self.d[j] < 0.0 => self.d[j] = 0.0,
                    At::Upper if self.d[j] > 0.0 => self.d[j] = 0.0,
                    _ => {}
                }
            }
            self.iterations += 1;
            if theta.abs() > 1e-12 {
                degenerate = 0;
            } else {
                degenerate += 1;
                if degenerate == DEGENERATE_RUN {
                    self.shift_costs();
                    slack = self.shift_error();
                }
            }
            if self.etas.len() - self.base_etas >= REFACTOR_EVERY && !self.refresh() {
                return self.fail();
            }
            let z: f64 = self.objective() + (0..self.n).map(|j| self.shift[j] * self.x[j]).sum::<f64>();
            if z - slack >= cutoff {
                self.finish();
                return DualResult::Cutoff;
            }
        }
        self.finish();
        DualResult::Failed
    }

    fn fail(&mut self) -> DualResult {
        self.reset_basis();
        DualResult::Failed
    }

    /// Drops the warm basis, for use after a numerically poor solve.
    pub fn restart(&mut self) {
        self.reset_basis();
    }
}
