//! Reductions applied before branch-and-bound LP solves.
//!
//! Only removals that keep integer solutions integer are performed: fixed
//! columns, singleton rows turned into bounds, redundant and forcing rows,
//! activity-based bound tightening on integer columns, and substitution of
//! `±x ± y = k` equalities.

use super::{Constraint, LinearProgram, Relation};

const TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
struct Subst {
    y: usize,
    x: usize,
    s: f64,
    k: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct Presolved {
    pub lp: LinearProgram,
    pub integer: Vec<bool>,
    pub offset: f64,
    col_of: Vec<usize>,
    lo: Vec<f64>,
    stack: Vec<Subst>,
}

impl Presolved {
    pub fn restore(&self, reduced: &[f64]) -> Vec<f64> {
        let mut x = self.lo.clone();
        for (k, &j) in self.col_of.iter().enumerate() {
            x[j] = reduced[k];
        }
        for sub in self.stack.iter().rev() {
            x[sub.y] = sub.s * x[sub.x] + sub.k;
        }
        x
    }
}

struct Work {
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    int: Vec<bool>,
    alive_col: Vec<bool>,
    rows: Vec<Constraint>,
    alive_row: Vec<bool>,
    col_rows: Vec<Vec<usize>>,
    offset: f64,
    stack: Vec<Subst>,
}

impl Work {
    fn set_lo(&mut self, j: usize, v: f64) -> Result<bool, ()> {
        let v = if self.int[j] { (v - 1e-6).ceil() } else { v };
        if v > self.hi[j] + 1e-7 {
            return Err(());
        }
        if v > self.lo[j] + TOL {
            self.lo[j] = v.min(self.hi[j]);
            return Ok(true);
        }
        Ok(false)
    }

    fn set_hi(&mut self, j: usize, v: f64) -> Result<bool, ()> {
        let v = if self.int[j] { (v + 1e-6).floor() } else { v };
        if v < self.lo[j] - 1e-7 {
            return Err(());
        }
        if v < self.hi[j] - TOL {
            self.hi[j] = v.max(self.lo[j]);
            return Ok(true);
        }
        Ok(false)
    }

    fn fixed(&self, j: usize) -> bool {
        self.hi[j] - self.lo[j] <= TOL
    }

    /// Folds fixed columns into the rhs and merges repeated entries.
    fn clean_row(&mut self, i: usize) {
        let mut b = self.rows[i].rhs;
        let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(self.rows[i].coeffs.len());
        let mut raw = std::mem::take(&mut self.rows[i].coeffs);
        raw.sort_by_key(|&(j, _)| j);
        for (j, a) in raw {
            if self.fixed(j) {
                b -= a * self.lo[j];
                continue;
            }
            match coeffs.last_mut() {
                Some((lj, la)) if *lj == j => *la += a,
                _ => coeffs.push((j, a)),
            }
        }
        coeffs.retain(|&(_, a)| a.abs() > 1e-12);
        self.rows[i].coeffs = coeffs;
        self.rows[i].rhs = b;
    }

    fn activity(&self, i: usize) -> (f64, f64) {
        let (mut mn, mut mx) = (0.0, 0.0);
        for &(j, a) in &self.rows[i].coeffs {
            if a > 0.0 {
                mn += a * self.lo[j];
                mx += a * self.hi[j];
            } else {
                mn += a * self.hi[j];
                mx += a * self.lo[j];
            }
        }
        (mn, mx)
    }

    fn row_pass(&mut self, i: usize) -> Result<bool, ()> {
        self.clean_row(i);
        let rel = self.rows[i].relation;
        let b = self.rows[i].rhs;
        let scale = 1.0 + b.abs();
        if self.rows[i].coeffs.is_empty() {
            let ok = match rel {
                Relation::Le => 0.0 <= b + 1e-7 * scale,
                Relation::Ge => 0.0 >= b - 1e-7 * scale,
                Relation::Eq => b.abs() <= 1e-7 * scale,
            };
            if !ok {
                return Err(());
            }
            self.alive_row[i] = false;
            return Ok(true);
        }
        if self.rows[i].coeffs.len() == 1 {
            let (j, a) = self.rows[i].coeffs[0];
            let v = b / a;
            match (rel, a > 0.0) {
                (Relation::Eq, _) => {
                    self.set_lo(j, v)?;
                    self.set_hi(j, v)?;
                    if self.int[j] && (v - v.round()).abs() > 1e-6 {
                        return Err(());
                    }
                }
                (Relation::Le, true) | (Relation::Ge, false) => {
                    self.set_hi(j, v)?;
                }
                (Relation::Le, false) | (Relation::Ge, true) => {
                    self.set_lo(j, v)?;
                }
            }
            self.alive_row[i] = false;
            return Ok(true);
        }
        let (mn, mx) = self.activity(i);
        let le = matches!(rel, Relation::Le | Relation::Eq);
        let ge = matches!(rel, Relation::Ge | Relation::Eq);
        if (le && mn > b + 1e-7 * scale) || (ge && mx < b - 1e-7 * scale) {
            return Err(());
        }
        let le_red = !le || mx <= b + TOL * scale;
        let ge_red = !ge || mn >= b - TOL * scale;
        if le_red && ge_red {
            self.alive_row[i] = false;
            return Ok(true);
        }
        // forcing rows pin every column to the bound that attains the extreme
        if (le && mn >= b - TOL * scale) || (ge && mx <= b + TOL * scale) {
            let at_min = le && mn >= b - TOL * scale;
            let coeffs = self.rows[i].coeffs.clone();
            for (j, a) in coeffs {
                let v = if (a > 0.0) == at_min { self.lo[j] } else { self.hi[j] };
                self.lo[j] = v;
                self.hi[j] = v;
            }
            self.alive_row[i] = false;
            return Ok(true);
        }
        let mut changed = false;
        if mn.is_finite() && le {
            let slack = b - mn;
            let coeffs = self.rows[i].coeffs.clone();
            for (j, a) in coeffs {
                if !self.int[j] {
                    continue;
                }
                if a > 0.0 {
                    changed |= self.set_hi(j, self.lo[j] + slack / a)?;
                } else {
                    changed |= self.set_lo(j, self.hi[j] + slack / a)?;
                }
            }
        }
        let (mn, mx) = self.activity(i);
        let _ = mn;
        if mx.is_finite() && ge {
            let surplus = mx - b;
            let coeffs = self.rows[i].coeffs.clone();
            for (j, a) in coeffs {
                if !self.int[j] {
                    continue;
                }
                if a > 0.0 {
                    changed |= self.set_lo(j, self.hi[j] - surplus / a)?;
                } else {
                    changed |= self.set_hi(j, self.lo[j] - surplus / a)?;
                }
            }
        }
        if rel == Relation::Eq && self.rows[i].coeffs.len() == 2 && self.try_substitute(i) {
            changed = true;
        }
        Ok(changed)
    }

    /// Eliminates one column of the equality `a1 x1 + a2 x2 = b`.
    fn try_substitute(&mut self, i: usize) -> bool {
        let (j1, a1) = self.rows[i].coeffs[0];
        let (j2, a2) = self.rows[i].coeffs[1];
        let b = self.rows[i].rhs;
        // eliminate the higher index, keep the lower one
        let (x, ax, y, ay) = if j1 < j2 { (j1, a1, j2, a2) } else { (j2, a2, j1, a1) };
        let s = -ax / ay;
        let k = b / ay;
        if self.int[y] {
            let unit = (s.abs() - 1.0).abs() < 1e-12;
            if !(self.int[x] && unit && (k - k.round()).abs() < 1e-9) {
                return false;
            }
        }
        // transfer y's bounds to x
        let (ylo, yhi) = (self.lo[y], self.hi[y]);
        let (nlo, nhi) = if s > 0.0 { ((ylo - k) / s, (yhi - k) / s) } else { ((yhi - k) / s, (ylo - k) / s) };
        if self.set_lo(x, nlo).is_err() || self.set_hi(x, nhi).is_err() {
            // leave infeasibility for the row pass to report
            return false;
        }
        self.cost[x] += self.cost[y] * s;
        self.offset += self.cost[y] * k;
        self.cost[y] = 0.0;
        self.alive_row[i] = false;
        let touched = std::mem::take(&mut self.col_rows[y]);
        for r in touched {
            if !self.alive_row[r] {
                continue;
            }
            let row = &mut self.rows[r];
            let mut ay_r = 0.0;
            row.coeffs.retain(|&(j, a)| {
                if j == y {
                    ay_r += a;
                    false
                } else {
                    true
                }
            });
            if ay_r != 0.0 {
                row.coeffs.push((x, ay_r * s));
                row.rhs -= ay_r * k;
                self.col_rows[x].push(r);
            }
        }
        self.alive_col[y] = false;
        self.lo[y] = 0.0;
        self.hi[y] = 0.0;
        self.stack.push(Subst { y, x, s, k });
        true
    }
}

/// Returns `None` when the reductions prove infeasibility.
pub(crate) fn presolve(lp: &LinearProgram, integer: &[bool]) -> Option<Presolved> {
    let n = lp.num_vars();
    let mut w = Work {
        lo: lp.lower.clone(),
        hi: lp.upper.clone(),
        cost: lp.objective.clone(),
        int: integer.to_vec(),
        alive_col: vec![true; n],
        rows: lp.constraints.clone(),
        alive_row: vec![true; lp.num_constraints()],
        col_rows: vec![Vec::new(); n],
        offset: 0.0,
        stack: Vec::new(),
    };
    for j in 0..n {
        if w.int[j] {
            w.lo[j] = if w.lo[j].is_finite() { (w.lo[j] - 1e-6).ceil() } else { w.lo[j] };
            w.hi[j] = if w.hi[j].is_finite() { (w.hi[j] + 1e-6).floor() } else { w.hi[j] };
        }
        if w.lo[j] > w.hi[j] + 1e-7 {
            return None;
        }
    }
    for (i, row) in w.rows.iter().enumerate() {
        for &(j, _) in &row.coeffs {
            w.col_rows[j].push(i);
        }
    }
    for _pass in 0..50 {
        let mut changed = false;
        for i in 0..w.rows.len() {
            if !w.alive_row[i] {
                continue;
            }
            match w.row_pass(i) {
                Ok(c) => changed |= c,
                Err(()) => return None,
            }
        }
        if !changed {
            break;
        }
    }
    for i in 0..w.rows.len() {
        if w.alive_row[i] {
            w.clean_row(i);
        }
    }

    let mut new_idx = vec![usize::MAX; n];
    let mut col_of = Vec::new();
    for j in 0..n {
        if w.alive_col[j] && !w.fixed(j) {
            new_idx[j] = col_of.len();
            col_of.push(j);
        } else if w.alive_col[j] {
            w.offset += w.cost[j] * w.lo[j];
        }
    }
    let mut red = LinearProgram::with_vars(col_of.len());
    for (k, &j) in col_of.iter().enumerate() {
        red.objective[k] = w.cost[j];
        red.lower[k] = w.lo[j];
        red.upper[k] = w.hi[j];
    }
    for i in 0..w.rows.len() {
        if !w.alive_row[i] {
            continue;
        }
        let row = &w.rows[i];
        let coeffs = row.coeffs.iter().map(|&(j, a)| (new_idx[j], a)).collect();
        red.add_constraint(coeffs, row.relation, row.rhs);
    }
    let ints = col_of.iter().map(|&j| w.int[j]).collect();
    Some(Presolved { lp: red, integer: ints, offset: w.offset, col_of, lo: w.lo, stack: w.stack })
}
