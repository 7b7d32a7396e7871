//! Dense bounded-variable primal simplex.
//!
//! Variables are shifted so every column lives in `[0, u]` with `u` possibly
//! infinite; nonbasic columns sit at either bound. Phase 1 minimizes the sum
//! of artificials, phase 2 the real objective. Reduced-cost rows for both
//! phases are carried through every pivot so no recomputation is needed.

use super::{LinearProgram, Relation, Solution, Status};

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    pub max_pivots: usize,
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_pivots: 1_000_000, feas_tol: 1e-7, opt_tol: 1e-9, pivot_tol: 1e-9 }
    }
}

#[derive(Clone, Copy)]
enum ColMap {
    Shift(usize, f64),
    Neg(usize, f64),
    Split(usize, usize),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum At {
    Lower,
    Upper,
    Basic,
}

struct Tableau {
    m: usize,
    nc: usize,
    t: Vec<f64>,
    xb: Vec<f64>,
    basis: Vec<usize>,
    at: Vec<At>,
    ub: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    blocked: Vec<bool>,
    iterations: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Limit,
}

impl Tableau {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.nc..(i + 1) * self.nc]
    }

    fn value_of(&self, j: usize) -> f64 {
        match self.at[j] {
            At::Lower => 0.0,
            At::Upper => self.ub[j],
            At::Basic => {
                let r = self.basis.iter().position(|&b| b == j).unwrap();
                self.xb[r]
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize, phase1: bool) {
        let nc = self.nc;
        let piv = self.t[r * nc + q];
        let inv = 1.0 / piv;
        {
            let row = &mut self.t[r * nc..(r + 1) * nc];
            for v in row.iter_mut() {
                *v *= inv;
            }
            row[q] = 1.0;
        }
        let nz: Vec<usize> = (0..nc).filter(|&j| self.t[r * nc + j] != 0.0).collect();
        let prow: Vec<f64> = nz.iter().map(|&j| self.t[r * nc + j]).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + q];
            if f == 0.0 {
                continue;
            }
            let base = i * nc;
            for (k, &j) in nz.iter().enumerate() {
                let v = &mut self.t[base + j];
                *v -= f * prow[k];
                if v.abs() < 1e-13 {
                    *v = 0.0;
                }
            }
            self.t[base + q] = 0.0;
        }
        let f2 = self.d2[q];
        if f2 != 0.0 {
            for (k, &j) in nz.iter().enumerate() {
                self.d2[j] -= f2 * prow[k];
            }
            self.d2[q] = 0.0;
        }
        if phase1 {
            let f1 = self.d1[q];
            if f1 != 0.0 {
                for (k, &j) in nz.iter().enumerate() {
                    self.d1[j] -= f1 * prow[k];
                }
                self.d1[q] = 0.0;
            }
        }
    }

    fn run(&mut self, phase1: bool, opts: &SimplexOptions, bland_after: usize) -> Step {
        loop {
            if self.iterations >= opts.max_pivots {
                return Step::Limit;
            }
            let bland = self.iterations >= bland_after;
            let d = if phase1 { &self.d1 } else { &self.d2 };
            let mut enter: Option<usize> = None;
            let mut best = 0.0;
            for j in 0..self.nc {
                if self.blocked[j] || self.ub[j] <= 0.0 {
                    continue;
                }
                let score = match self.at[j] {
                    At::Lower if d[j] < -opts.opt_tol => -d[j],
                    At::Upper if d[j] > opts.opt_tol => d[j],
                    _ => continue,
                };
                if bland {
                    enter = Some(j);
                    break;
                }
                if score > best {
                    best = score;
                    enter = Some(j);
                }
            }
            let Some(q) = enter else { return Step::Optimal };
            let dir = if self.at[q] == At::Lower { 1.0 } else { -1.0 };

            // ratio test, ties by larger pivot then lowest basic index
            let mut theta = f64::INFINITY;
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_piv = 0.0;
            for i in 0..self.m {
                let a = self.t[i * self.nc + q] * dir;
                let (ratio, to_upper) = if a > opts.pivot_tol {
                    ((self.xb[i] / a).max(0.0), false)
                } else if a < -opts.pivot_tol {
                    let u = self.ub[self.basis[i]];
                    if u.is_infinite() {
                        continue;
                    }
                    (((u - self.xb[i]) / -a).max(0.0), true)
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((li, _)) => {
                        if ratio < theta - 1e-12 {
                            true
                        } else if ratio <= theta + 1e-12 {
                            if bland {
                                self.basis[i] < self.basis[li]
                            } else {
                                a.abs() > leave_piv + 1e-12
                                    || (a.abs() >= leave_piv - 1e-12 && self.basis[i] < self.basis[li])
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = ratio.min(theta);
                    leave = Some((i, to_upper));
                    leave_piv = a.abs();
                }
            }
            let uq = self.ub[q];
            if uq <= theta {
                // bound flip
                if uq.is_infinite() {
                    return Step::Unbounded;
                }
                for i in 0..self.m {
                    let a = self.t[i * self.nc + q];
                    if a != 0.0 {
                        self.xb[i] -= dir * uq * a;
                    }
                }
                self.at[q] = if dir > 0.0 { At::Upper } else { At::Lower };
                self.iterations += 1;
                continue;
            }
            let Some((r, to_upper)) = leave else { return Step::Unbounded };
            for i in 0..self.m {
                let a = self.t[i * self.nc + q];
                if a != 0.0 {
                    self.xb[i] -= dir * theta * a;
                }
            }
            let entering_value = if dir > 0.0 { theta } else { uq - theta };
            let l = self.basis[r];
            self.at[l] = if to_upper { At::Upper } else { At::Lower };
            self.at[q] = At::Basic;
            self.basis[r] = q;
            self.xb[r] = entering_value;
            self.pivot(r, q, phase1);
            self.iterations += 1;
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Solution {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SimplexOptions) -> Solution {
    if let Err(e) = lp.validate() {
        panic!("{e}");
    }
    let n = lp.num_vars();
    let m = lp.num_constraints();
    if (0..n).any(|j| lp.lower[j] > lp.upper[j] + opts.feas_tol) {
        return Solution::bare(Status::Infeasible, n);
    }

    let mut maps = Vec::with_capacity(n);
    let mut ub = Vec::new();
    let mut cost = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lp.lower[j], lp.upper[j].max(lp.lower[j]));
        let c = lp.objective[j];
        if lo.is_finite() {
            maps.push(ColMap::Shift(ub.len(), lo));
            ub.push(hi - lo);
            cost.push(c);
        } else if hi.is_finite() {
            maps.push(ColMap::Neg(ub.len(), hi));
            ub.push(f64::INFINITY);
            cost.push(-c);
        } else {
            maps.push(ColMap::Split(ub.len(), ub.len() + 1));
            ub.extend([f64::INFINITY, f64::INFINITY]);
            cost.extend([c, -c]);
        }
    }
    let ns = ub.len();

    // dense rows over structural columns, shifted rhs
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for row in &lp.constraints {
        let mut dense = vec![0.0; ns];
        let mut b = row.rhs;
        for &(j, a) in &row.coeffs {
            match maps[j] {
                ColMap::Shift(c, lo) => {
                    dense[c] += a;
                    b -= a * lo;
                }
                ColMap::Neg(c, hi) => {
                    dense[c] -= a;
                    b -= a * hi;
                }
                ColMap::Split(p, q) => {
                    dense[p] += a;
                    dense[q] -= a;
                }
            }
        }
        rows.push(dense);
        rhs.push(b);
    }

    let num_slack = lp.constraints.iter().filter(|r| r.relation != Relation::Eq).count();
    let mut flip = vec![1.0; m];
    let mut slack_col = vec![usize::MAX; m];
    let mut slack_sign = vec![0.0; m];
    let mut next = ns;
    for (i, row) in lp.constraints.iter().enumerate() {
        match row.relation {
            Relation::Le => {
                slack_col[i] = next;
                slack_sign[i] = 1.0;
                next += 1;
            }
            Relation::Ge => {
                slack_col[i] = next;
                slack_sign[i] = -1.0;
                next += 1;
            }
            Relation::Eq => {}
        }
        if rhs[i] < 0.0 {
            flip[i] = -1.0;
        }
    }
    let mut needs_art = vec![false; m];
    for i in 0..m {
        needs_art[i] = slack_col[i] == usize::MAX || slack_sign[i] * flip[i] < 0.0;
    }
    let num_art = needs_art.iter().filter(|&&b| b).count();
    let nc = ns + num_slack + num_art;

    let mut tab = Tableau {
        m,
        nc,
        t: vec![0.0; m * nc],
        xb: vec![0.0; m],
        basis: vec![0; m],
        at: vec![At::Lower; nc],
        ub: vec![f64::INFINITY; nc],
        d1: vec![0.0; nc],
        d2: vec![0.0; nc],
        blocked: vec![false; nc],
        iterations: 0,
    };
    tab.ub[..ns].copy_from_slice(&ub);
    tab.d2[..ns].copy_from_slice(&cost);
    let mut init_col = vec![0; m];
    let mut art = ns + num_slack;
    let mut is_art = vec![false; nc];
    for i in 0..m {
        let f = flip[i];
        let base = i * nc;
        for (j, &a) in rows[i].iter().enumerate() {
            tab.t[base + j] = f * a;
        }
        if slack_col[i] != usize::MAX {
            tab.t[base + slack_col[i]] = f * slack_sign[i];
        }
        tab.xb[i] = f * rhs[i];
        if needs_art[i] {
            tab.t[base + art] = 1.0;
            init_col[i] = art;
            is_art[art] = true;
            art += 1;
        } else {
            init_col[i] = slack_col[i];
        }
        tab.basis[i] = init_col[i];
        tab.at[init_col[i]] = At::Basic;
    }

    let bland_after = 2 * (m + nc);
    if num_art > 0 {
        for i in 0..m {
            if needs_art[i] {
                let base = i * nc;
                for j in 0..nc {
                    if !is_art[j] {
                        tab.d1[j] -= tab.t[base + j];
                    }
                }
            }
        }
        match tab.run(true, opts, bland_after) {
            Step::Limit => {
                let mut s = Solution::bare(Status::IterationLimit, n);
                s.iterations = tab.iterations;
                return s;
            }
            // phase 1 is bounded below by zero
            Step::Unbounded | Step::Optimal => {}
        }
        let infeas: f64 = (0..m).filter(|&i| is_art[tab.basis[i]]).map(|i| tab.xb[i]).sum();
        if infeas > opts.feas_tol {
            let mut s = Solution::bare(Status::Infeasible, n);
            s.iterations = tab.iterations;
            return s;
        }
        for r in 0..m {
            if !is_art[tab.basis[r]] {
                continue;
            }
            let mut best: Option<usize> = None;
            let mut mag = 1e-7;
            for j in 0..nc {
                if is_art[j] || tab.at[j] == At::Basic {
                    continue;
                }
                let a = tab.row(r)[j].abs();
                if a > mag {
                    mag = a;
                    best = Some(j);
                }
            }
            if let Some(q) = best {
                let val = tab.value_of(q);
                let l = tab.basis[r];
                tab.at[l] = At::Lower;
                tab.at[q] = At::Basic;
                tab.basis[r] = q;
                tab.xb[r] = val;
                tab.pivot(r, q, false);
            }
        }
        for j in 0..nc {
            if is_art[j] {
                tab.blocked[j] = true;
                tab.ub[j] = 0.0;
            }
        }
    }

    let status = match tab.run(false, opts, bland_after) {
        Step::Optimal => Status::Optimal,
        Step::Unbounded => Status::Unbounded,
        Step::Limit => Status::IterationLimit,
    };
    if status != Status::Optimal {
        let mut s = Solution::bare(status, n);
        s.iterations = tab.iterations;
        return s;
    }

    let mut colval = vec![0.0; nc];
    for j in 0..nc {
        colval[j] = match tab.at[j] {
            At::Lower => 0.0,
            At::Upper => tab.ub[j],
            At::Basic => 0.0,
        };
    }
    for (i, &b) in tab.basis.iter().enumerate() {
        colval[b] = tab.xb[i];
    }
    let mut values: Vec<f64> = maps
        .iter()
        .map(|&mp| match mp {
            ColMap::Shift(c, lo) => lo + colval[c],
            ColMap::Neg(c, hi) => hi - colval[c],
            ColMap::Split(p, q) => colval[p] - colval[q],
        })
        .collect();
    for j in 0..n {
        let v = &mut values[j];
        if *v < lp.lower[j] && *v > lp.lower[j] - opts.feas_tol {
            *v = lp.lower[j];
        }
        if *v > lp.upper[j] && *v < lp.upper[j] + opts.feas_tol {
            *v = lp.upper[j];
        }
        if v.abs() < 1e-12 {
            *v = 0.0;
        }
    }

    let duals: Vec<f64> = (0..m).map(|i| -flip[i] * tab.d2[init_col[i]]).collect();
    let mut reduced = lp.objective.clone();
    for (row, &y) in lp.constraints.iter().zip(&duals) {
        for &(j, a) in &row.coeffs {
            reduced[j] -= a * y;
        }
    }

    Solution {
        status,
        objective_value: lp.objective_at(&values),
        values,
        duals,
        reduced_costs: reduced,
        iterations: tab.iterations,
        best_bound: f64::NAN,
        nodes: 0,
    }
}
