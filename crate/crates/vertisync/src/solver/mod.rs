//! Linear and integer programming core.
//!
//! Dense two-phase primal simplex with implicit variable bounds, a small
//! presolve, and best-first branch-and-bound on LP relaxations. Node
//! relaxations go through a sparse bounded dual simplex that keeps its basis
//! between nodes.

mod bnb;
mod dual;
mod lpformat;
mod presolve;
mod simplex;

pub use bnb::{solve_ilp, solve_ilp_with, IlpOptions};
pub use lpformat::write_lp;
pub use simplex::{solve_lp, solve_lp_with, SimplexOptions};

use thiserror::Error;

/// Row relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// One linear row stored sparsely as `(variable, coefficient)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize c·x` subject to rows and per-variable bounds `lo ≤ x ≤ hi`.
///
/// Bounds may be infinite. New variables default to `[0, ∞)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_vars(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lo);
        self.upper.push(hi);
        self.objective.len() - 1
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.constraints {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.relation {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(SolverError::Malformed("bound vectors do not match objective".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(SolverError::Malformed("non-finite objective coefficient".into()));
        }
        for (j, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(SolverError::Malformed(format!("bad bounds on variable {j}")));
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(SolverError::Malformed(format!("row {i} has non-finite rhs")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n || !a.is_finite() {
                    return Err(SolverError::Malformed(format!("row {i} references bad column {j}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Result of an LP or ILP solve.
///
/// For LP solves `duals` holds one multiplier per row and `reduced_costs`
/// one entry per variable, so that `c = Aᵀy + d`.
#[derive(Clone, Debug)]
pub struct Solution {
    pub status: Status,
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    /// Branch-and-bound only: proven lower bound and explored nodes.
    pub best_bound: f64,
    pub nodes: usize,
}

impl Solution {
    fn bare(status: Status, n: usize) -> Self {
        Self {
            status,
            values: vec![0.0; n],
            objective_value: f64::NAN,
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            iterations: 0,
            best_bound: f64::NAN,
            nodes: 0,
        }
    }

    /// Relative optimality gap of a branch-and-bound result.
    pub fn gap(&self) -> f64 {
        if self.status != Status::Optimal || !self.best_bound.is_finite() {
            return 0.0;
        }
        let denom = self.objective_value.abs().max(1e-9);
        ((self.objective_value - self.best_bound) / denom).max(0.0)
    }

    /// Checks primal feasibility, dual sign conditions and complementary slackness.
    pub fn check_certificate(&self, lp: &LinearProgram, tol: f64) -> Result<(), String> {
        if self.status != Status::Optimal {
            return Err(format!("status {:?}", self.status));
        }
        if self.duals.len() != lp.num_constraints() || self.reduced_costs.len() != lp.num_vars() {
            return Err("missing dual information".into());
        }
        let viol = lp.max_violation(&self.values);
        if viol > tol {
            return Err(format!("primal violation {viol:e}"));
        }
        let mut d = lp.objective.clone();
        for (row, &y) in lp.constraints.iter().zip(&self.duals) {
            for &(j, a) in &row.coeffs {
                d[j] -= a * y;
            }
        }
        for (i, (row, &y)) in lp.constraints.iter().zip(&self.duals).enumerate() {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * self.values[j]).sum();
            let sign_ok = match row.relation {
                Relation::Ge => y >= -tol,
                Relation::Le => y <= tol,
                Relation::Eq => true,
            };
            if !sign_ok {
                return Err(format!("row {i} dual {y} has wrong sign"));
            }
            let cs = y * (lhs - row.rhs);
            if cs.abs() > tol * (1.0 + y.abs()) {
                return Err(format!("row {i} complementary slackness {cs:e}"));
            }
        }
        for j in 0..lp.num_vars() {
            let dj = d[j];
            if (dj - self.reduced_costs[j]).abs() > tol * (1.0 + dj.abs()) {
                return Err(format!("variable {j} reduced cost mismatch"));
            }
            let x = self.values[j];
            let at_lo = (x - lp.lower[j]).abs() <= tol * (1.0 + x.abs());
            let at_hi = (x - lp.upper[j]).abs() <= tol * (1.0 + x.abs());
            if dj > tol && !at_lo {
                return Err(format!("variable {j} has d={dj:e} but is off its lower bound"));
            }
            if dj < -tol && !at_hi {
                return Err(format!("variable {j} has d={dj:e} but is off its upper bound"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("branch-and-bound node limit of {0} exceeded")]
    NodeLimitExceeded(usize),
    #[error("demand on O-D pair {0} is not covered by any service vector")]
    UncoveredDemand(usize),
}

/// `min Σ K_i` subject to `Σ_i r^i K_i ≥ Q` and `K ≥ 0`.
///
/// `vectors[i][p]` is the takeoff rate of vector `i` on pair `p`.
pub fn solve_allocation_lp(q: &[f64], vectors: &[Vec<f64>]) -> Result<Vec<f64>, SolverError> {
    for (p, &qp) in q.iter().enumerate() {
        if qp > 0.0 && !vectors.iter().any(|r| r.get(p).copied().unwrap_or(0.0) > 0.0) {
            return Err(SolverError::UncoveredDemand(p));
        }
    }
    let mut lp = LinearProgram::with_vars(vectors.len());
    lp.objective.iter_mut().for_each(|c| *c = 1.0);
    for (p, &qp) in q.iter().enumerate() {
        if qp <= 0.0 {
            continue;
        }
        let coeffs: Vec<(usize, f64)> = vectors
            .iter()
            .enumerate()
            .filter_map(|(i, r)| (r[p] > 0.0).then_some((i, r[p])))
            .collect();
        lp.add_constraint(coeffs, Relation::Ge, qp);
    }
    let sol = solve_lp(&lp);
    match sol.status {
        Status::Optimal => Ok(sol.values.iter().map(|v| v.max(0.0)).collect()),
        // coverage was checked, so anything else is a numerical failure
        s => Err(SolverError::Malformed(format!("allocation LP ended with {s:?}"))),
    }
}

/// Columns and rows left after presolve, or `None` if presolve proves the
/// program infeasible.
pub fn presolved_size(lp: &LinearProgram, integer_vars: &[usize]) -> Option<(usize, usize)> {
    let mut ints = vec![false; lp.num_vars()];
    for &j in integer_vars {
        ints[j] = true;
    }
    presolve::presolve(lp, &ints).map(|p| (p.lp.num_vars(), p.lp.num_constraints()))
}
