use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::dual::{DualResult, DualSimplex};
use super::presolve::presolve;
use super::simplex::{solve_lp_with, SimplexOptions};
use super::{LinearProgram, Solution, SolverError, Status};

#[derive(Clone, Debug)]
pub struct IlpOptions {
    pub node_limit: usize,
    /// Relative gap at which the search stops early.
    pub gap: f64,
    pub int_tol: f64,
    pub presolve: bool,
    /// Warm-started dual simplex for node relaxations when the program allows it.
    pub warm_start: bool,
    pub simplex: SimplexOptions,
}

impl Default for IlpOptions {
    fn default() -> Self {
        Self { node_limit: 1_000_000, gap: 0.0, int_tol: 1e-6, presolve: true, warm_start: true, simplex: SimplexOptions::default() }
    }
}

struct Node {
    bound: f64,
    id: usize,
    changes: Vec<(usize, f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smallest bound first, then oldest node
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

enum NodeResult {
    Pruned,
    Unbounded,
    Limit,
    /// Objective, solution and a lower bound on the node relaxation.
    Solved(f64, Vec<f64>, f64),
}

fn solve_node(base: &LinearProgram, ints: &[bool], changes: &[(usize, f64, f64)], opts: &IlpOptions) -> NodeResult {
    let mut lp = base.clone();
    for &(j, lo, hi) in changes {
        lp.lower[j] = lp.lower[j].max(lo);
        lp.upper[j] = lp.upper[j].min(hi);
    }
    if (0..lp.num_vars()).any(|j| lp.lower[j] > lp.upper[j]) {
        return NodeResult::Pruned;
    }
    let (sol, x) = if opts.presolve {
        let Some(pre) = presolve(&lp, ints) else { return NodeResult::Pruned };
        let sol = solve_lp_with(&pre.lp, &opts.simplex);
        let x = if sol.status == Status::Optimal { pre.restore(&sol.values) } else { Vec::new() };
        (sol, x)
    } else {
        let sol = solve_lp_with(&lp, &opts.simplex);
        let x = sol.values.clone();
        (sol, x)
    };
    match sol.status {
        Status::Optimal => {
            let obj = lp.objective_at(&x);
            NodeResult::Solved(obj, x, obj)
        }
        Status::Infeasible => NodeResult::Pruned,
        Status::Unbounded => NodeResult::Unbounded,
        Status::IterationLimit => NodeResult::Limit,
    }
}

/// Tableau entries above which a failed warm solve is not retried densely.
const DENSE_FALLBACK_LIMIT: usize = 40_000_000;

fn dense_size(lp: &LinearProgram) -> usize {
    let m = lp.num_constraints();
    m.saturating_mul(lp.num_vars() + 2 * m)
}

fn solve_node_dual(
    ds: &mut DualSimplex,
    base: &LinearProgram,
    changes: &[(usize, f64, f64)],
    cutoff: f64,
) -> Option<NodeResult> {
    let limit = 20 * (base.num_vars() + base.num_constraints()) + 1000;
    ds.set_bounds(changes);
    for attempt in 0..2 {
        match ds.solve(cutoff, limit) {
            DualResult::Optimal(x, bound) => {
                let scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if base.max_violation(&x) <= 1e-6 * scale {
                    let obj = base.objective_at(&x);
                    return Some(NodeResult::Solved(obj, x, bound.min(obj)));
                }
            }
            DualResult::Infeasible | DualResult::Cutoff if attempt == 0 => return Some(NodeResult::Pruned),
            _ => {}
        }
        ds.restart();
    }
    None
}

fn most_fractional(x: &[f64], ints: &[bool], tol: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    let mut score = -1.0;
    for (j, &v) in x.iter().enumerate() {
        if !ints[j] {
            continue;
        }
        let f = v - v.floor();
        if f <= tol || f >= 1.0 - tol {
            continue;
        }
        let s = 0.5 - (f - 0.5).abs();
        if s > score + 1e-12 {
            score = s;
            best = Some(j);
        }
    }
    best
}

pub fn solve_ilp(lp: &LinearProgram, integer_vars: &[usize]) -> Result<Solution, SolverError> {
    solve_ilp_with(lp, integer_vars, &IlpOptions::default())
}

/// Best-first branch-and-bound after a depth-first dive to the first incumbent.
pub fn solve_ilp_with(lp: &LinearProgram, integer_vars: &[usize], opts: &IlpOptions) -> Result<Solution, SolverError> {
    lp.validate()?;
    let n = lp.num_vars();
    let mut ints = vec![false; n];
    for &j in integer_vars {
        if j >= n {
            return Err(SolverError::Malformed(format!("integer index {j} out of range")));
        }
        ints[j] = true;
    }
    // an all-integer objective lets bounds be rounded up
    let integral_obj = (0..n).all(|j| lp.objective[j] == 0.0 || (ints[j] && lp.objective[j].fract() == 0.0));
    let round = |b: f64| if integral_obj { (b - 1e-6).ceil() } else { b };

    let (base, base_ints, root_pre) = if opts.presolve {
        match presolve(lp, &ints) {
            Some(p) => (p.lp.clone(), p.integer.clone(), Some(p)),
            None => return Ok(Solution::bare(Status::Infeasible, n)),
        }
    } else {
        (lp.clone(), ints.clone(), None)
    };
    let offset = root_pre.as_ref().map_or(0.0, |p| p.offset);

    let mut dual = if opts.warm_start { DualSimplex::new(&base) } else { None };
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0usize;
    let mut next_id = 0usize;
    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut dive: Vec<Node> = Vec::new();
    dive.push(Node { bound: f64::NEG_INFINITY, id: next_id, changes: Vec::new() });
    next_id += 1;
    let mut best_bound = f64::NEG_INFINITY;

    loop {
        let diving = incumbent.is_none() && !dive.is_empty();
        let node = if diving {
            dive.pop().unwrap()
        } else {
            heap.extend(dive.drain(..));
            match heap.pop() {
                Some(nd) => nd,
                None => break,
            }
        };
        if let Some((inc, _)) = &incumbent {
            if !diving {
                best_bound = best_bound.max(node.bound.min(*inc));
            }
            if node.bound >= inc - 1e-9 {
                continue;
            }
            let lb = node.bound.max(best_bound);
            if opts.gap > 0.0 && (inc - lb) / inc.abs().max(1e-9) <= opts.gap {
                heap.push(node);
                break;
            }
        }
        nodes += 1;
        if nodes > opts.node_limit {
            return Err(SolverError::NodeLimitExceeded(opts.node_limit));
        }
        let cutoff = match &incumbent {
            None => f64::INFINITY,
            Some((inc, _)) if integral_obj => inc - offset - 1.0 + 1e-5,
            Some((inc, _)) => inc - offset + 1e-7 * inc.abs().max(1.0),
        };
        let res = dual.as_mut().and_then(|ds| solve_node_dual(ds, &base, &node.changes, cutoff));
        let res = match res {
            Some(r) => r,
            None if dual.is_some() && dense_size(&base) > DENSE_FALLBACK_LIMIT => NodeResult::Limit,
            None => solve_node(&base, &base_ints, &node.changes, opts),
        };
        let (obj, x, lb) = match res {
            NodeResult::Pruned => continue,
            NodeResult::Unbounded => {
                let mut s = Solution::bare(Status::Unbounded, n);
                s.nodes = nodes;
                return Ok(s);
            }
            NodeResult::Limit => {
                let mut s = Solution::bare(Status::IterationLimit, n);
                s.nodes = nodes;
                return Ok(s);
            }
            NodeResult::Solved(o, x, lb) => (o + offset, x, lb + offset),
        };
        let bound = round(lb);
        if let Some((inc, _)) = &incumbent {
            if bound >= inc - 1e-9 {
                continue;
            }
        }
        match most_fractional(&x, &base_ints, opts.int_tol) {
            None => {
                let mut xs = x;
                for (j, v) in xs.iter_mut().enumerate() {
                    if base_ints[j] {
                        *v = v.round();
                    }
                }
                incumbent = Some((obj, xs));
            }
            Some(j) => {
                let v = x[j];
                let down = Node {
                    bound,
                    id: next_id,
                    changes: [node.changes.clone(), vec![(j, f64::NEG_INFINITY, v.floor())]].concat(),
                };
                let up = Node {
                    bound,
                    id: next_id + 1,
                    changes: [node.changes, vec![(j, v.ceil(), f64::INFINITY)]].concat(),
                };
                next_id += 2;
                if incumbent.is_none() {
                    // explore the nearer side first while diving
                    if v - v.floor() >= 0.5 {
                        dive.push(down);
                        dive.push(up);
                    } else {
                        dive.push(up);
                        dive.push(down);
                    }
                } else {
                    heap.push(down);
                    heap.push(up);
                }
            }
        }
    }

    let Some((obj, xr)) = incumbent else {
        let mut s = Solution::bare(Status::Infeasible, n);
        s.nodes = nodes;
        return Ok(s);
    };
    let lower = heap.peek().map_or(obj, |nd| nd.bound.min(obj));
    let mut values = match &root_pre {
        Some(p) => p.restore(&xr),
        None => xr,
    };
    for &j in integer_vars {
        values[j] = values[j].round();
    }
    Ok(Solution {
        status: Status::Optimal,
        objective_value: lp.objective_at(&values),
        values,
        duals: Vec::new(),
        reduced_costs: Vec::new(),
        iterations: 0,
        best_bound: lower,
        nodes,
    })
}
