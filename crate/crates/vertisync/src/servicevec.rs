//! Service vectors and throughput regions.
//!
//! A rate vector assigns each O-D pair `m_p` takeoffs per `k_τ` steps. It is
//! conflict-free when residues mod `k_τ` can be chosen so that the strictly
//! periodic schedule never puts two vehicles in one overlap class at once and
//! every vertiport respects its takeoff and landing windows. Periodicity makes
//! the check exact over residues: a vehicle of pair `p` launched at residue
//! `o` is in its sector `j` at residue `o + j`.

use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::network::Network;
use crate::solver::{solve_lp, LinearProgram, Relation, Status};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("rate grid has {0} candidates, above the cap of {1}")]
    CombinatorialLimitExceeded(u128, u128),
    #[error("pair {0} is active but has no opposite pair and no return path")]
    NoOppositePair(usize),
    #[error("some service vector is not symmetric")]
    NotSymmetricNetwork,
    #[error("a fleet of {0} is below the bound {1}")]
    FleetTooSmall(usize, usize),
    #[error("k_tau = {0} exceeds the supported 64 residues")]
    PeriodTooLong(usize),
    #[error("invalid rate vector: {0}")]
    BadRates(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ServiceVector {
    /// Takeoffs per period `k_τ` for each pair.
    pub counts: Vec<usize>,
    pub rates: Vec<f64>,
    pub symmetric: bool,
}

impl ServiceVector {
    pub fn from_counts(net: &Network, counts: Vec<usize>) -> Self {
        let k = net.params.tau_steps as f64;
        let rates = counts.iter().map(|&m| m as f64 / k).collect();
        let symmetric = is_symmetric(net, &counts);
        Self { counts, rates, symmetric }
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts.iter().enumerate().filter(|(_, &m)| m > 0).map(|(p, _)| p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Symmetry {
    Symmetric,
    Reversible,
    Neither,
}

fn is_symmetric(net: &Network, counts: &[usize]) -> bool {
    counts.iter().enumerate().all(|(p, &m)| match net.opposite(p) {
        Some(q) => counts[q] == m,
        None => m == 0,
    })
}

/// Converts rates in takeoffs per step to per-period counts.
pub fn rates_to_counts(net: &Network, rates: &[f64]) -> Result<Vec<usize>, ServiceError> {
    if rates.len() != net.num_pairs() {
        return Err(ServiceError::BadRates(format!("expected {} components", net.num_pairs())));
    }
    let k = net.params.tau_steps as f64;
    rates
        .iter()
        .map(|&r| {
            let m = r * k;
            if r < 0.0 || (m - m.round()).abs() > 1e-9 {
                Err(ServiceError::BadRates(format!("rate {r} is not on the 1/{k} grid")))
            } else {
                Ok(m.round() as usize)
            }
        })
        .collect()
}

struct Csp<'a> {
    k: usize,
    pairs: Vec<usize>,
    counts: &'a [usize],
    /// per pair, its interior `(class, index)` list
    classes: Vec<Vec<(usize, usize)>>,
    origin: Vec<usize>,
    dest: Vec<usize>,
    flight: Vec<usize>,
    pads: Vec<usize>,
}

struct CspState {
    class_mask: Vec<u64>,
    takeoffs: Vec<Vec<usize>>,
    landings: Vec<Vec<usize>>,
    landing_total: Vec<usize>,
    chosen: Vec<Vec<usize>>,
}

impl Csp<'_> {
    fn vertiport_ok(&self, st: &CspState, v: usize) -> bool {
        let n = self.pads[v];
        let tot = st.landing_total[v];
        (0..self.k).all(|r| st.takeoffs[v][r] + tot - st.landings[v][r] <= n)
    }

    fn place(&self, st: &mut CspState, p: usize, o: usize) -> bool {
        for &(c, j) in &self.classes[p] {
            let bit = 1u64 << ((o + j) % self.k);
            if st.class_mask[c] & bit != 0 {
                return false;
            }
        }
        let (v, w) = (self.origin[p], self.dest[p]);
        let lr = (o + self.flight[p]) % self.k;
        st.takeoffs[v][o] += 1;
        st.landings[w][lr] += 1;
        st.landing_total[w] += 1;
        if !self.vertiport_ok(st, v) || !self.vertiport_ok(st, w) {
            st.takeoffs[v][o] -= 1;
            st.landings[w][lr] -= 1;
            st.landing_total[w] -= 1;
            return false;
        }
        for &(c, j) in &self.classes[p] {
            st.class_mask[c] |= 1u64 << ((o + j) % self.k);
        }
        st.chosen[p].push(o);
        true
    }

    fn unplace(&self, st: &mut CspState, p: usize, o: usize) {
        for &(c, j) in &self.classes[p] {
            st.class_mask[c] &= !(1u64 << ((o + j) % self.k));
        }
        let (v, w) = (self.origin[p], self.dest[p]);
        let lr = (o + self.flight[p]) % self.k;
        st.takeoffs[v][o] -= 1;
        st.landings[w][lr] -= 1;
        st.landing_total[w] -= 1;
        st.chosen[p].pop();
    }

    fn search(&self, st: &mut CspState, slot: usize, first: bool) -> bool {
        // slots enumerate (pair, k-th residue) in order
        let mut s = slot;
        let mut idx = 0;
        while idx < self.pairs.len() {
            let p = self.pairs[idx];
            if s < self.counts[p] {
                break;
            }
            s -= self.counts[p];
            idx += 1;
        }
        if idx == self.pairs.len() {
            return true;
        }
        let p = self.pairs[idx];
        let start = if s == 0 { 0 } else { st.chosen[p][s - 1] + 1 };
        let remaining = self.counts[p] - s;
        let end = if first { 1 } else { self.k + 1 - remaining };
        for o in start..end.max(start) {
            if self.place(st, p, o) {
                if self.search(st, slot + 1, false) {
                    return true;
                }
                self.unplace(st, p, o);
            }
        }
        false
    }
}

/// Residues mod `k_τ` for each pair, or `None` when no conflict-free
/// periodic assignment exists.
pub fn find_offsets(net: &Network, counts: &[usize]) -> Result<Option<Vec<Vec<usize>>>, ServiceError> {
    let k = net.params.tau_steps;
    if k > 64 {
        return Err(ServiceError::PeriodTooLong(k));
    }
    if counts.len() != net.num_pairs() {
        return Err(ServiceError::BadRates(format!("expected {} components", net.num_pairs())));
    }
    let nv = net.num_vertiports();
    let mut out_total = vec![0usize; nv + 1];
    for (p, &m) in counts.iter().enumerate() {
        if m > k {
            return Ok(None);
        }
        out_total[net.od_pairs[p].origin] += m;
    }
    if (1..=nv).any(|v| out_total[v] > net.pads(v).min(k)) {
        return Ok(None);
    }
    // every class can host at most k residues
    let mut use_count = vec![0usize; net.num_classes()];
    for (p, &m) in counts.iter().enumerate() {
        for (_, c) in net.od_pairs[p].interior() {
            use_count[c] += m;
        }
    }
    if use_count.iter().any(|&u| u > k) {
        return Ok(None);
    }
    let mut pairs: Vec<usize> = (0..counts.len()).filter(|&p| counts[p] > 0).collect();
    if pairs.is_empty() {
        return Ok(Some(vec![Vec::new(); counts.len()]));
    }
    // most constrained first: heavy rates and busy classes
    pairs.sort_by_key(|&p| {
        let load: usize = net.od_pairs[p].interior().map(|(_, c)| use_count[c]).sum();
        (std::cmp::Reverse(counts[p]), std::cmp::Reverse(load), p)
    });
    let csp = Csp {
        k,
        pairs,
        counts,
        classes: net.od_pairs.iter().map(|od| od.interior().map(|(j, c)| (c, j)).collect()).collect(),
        origin: net.od_pairs.iter().map(|od| od.origin).collect(),
        dest: net.od_pairs.iter().map(|od| od.destination).collect(),
        flight: net.od_pairs.iter().map(|od| od.flight_time_steps).collect(),
        pads: (0..=nv).map(|v| if v == 0 { 0 } else { net.pads(v) }).collect(),
    };
    let mut st = CspState {
        class_mask: vec![0; net.num_classes()],
        takeoffs: vec![vec![0; k]; nv + 1],
        landings: vec![vec![0; k]; nv + 1],
        landing_total: vec![0; nv + 1],
        chosen: vec![Vec::new(); counts.len()],
    };
    if csp.search(&mut st, 0, true) {
        Ok(Some(st.chosen))
    } else {
        Ok(None)
    }
}

pub fn is_conflict_free(net: &Network, rates: &[f64]) -> bool {
    match rates_to_counts(net, rates) {
        Ok(c) => c.iter().any(|&m| m > 0) && matches!(find_offsets(net, &c), Ok(Some(_))),
        Err(_) => false,
    }
}

#[derive(Clone, Debug)]
pub struct EnumerateOptions {
    pub cap: u128,
    /// Pairs allowed to carry a nonzero rate; `None` means all.
    pub support: Option<Vec<usize>>,
    /// Also drop vectors dominated component-wise by another member.
    pub maximal_only: bool,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        Self { cap: 10_000_000, support: None, maximal_only: false }
    }
}

pub fn enumerate_service_vectors(net: &Network) -> Result<Vec<ServiceVector>, ServiceError> {
    enumerate_with(net, &EnumerateOptions::default())
}

fn feasible(net: &Network, counts: &[usize]) -> bool {
    matches!(find_offsets(net, counts), Ok(Some(_)))
}

fn collect_feasible(net: &Network, support: &[usize], maxes: &[usize], idx: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if idx == support.len() {
        out.push(cur.clone());
        return;
    }
    let p = support[idx];
    for m in 0..=maxes[idx] {
        cur[p] = m;
        if m > 0 && !feasible(net, cur) {
            // the feasible family is closed under decreasing a component
            break;
        }
        collect_feasible(net, support, maxes, idx + 1, cur, out);
    }
    cur[p] = 0;
}

/// Conflict-free vectors on the rate grid, sorted canonically (descending
/// count vectors). Non-symmetric vectors that extend to a symmetric member
/// are left out.
pub fn enumerate_with(net: &Network, opts: &EnumerateOptions) -> Result<Vec<ServiceVector>, ServiceError> {
    let k = net.params.tau_steps;
    if k > 64 {
        return Err(ServiceError::PeriodTooLong(k));
    }
    let n = net.num_pairs();
    let support: Vec<usize> = match &opts.support {
        Some(s) => {
            let mut s = s.clone();
            s.sort_unstable();
            s.dedup();
            s.retain(|&p| p < n);
            s
        }
        None => (0..n).collect(),
    };
    let maxes: Vec<usize> = support.iter().map(|&p| net.pads(net.od_pairs[p].origin).min(k)).collect();
    let grid: u128 = maxes.iter().map(|&m| m as u128 + 1).product();
    if grid > opts.cap {
        return Err(ServiceError::CombinatorialLimitExceeded(grid, opts.cap));
    }
    if support.is_empty() {
        return Ok(Vec::new());
    }
    let first = support[0];
    let mut all: Vec<Vec<usize>> = (0..=maxes[0])
        .into_par_iter()
        .map(|m| {
            let mut cur = vec![0; n];
            cur[first] = m;
            let mut out = Vec::new();
            if m == 0 || feasible(net, &cur) {
                collect_feasible(net, &support, &maxes, 1, &mut cur, &mut out);
            }
            out
        })
        .flatten()
        .collect();
    all.retain(|c| c.iter().any(|&m| m > 0));
    let set: HashSet<Vec<usize>> = all.iter().cloned().collect();
    let is_maximal = |c: &Vec<usize>| {
        support.iter().zip(&maxes).all(|(&p, &mx)| {
            if c[p] >= mx {
                return true;
            }
            let mut up = c.clone();
            up[p] += 1;
            !set.contains(&up)
        })
    };
    let symmetric: Vec<&Vec<usize>> = all.iter().filter(|c| is_symmetric(net, c)).collect();
    // a non-symmetric vector that a symmetric member dominates is dropped
    let mut kept: Vec<Vec<usize>> = all
        .iter()
        .filter(|c| {
            is_symmetric(net, c) || !symmetric.iter().any(|s| s.iter().zip(c.iter()).all(|(a, b)| a >= b))
        })
        .filter(|c| !opts.maximal_only || is_maximal(c))
        .cloned()
        .collect();
    kept.sort_by(|a, b| b.cmp(a));
    Ok(kept.into_iter().map(|c| ServiceVector::from_counts(net, c)).collect())
}

pub fn reversed(net: &Network, counts: &[usize]) -> Option<Vec<usize>> {
    let mut rev = vec![0; counts.len()];
    for (p, &m) in counts.iter().enumerate() {
        if m > 0 {
            rev[net.opposite(p)?] = m;
        }
    }
    Some(rev)
}

pub fn classify(net: &Network, r: &ServiceVector) -> Result<Symmetry, ServiceError> {
    if r.symmetric {
        return Ok(Symmetry::Symmetric);
    }
    for p in r.active() {
        if net.opposite(p).is_none() {
            let od = &net.od_pairs[p];
            return match net.rebalance_path(od.destination, od.origin) {
                Ok(_) => Ok(Symmetry::Neither),
                Err(_) => Err(ServiceError::NoOppositePair(p)),
            };
        }
    }
    let rev = reversed(net, &r.counts).expect("every active pair has an opposite");
    if feasible(net, &rev) {
        Ok(Symmetry::Reversible)
    } else {
        Ok(Symmetry::Neither)
    }
}

fn ceil_tol(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

pub fn fleet_bound_theorem1(r: &[ServiceVector]) -> usize {
    r.iter()
        .map(|v| {
            let min = v.rates.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
            if min.is_finite() {
                ceil_tol(v.total_rate() / min)
            } else {
                0
            }
        })
        .max()
        .unwrap_or(0)
}

pub fn fleet_bound_corollary1(net: &Network, r: &[ServiceVector]) -> Result<usize, ServiceError> {
    if r.iter().any(|v| !v.symmetric) {
        return Err(ServiceError::NotSymmetricNetwork);
    }
    let kc = net.params.recharge_steps as f64;
    Ok(r
        .iter()
        .map(|v| {
            let min = v.rates.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
            let tmax = v.active().map(|p| net.od_pairs[p].flight_time_steps).max().unwrap_or(0) as f64;
            if min.is_finite() {
                ceil_tol(v.total_rate() * (1.0 / min).max(tmax + kc))
            } else {
                0
            }
        })
        .max()
        .unwrap_or(0))
}

/// Cycle-time inflation factor `c_i` of a vector for a given fleet size.
pub fn compute_c(net: &Network, r: &ServiceVector, fleet_size: usize) -> Result<f64, ServiceError> {
    let bound = fleet_bound_theorem1(std::slice::from_ref(r));
    if fleet_size < bound || fleet_size == 0 {
        return Err(ServiceError::FleetTooSmall(fleet_size, bound.max(1)));
    }
    let i = if r.symmetric { 0.0 } else { 1.0 };
    let sum = r.total_rate();
    let a = fleet_size as f64;
    let kc = net.params.recharge_steps as f64;
    let inner = r
        .active()
        .map(|p| {
            let t = net.od_pairs[p].flight_time_steps as f64;
            (t + kc - a / sum).max(t * i)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(i + (1.0 + i) * inner * sum / a)
}

#[derive(Clone, Debug, Serialize)]
pub struct ThroughputRegion {
    pub vectors: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

impl ThroughputRegion {
    /// The necessary-condition set: all inflation factors zero.
    pub fn necessary(r: &[ServiceVector]) -> Self {
        Self { vectors: r.iter().map(|v| v.rates.clone()).collect(), c: vec![0.0; r.len()] }
    }

    /// The sufficient set for a given fleet.
    pub fn sufficient(net: &Network, r: &[ServiceVector], fleet: usize) -> Result<Self, ServiceError> {
        let c = r.iter().map(|v| compute_c(net, v, fleet)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { vectors: r.iter().map(|v| v.rates.clone()).collect(), c })
    }

    fn max_margin(&self, lambda: &[f64]) -> f64 {
        // maximize t: Σ_i r_p^i x_i/(1+c_i) - t >= λ_p on demanded pairs, Σx <= 1
        let nvec = self.vectors.len();
        let mut lp = LinearProgram::with_vars(nvec + 1);
        let t = nvec;
        lp.objective[t] = -1.0;
        lp.lower[t] = f64::NEG_INFINITY;
        lp.upper[t] = 1.0;
        for (p, &l) in lambda.iter().enumerate() {
            if l <= 0.0 {
                continue;
            }
            let mut coeffs: Vec<(usize, f64)> = (0..nvec)
                .filter(|&i| self.vectors[i][p] > 0.0)
                .map(|i| (i, self.vectors[i][p] / (1.0 + self.c[i])))
                .collect();
            coeffs.push((t, -1.0));
            lp.add_constraint(coeffs, Relation::Ge, l);
        }
        if nvec > 0 {
            lp.add_constraint((0..nvec).map(|i| (i, 1.0)).collect(), Relation::Le, 1.0);
        }
        let s = solve_lp(&lp);
        match s.status {
            Status::Optimal => s.values[t],
            _ => f64::NEG_INFINITY,
        }
    }

    /// Membership of an arrival-rate vector (requests per step).
    ///
    /// Components with `λ_p = 0` are always satisfied, so the zero vector
    /// belongs to every region.
    pub fn contains(&self, lambda: &[f64], strict: bool, eps: f64) -> bool {
        let m = self.max_margin(lambda);
        if strict {
            m > eps
        } else {
            m >= -eps
        }
    }

    /// Largest `s` with `s · direction` in the closed region.
    pub fn boundary_scale(&self, direction: &[f64]) -> f64 {
        let nvec = self.vectors.len();
        let mut lp = LinearProgram::with_vars(nvec + 1);
        let s = nvec;
        lp.objective[s] = -1.0;
        for (p, &d) in direction.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            let mut coeffs: Vec<(usize, f64)> = (0..nvec)
                .filter(|&i| self.vectors[i][p] > 0.0)
                .map(|i| (i, self.vectors[i][p] / (1.0 + self.c[i])))
                .collect();
            coeffs.push((s, -d));
            lp.add_constraint(coeffs, Relation::Ge, 0.0);
        }
        lp.add_constraint((0..nvec).map(|i| (i, 1.0)).collect(), Relation::Le, 1.0);
        let sol = solve_lp(&lp);
        match sol.status {
            Status::Optimal => sol.values[s],
            Status::Unbounded => f64::INFINITY,
            _ => 0.0,
        }
    }
}

pub fn region_membership(lambda: &[f64], region: &ThroughputRegion, strict: bool) -> bool {
    region.contains(lambda, strict, 1e-9)
}

/// Distinct origin vertiports of the active pairs.
pub fn active_origins(net: &Network, r: &ServiceVector) -> BTreeSet<usize> {
    r.active().map(|p| net.od_pairs[p].origin).collect()
}
