//! The time-expanded cycle program.
//!
//! Counting variables `w` record how often vehicle `a` has entered a sector
//! (index 0 is the origin pad, the last index the destination pad) or visited
//! a vertiport by relative step `n`. `u` counts recharge starts, `E` is the
//! state of charge and `g` the amount restored by a recharge. Step 0 is the
//! cycle start; decisions happen at steps `1..=M`.
//!
//! Vertiport windows use the same discrete semantics as the validator: at
//! most `N_v` takeoffs in any `k_tau` window, and at each step the takeoffs
//! plus the landings of the previous `k_tau - 1` steps stay within `N_v`.

use std::collections::HashMap;
use std::fmt::Write;

use serde::Serialize;
use thiserror::Error;

pub use crate::scheduler::schedule::{FleetSnapshot, Location, VehicleState};
use crate::network::Network;
use crate::scheduler::schedule::{Flight, Schedule};
use crate::solver::{
    solve_ilp_with, write_lp, Constraint, IlpOptions, LinearProgram, Relation, Solution, SolverError, Status,
};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TfmpError {
    #[error("solution value of {0} is not integral")]
    NonIntegralSolution(String),
    #[error("solution is not optimal: {0:?}")]
    NotOptimal(Status),
    #[error("invalid fleet snapshot: {0}")]
    BadFleet(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum VarKind {
    Sector,
    Takeoff,
    Landing,
    Visit,
    Recharges,
    Charge,
    Refill,
}

/// One decision variable. `locus` is the sector index for route variables
/// and the vertiport id for `Visit`/`Recharges`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct VarKey {
    pub kind: VarKind,
    pub vehicle: usize,
    pub step: usize,
    pub pair: Option<usize>,
    pub locus: usize,
}

impl VarKey {
    pub fn name(&self) -> String {
        let a = self.vehicle;
        let n = self.step;
        match (self.kind, self.pair) {
            (VarKind::Visit, _) => format!("wv_a{a}_v{}_n{n}", self.locus),
            (VarKind::Recharges, _) => format!("u_a{a}_v{}_n{n}", self.locus),
            (VarKind::Charge, _) => format!("E_a{a}_n{n}"),
            (VarKind::Refill, _) => format!("g_a{a}_n{n}"),
            (_, p) => format!("w_a{a}_p{}_i{}_n{n}", p.unwrap_or(0), self.locus),
        }
    }
}

/// Dense bijective map between keys and column indices.
#[derive(Clone, Debug, Default)]
pub struct VarIndex {
    pub keys: Vec<VarKey>,
    map: HashMap<VarKey, usize>,
    sector_base: Vec<Vec<Vec<Option<usize>>>>,
    visit_base: Vec<Vec<usize>>,
    recharge_base: Vec<Vec<usize>>,
    charge_base: Vec<usize>,
    refill_base: Vec<usize>,
}

impl VarIndex {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn get(&self, key: &VarKey) -> Option<usize> {
        self.map.get(key).copied()
    }

    /// Route variable for sector `i` of pair `p`, if kept.
    pub fn w(&self, a: usize, p: usize, i: usize, n: usize) -> Option<usize> {
        self.sector_base[a][p][i].map(|b| b + n)
    }

    pub fn visit(&self, a: usize, v: usize, n: usize) -> usize {
        self.visit_base[a][v - 1] + n
    }

    pub fn recharges(&self, a: usize, v: usize, n: usize) -> usize {
        self.recharge_base[a][v - 1] + n
    }

    pub fn charge(&self, a: usize, n: usize) -> usize {
        self.charge_base[a] + n
    }

    /// Refill amount at step `n >= 1`.
    pub fn refill(&self, a: usize, n: usize) -> usize {
        self.refill_base[a] + n - 1
    }

    pub fn names(&self) -> Vec<String> {
        self.keys.iter().map(VarKey::name).collect()
    }
}

/// Constraint group of each row, for traceability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Group {
    ServiceCompletion,
    Monotone,
    Progression,
    VisitUpdate,
    TakeoffAfterVisit,
    SectorCapacity,
    TakeoffWindow,
    LandingWindow,
    ChargeBalance,
    RechargeMonotone,
    RechargeAtVisit,
    RechargeBlocking,
    RefillUpper,
    RefillLower,
    LandByHorizon,
    /// Landing count equals the takeoff count `T_p` steps earlier.
    TransitDelay,
    /// At most one takeoff per step on an isolated route.
    RouteCapacity,
}

#[derive(Clone, Debug)]
pub struct TfmpMeta {
    pub net: Network,
    pub fleet: FleetSnapshot,
    pub horizon: usize,
    pub requests: Vec<usize>,
    pub capacity: usize,
    pub preprocessed: bool,
    /// Constant term of the objective (flights already airborne at step 0).
    pub objective_offset: f64,
}

#[derive(Clone, Debug)]
pub struct TfmpInstance {
    pub lp: LinearProgram,
    pub index: VarIndex,
    pub integer_vars: Vec<usize>,
    pub groups: Vec<Group>,
    pub meta: TfmpMeta,
}

/// `ceil(sum_p Q_p (T_p + rebalance_p)) + k_tau`, at least `k_c + 1`.
pub fn horizon_bound(net: &Network, q: &[usize]) -> usize {
    let work: usize = net
        .od_pairs
        .iter()
        .zip(q)
        .map(|(p, &n)| n * (p.flight_time_steps + p.rebalance_time_steps))
        .sum();
    let base = work + net.params.tau_steps;
    base.max(net.params.recharge_steps + 1)
}

/// `(variables, constraint upper bound)` for the unreduced program.
pub fn estimate_size(v: usize, p: usize, sectors: usize, a: usize, m: usize) -> (usize, usize) {
    let vars = m * a * sectors + 2 * m * a * v;
    let rows = p + m * (2 * a + 1) * sectors + m * (2 * v + 5 * v * a + 2 * a);
    (vars, rows)
}

pub fn estimate_for(net: &Network, vehicles: usize, m: usize) -> (usize, usize) {
    estimate_size(net.num_vertiports(), net.num_pairs(), net.total_sectors(), vehicles, m)
}

/// Pairs whose interior sectors are used by no other route.
pub fn isolated_pairs(net: &Network) -> Vec<bool> {
    let mut users = vec![0usize; net.num_classes()];
    for p in &net.od_pairs {
        for (_, c) in p.interior() {
            users[c] += 1;
        }
    }
    net.od_pairs.iter().map(|p| p.interior().all(|(_, c)| users[c] == 1)).collect()
}

pub fn validate_fleet(net: &Network, fleet: &FleetSnapshot) -> Result<(), TfmpError> {
    let prm = &net.params;
    for (a, v) in fleet.vehicles.iter().enumerate() {
        if !(prm.e_min - 1e-9..=prm.e_max + 1e-9).contains(&v.charge) {
            return Err(TfmpError::BadFleet(format!("vehicle {a} charge {} out of range", v.charge)));
        }
        match v.location {
            Location::Parked { vertiport } if vertiport == 0 || vertiport > net.num_vertiports() => {
                return Err(TfmpError::BadFleet(format!("vehicle {a} at unknown vertiport {vertiport}")));
            }
            Location::Flying { pair, takeoff } => {
                let od = net.od_pairs.get(pair).ok_or_else(|| TfmpError::BadFleet(format!("vehicle {a} on unknown pair")))?;
                if takeoff > fleet.time || takeoff + od.flight_time_steps <= fleet.time {
                    return Err(TfmpError::BadFleet(format!("vehicle {a} is not airborne at step {}", fleet.time)));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Minimum over routes of sum(T + k_tau): earliest ready time after
/// relocating from one vertiport to another.
fn relocation_times(net: &Network) -> Vec<Vec<usize>> {
    let nv = net.num_vertiports();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; nv + 1]; nv + 1];
    for v in 1..=nv {
        d[v][v] = 0;
    }
    for p in &net.od_pairs {
        let w = p.flight_time_steps + net.params.tau_steps;
        d[p.origin][p.destination] = d[p.origin][p.destination].min(w);
    }
    for k in 1..=nv {
        for i in 1..=nv {
            for j in 1..=nv {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

struct Builder<'a> {
    net: &'a Network,
    lp: LinearProgram,
    index: VarIndex,
    integer_vars: Vec<usize>,
    groups: Vec<Group>,
}

impl Builder<'_> {
    fn var(&mut self, key: VarKey, lo: f64, hi: f64, integer: bool) -> usize {
        let j = self.lp.add_var(0.0, lo, hi);
        self.index.map.insert(key, j);
        self.index.keys.push(key);
        if integer {
            self.integer_vars.push(j);
        }
        j
    }

    fn row(&mut self, g: Group, coeffs: Vec<(usize, f64)>, rel: Relation, rhs: f64) {
        self.lp.constraints.push(Constraint { coeffs: merge(coeffs), relation: rel, rhs });
        self.groups.push(g);
    }

    fn fix(&mut self, j: usize, value: f64) {
        self.lp.lower[j] = value;
        self.lp.upper[j] = value;
    }

    fn cap(&mut self, j: usize, hi: f64) {
        self.lp.upper[j] = self.lp.upper[j].min(hi).max(self.lp.lower[j]);
    }

    fn w(&self, a: usize, p: usize, i: usize, n: usize) -> usize {
        self.index.w(a, p, i, n).expect("route variable kept")
    }

    fn landing(&self, a: usize, p: usize, n: usize) -> usize {
        self.w(a, p, self.net.od_pairs[p].flight_time_steps, n)
    }
}

/// Sum duplicate columns and drop zeros.
fn merge(mut coeffs: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    coeffs.sort_by_key(|c| c.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for (j, a) in coeffs {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|c| c.1 != 0.0);
    out
}

pub fn build_instance(
    net: &Network,
    fleet: &FleetSnapshot,
    q: &[usize],
    horizon: usize,
    capacity: usize,
) -> Result<TfmpInstance, TfmpError> {
    build(net, fleet, q, horizon, capacity, false)
}

/// Rebuild with isolated routes collapsed to the transit-delay identity.
pub fn preprocess(inst: &TfmpInstance) -> TfmpInstance {
    let m = &inst.meta;
    build(&m.net, &m.fleet, &m.requests, m.horizon, m.capacity, true).expect("instance was built from this input")
}

fn build(
    net: &Network,
    fleet: &FleetSnapshot,
    q: &[usize],
    horizon: usize,
    capacity: usize,
    reduce: bool,
) -> Result<TfmpInstance, TfmpError> {
    validate_fleet(net, fleet)?;
    assert!(capacity >= 1, "vehicle capacity must be positive");
    assert_eq!(q.len(), net.num_pairs(), "one request count per pair");
    let m = horizon;
    let na = fleet.len();
    let nv = net.num_vertiports();
    let np = net.num_pairs();
    let prm = &net.params;
    let kt = prm.tau_steps;
    let kc = prm.recharge_steps;
    let span = prm.e_max - prm.e_min;
    let iso = if reduce { isolated_pairs(net) } else { vec![false; np] };
    let reloc = relocation_times(net);

    let mut b = Builder {
        net,
        lp: LinearProgram::new(),
        index: VarIndex::default(),
        integer_vars: Vec::new(),
        groups: Vec::new(),
    };
    let flights_cap = |t: usize| 1.0 + (m / (t + kt).max(1)) as f64;
    let visits_cap = 2.0 + (m / (kt + 1)) as f64;

    // columns
    b.index.sector_base = vec![vec![Vec::new(); np]; na];
    b.index.visit_base = vec![vec![0; nv]; na];
    b.index.recharge_base = vec![vec![0; nv]; na];
    for a in 0..na {
        for (p, od) in net.od_pairs.iter().enumerate() {
            let last = od.flight_time_steps;
            let mut bases = vec![None; last + 1];
            for (i, base) in bases.iter_mut().enumerate() {
                if iso[p] && i != 0 && i != last {
                    continue;
                }
                let kind = match i {
                    0 => VarKind::Takeoff,
                    i if i == last => VarKind::Landing,
                    _ => VarKind::Sector,
                };
                *base = Some(b.index.keys.len());
                for n in 0..=m {
                    let key = VarKey { kind, vehicle: a, step: n, pair: Some(p), locus: i };
                    b.var(key, 0.0, flights_cap(last), true);
                }
            }
            b.index.sector_base[a][p] = bases;
        }
        for v in 1..=nv {
            b.index.visit_base[a][v - 1] = b.index.keys.len();
            for n in 0..=m {
                b.var(VarKey { kind: VarKind::Visit, vehicle: a, step: n, pair: None, locus: v }, 0.0, visits_cap, true);
            }
        }
        for v in 1..=nv {
            b.index.recharge_base[a][v - 1] = b.index.keys.len();
            for n in 0..=m {
                b.var(VarKey { kind: VarKind::Recharges, vehicle: a, step: n, pair: None, locus: v }, 0.0, visits_cap, true);
            }
        }
        b.index.charge_base.push(b.index.keys.len());
        for n in 0..=m {
            b.var(VarKey { kind: VarKind::Charge, vehicle: a, step: n, pair: None, locus: 0 }, prm.e_min, prm.e_max, false);
        }
        b.index.refill_base.push(b.index.keys.len());
        for n in 1..=m {
            b.var(VarKey { kind: VarKind::Refill, vehicle: a, step: n, pair: None, locus: 0 }, 0.0, span, false);
        }
    }

    // initial conditions
    let t0 = fleet.time;
    let mut offset = 0.0;
    let mut takeoff0 = vec![vec![0.0; np]; na];
    for (a, vs) in fleet.vehicles.iter().enumerate() {
        let e0 = if vs.recharge_until.is_some() { prm.e_max } else { vs.charge };
        let j = b.index.charge(a, 0);
        b.fix(j, e0);
        for v in 1..=nv {
            let here = matches!(vs.location, Location::Parked { vertiport } if vertiport == v);
            let j = b.index.visit(a, v, 0);
            b.fix(j, if here { 1.0 } else { 0.0 });
            let j = b.index.recharges(a, v, 0);
            b.fix(j, 0.0);
        }
        for (p, od) in net.od_pairs.iter().enumerate() {
            let elapsed = match vs.location {
                Location::Flying { pair, takeoff } if pair == p => Some(t0 - takeoff),
                _ => None,
            };
            for i in 0..=od.flight_time_steps {
                if let Some(j) = b.index.w(a, p, i, 0) {
                    b.fix(j, if elapsed.is_some_and(|e| i <= e) { 1.0 } else { 0.0 });
                }
            }
            if let Some(e) = elapsed {
                takeoff0[a][p] = 1.0;
                // the recharge decision on this landing is already made
                let land = od.flight_time_steps - e;
                for n in 1..=m {
                    let j = b.index.recharges(a, od.destination, n);
                    if n < land {
                        b.fix(j, 0.0);
                    } else if n == land {
                        b.fix(j, if vs.recharge_on_landing { 1.0 } else { 0.0 });
                    }
                }
                offset -= od.flight_time_steps as f64;
                if iso[p] {
                    // landing counter before the delay identity takes over
                    let land = od.flight_time_steps - e;
                    for n in 1..od.flight_time_steps.min(m + 1) {
                        let j = b.landing(a, p, n);
                        b.fix(j, if n >= land { 1.0 } else { 0.0 });
                    }
                }
            } else if iso[p] {
                for n in 1..od.flight_time_steps.min(m + 1) {
                    let j = b.landing(a, p, n);
                    b.fix(j, 0.0);
                }
            }
        }
        // reachability: no takeoff before the vehicle can be ready at the origin
        let (at, ready) = match vs.location {
            Location::Parked { vertiport } => {
                let mut r = vs.ready_at.saturating_sub(t0).max(1);
                if let Some(until) = vs.recharge_until {
                    r = r.max((until + 1).saturating_sub(t0));
                }
                (vertiport, r)
            }
            Location::Flying { pair, takeoff } => {
                let od = &net.od_pairs[pair];
                (od.destination, takeoff + od.flight_time_steps + kt - t0)
            }
        };
        for (p, od) in net.od_pairs.iter().enumerate() {
            let first = ready.saturating_add(reloc[at][od.origin]);
            let w0 = takeoff0[a][p];
            for n in 1..=m.min(first.saturating_sub(1)) {
                let j = b.w(a, p, 0, n);
                b.fix(j, w0);
            }
        }
    }
    for (a, row) in takeoff0.iter().enumerate() {
        for (p, &w0) in row.iter().enumerate() {
            let cap = w0 + flights_cap(net.od_pairs[p].flight_time_steps);
            for n in 0..=m {
                let j = b.w(a, p, 0, n);
                b.cap(j, cap);
            }
        }
    }

    // objective
    for a in 0..na {
        for (p, od) in net.od_pairs.iter().enumerate() {
            let j = b.w(a, p, 0, m);
            b.lp.objective[j] += od.flight_time_steps as f64;
        }
    }

    // service completion
    for (p, &qp) in q.iter().enumerate() {
        let need = qp.div_ceil(capacity) as f64;
        let w0: f64 = (0..na).map(|a| takeoff0[a][p]).sum();
        let coeffs = (0..na).map(|a| (b.w(a, p, 0, m), 1.0)).collect();
        b.row(Group::ServiceCompletion, coeffs, Relation::Ge, need + w0);
    }

    for a in 0..na {
        for (p, od) in net.od_pairs.iter().enumerate() {
            let last = od.flight_time_steps;
            for i in 0..=last {
                if b.index.w(a, p, i, 0).is_none() {
                    continue;
                }
                for n in 1..=m {
                    let c = vec![(b.w(a, p, i, n - 1), 1.0), (b.w(a, p, i, n), -1.0)];
                    b.row(Group::Monotone, c, Relation::Le, 0.0);
                }
            }
            if iso[p] {
                for n in last..=m {
                    let c = vec![(b.landing(a, p, n), 1.0), (b.w(a, p, 0, n - last), -1.0)];
                    b.row(Group::TransitDelay, c, Relation::Eq, 0.0);
                }
            } else {
                for i in 0..last {
                    for n in 1..=m {
                        let c = vec![(b.w(a, p, i + 1, n), 1.0), (b.w(a, p, i, n - 1), -1.0)];
                        b.row(Group::Progression, c, Relation::Eq, 0.0);
                    }
                }
            }
            let c = vec![(b.landing(a, p, m), 1.0), (b.w(a, p, 0, m), -1.0)];
            b.row(Group::LandByHorizon, c, Relation::Eq, 0.0);
        }
    }

    for a in 0..na {
        for v in 1..=nv {
            for n in 1..=m {
                // visits grow by landings at v
                let mut c = vec![(b.index.visit(a, v, n), 1.0), (b.index.visit(a, v, n - 1), -1.0)];
                for (p, od) in net.od_pairs.iter().enumerate() {
                    if od.destination == v {
                        c.push((b.landing(a, p, n), -1.0));
                        c.push((b.landing(a, p, n - 1), 1.0));
                    }
                }
                b.row(Group::VisitUpdate, c, Relation::Eq, 0.0);

                // takeoffs from v never exceed visits k_tau steps earlier
                let mut c = Vec::new();
                let mut rhs = 0.0;
                for (p, od) in net.od_pairs.iter().enumerate() {
                    if od.origin == v {
                        c.push((b.w(a, p, 0, n), 1.0));
                        rhs += takeoff0[a][p];
                    }
                }
                if n >= kt {
                    c.push((b.index.visit(a, v, n - kt), -1.0));
                } else {
                    rhs += b.lp.lower[b.index.visit(a, v, 0)];
                }
                b.row(Group::TakeoffAfterVisit, c, Relation::Le, rhs);
            }
        }
    }

    // sector capacity per overlap class
    let mut class_members: Vec<Vec<(usize, usize)>> = vec![Vec::new(); net.num_classes()];
    for (p, od) in net.od_pairs.iter().enumerate() {
        if iso[p] {
            continue;
        }
        for (i, c) in od.interior() {
            class_members[c].push((p, i));
        }
    }
    for members in class_members.iter().filter(|m| !m.is_empty()) {
        for n in 1..=m {
            let mut c = Vec::new();
            for a in 0..na {
                for &(p, i) in members {
                    c.push((b.w(a, p, i, n), 1.0));
                    c.push((b.w(a, p, i, n - 1), -1.0));
                }
            }
            b.row(Group::SectorCapacity, c, Relation::Le, 1.0);
        }
    }
    for (p, od) in net.od_pairs.iter().enumerate() {
        if !iso[p] || od.flight_time_steps < 2 {
            continue;
        }
        for n in 1..=m {
            let c = (0..na).flat_map(|a| [(b.w(a, p, 0, n), 1.0), (b.w(a, p, 0, n - 1), -1.0)]).collect();
            b.row(Group::RouteCapacity, c, Relation::Le, 1.0);
        }
    }

    // vertiport windows, with activity before the cycle start
    let rel = |s: usize| s as i64 - t0 as i64;
    for v in 1..=nv {
        let pads = net.pads(v) as f64;
        let hist_t: Vec<i64> = fleet.recent_takeoffs.iter().filter(|e| e.0 == v).map(|e| rel(e.1)).collect();
        let hist_l: Vec<i64> = fleet.recent_landings.iter().filter(|e| e.0 == v).map(|e| rel(e.1)).collect();
        for n in 1..=m {
            let lo = n as i64 - kt as i64;
            let before = hist_t.iter().filter(|&&s| s > lo && s <= 0).count() as f64;
            let mut c = Vec::new();
            for a in 0..na {
                for (p, od) in net.od_pairs.iter().enumerate() {
                    if od.origin == v {
                        c.push((b.w(a, p, 0, n), 1.0));
                        c.push((b.w(a, p, 0, m.min(n.saturating_sub(kt))), -1.0));
                    }
                }
            }
            b.row(Group::TakeoffWindow, c, Relation::Le, pads - before);

            let landed = hist_l.iter().filter(|&&s| s > lo && s <= 0 && s < n as i64).count() as f64;
            let mut c = Vec::new();
            for a in 0..na {
                for (p, od) in net.od_pairs.iter().enumerate() {
                    if od.origin == v {
                        c.push((b.w(a, p, 0, n), 1.0));
                        c.push((b.w(a, p, 0, n - 1), -1.0));
                    }
                    if od.destination == v && kt > 1 {
                        c.push((b.landing(a, p, n - 1), 1.0));
                        c.push((b.landing(a, p, n.saturating_sub(kt)), -1.0));
                    }
                }
            }
            b.row(Group::LandingWindow, c, Relation::Le, pads - landed);
        }
    }

    // energy
    for a in 0..na {
        for n in 1..=m {
            let mut c = vec![(b.index.charge(a, n), 1.0), (b.index.charge(a, n - 1), -1.0), (b.index.refill(a, n), -1.0)];
            for (p, od) in net.od_pairs.iter().enumerate() {
                c.push((b.w(a, p, 0, n), od.energy_per_flight));
                c.push((b.w(a, p, 0, n - 1), -od.energy_per_flight));
            }
            b.row(Group::ChargeBalance, c, Relation::Eq, 0.0);

            if n <= kc {
                let j = b.index.refill(a, n);
                b.fix(j, 0.0);
            } else {
                // recharge started at s refills to full at n = s + k_c
                let s = n - kc;
                let reference = b.index.charge(a, n - kc.max(1));
                let mut started = Vec::new();
                for v in 1..=nv {
                    started.push((b.index.recharges(a, v, s), -span));
                    started.push((b.index.recharges(a, v, s - 1), span));
                }
                let mut c = vec![(b.index.refill(a, n), 1.0)];
                c.extend(started.iter().copied());
                b.row(Group::RefillUpper, c, Relation::Le, 0.0);
                let mut c = vec![(b.index.refill(a, n), 1.0), (reference, 1.0)];
                c.extend(started);
                b.row(Group::RefillLower, c, Relation::Ge, prm.e_min);
            }

            for v in 1..=nv {
                let c = vec![(b.index.recharges(a, v, n - 1), 1.0), (b.index.recharges(a, v, n), -1.0)];
                b.row(Group::RechargeMonotone, c, Relation::Le, 0.0);
                let c = vec![
                    (b.index.recharges(a, v, n), 1.0),
                    (b.index.recharges(a, v, n - 1), -1.0),
                    (b.index.visit(a, v, n), -1.0),
                    (b.index.visit(a, v, n - 1), 1.0),
                ];
                b.row(Group::RechargeAtVisit, c, Relation::Le, 0.0);
                if kc >= 1 && n > kc {
                    let mut c = vec![(b.index.recharges(a, v, n - kc), 1.0), (b.index.recharges(a, v, n - kc - 1), -1.0)];
                    for (p, od) in net.od_pairs.iter().enumerate() {
                        if od.origin == v {
                            c.push((b.w(a, p, 0, n), 1.0));
                            c.push((b.w(a, p, 0, n - kc), -1.0));
                        }
                    }
                    b.row(Group::RechargeBlocking, c, Relation::Le, 1.0);
                }
            }
        }
    }

    let Builder { lp, index, integer_vars, groups, .. } = b;
    Ok(TfmpInstance {
        lp,
        index,
        integer_vars,
        groups,
        meta: TfmpMeta {
            net: net.clone(),
            fleet: fleet.clone(),
            horizon,
            requests: q.to_vec(),
            capacity,
            preprocessed: reduce,
            objective_offset: offset,
        },
    })
}

impl TfmpInstance {
    pub fn num_vars(&self) -> usize {
        self.lp.num_vars()
    }

    pub fn num_constraints(&self) -> usize {
        self.lp.num_constraints()
    }

    pub fn group_counts(&self) -> Vec<(Group, usize)> {
        let mut out: Vec<(Group, usize)> = Vec::new();
        for &g in &self.groups {
            match out.iter_mut().find(|e| e.0 == g) {
                Some(e) => e.1 += 1,
                None => out.push((g, 1)),
            }
        }
        out
    }

    /// Total flight steps of the flights launched in the cycle.
    pub fn objective(&self, sol: &Solution) -> f64 {
        sol.objective_value + self.meta.objective_offset
    }

    pub fn solve(&self, opts: &IlpOptions) -> Result<Solution, TfmpError> {
        Ok(solve_ilp_with(&self.lp, &self.integer_vars, opts)?)
    }

    /// LP-format text plus a tab separated `column<TAB>name` sidecar.
    pub fn dump(&self) -> (String, String) {
        let names = self.index.names();
        let lp = write_lp(&self.lp, &self.integer_vars, Some(&names));
        let mut side = String::from("column\tname\tkind\tvehicle\tstep\tpair\tlocus\n");
        for (j, k) in self.index.keys.iter().enumerate() {
            let pair = k.pair.map_or(String::new(), |p| p.to_string());
            let _ = writeln!(side, "{j}\t{}\t{:?}\t{}\t{}\t{pair}\t{}", names[j], k.kind, k.vehicle, k.step, k.locus);
        }
        (lp, side)
    }
}

/// Read takeoffs and recharge starts from first differences.
pub fn decode_schedule(inst: &TfmpInstance, sol: &Solution) -> Result<Schedule, TfmpError> {
    if sol.status != Status::Optimal {
        return Err(TfmpError::NotOptimal(sol.status));
    }
    let meta = &inst.meta;
    let net = &meta.net;
    let m = meta.horizon;
    let t0 = meta.fleet.time;
    let int = |j: usize| -> Result<usize, TfmpError> {
        let x = sol.values[j];
        let r = x.round();
        if (x - r).abs() > 1e-6 || r < 0.0 {
            return Err(TfmpError::NonIntegralSolution(inst.index.keys[j].name()));
        }
        Ok(r as usize)
    };
    for &j in &inst.integer_vars {
        int(j)?;
    }
    let mut flights = Vec::new();
    let mut recharge_at = Vec::new();
    for a in 0..meta.fleet.len() {
        for (p, od) in net.od_pairs.iter().enumerate() {
            for i in 0..=od.flight_time_steps {
                if inst.index.w(a, p, i, 0).is_none() {
                    continue;
                }
                for n in 1..=m {
                    let d = int(inst.index.w(a, p, i, n).unwrap())? as i64 - int(inst.index.w(a, p, i, n - 1).unwrap())? as i64;
                    assert!(d == 0 || d == 1, "sector counter jumped by {d}");
                    if i == 0 && d == 1 {
                        flights.push(Flight { vehicle: a, pair: p, takeoff: t0 + n, passengers: 0, recharge: false });
                    }
                }
            }
        }
        for v in 1..=net.num_vertiports() {
            for n in 1..=m {
                if int(inst.index.recharges(a, v, n))? > int(inst.index.recharges(a, v, n - 1))? {
                    recharge_at.push((a, t0 + n));
                }
            }
        }
    }
    for f in flights.iter_mut() {
        let land = f.takeoff + net.od_pairs[f.pair].flight_time_steps;
        f.recharge = recharge_at.contains(&(f.vehicle, land));
    }
    let mut sched = Schedule { flights, start: t0, end: t0 };
    sched.finish();
    assign_passengers(&mut sched, &meta.requests, meta.capacity);
    Ok(sched)
}

/// Fill flights in takeoff order until each pair's requests are covered.
pub fn assign_passengers(sched: &mut Schedule, q: &[usize], capacity: usize) {
    let mut left = q.to_vec();
    for f in sched.flights.iter_mut() {
        let take = left[f.pair].min(capacity);
        f.passengers = take;
        left[f.pair] -= take;
    }
}

/// Build, optionally collapse isolated routes, solve and decode.
pub fn solve_cycle(
    net: &Network,
    fleet: &FleetSnapshot,
    q: &[usize],
    horizon: usize,
    capacity: usize,
    reduce: bool,
    opts: &IlpOptions,
) -> Result<(Option<Schedule>, Solution, f64), TfmpError> {
    let mut inst = build_instance(net, fleet, q, horizon, capacity)?;
    if reduce {
        inst = preprocess(&inst);
    }
    let sol = inst.solve(opts)?;
    if sol.status != Status::Optimal {
        return Ok((None, sol, f64::INFINITY));
    }
    let obj = inst.objective(&sol);
    Ok((Some(decode_schedule(&inst, &sol)?), sol, obj))
}
