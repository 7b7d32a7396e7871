//! Service-vector construction of a cycle schedule.
//!
//! Each vector with positive allocation runs in turn: vehicles are first
//! distributed to the active origins, then the vector's periodic takeoff
//! pattern is replayed until its share of the trips is flown. A symmetric
//! vector brings vehicles back on its own reverse slots. Otherwise the
//! airspace is drained and the reversed pattern flies them back before
//! service resumes. Every flight is also checked against a reservation
//! table, so slots that would conflict with off-pattern flights are skipped.

use serde::Serialize;

use super::reserve::ReservationTable;
use super::schedule::{Flight, FleetSnapshot, Location, Schedule};
use super::ScheduleError;
use crate::network::Network;
use crate::servicevec::{classify, compute_c, find_offsets, fleet_bound_theorem1, reversed, ServiceVector, Symmetry};
use crate::solver::solve_allocation_lp;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Veh {
    /// Current or next vertiport.
    pub at: usize,
    pub ready: usize,
    pub charge: f64,
    /// Parked without the charge for every route out and no recharge
    /// pending. The engine leaves such a vehicle where it is.
    pub stranded: bool,
}

/// Vehicle availability shared by the constructive and FCFS engines.
#[derive(Clone, Debug)]
pub(crate) struct Fleet {
    pub vehicles: Vec<Veh>,
    pub flights: Vec<Flight>,
    pub table: ReservationTable,
}

impl Fleet {
    pub fn new(net: &Network, snap: &FleetSnapshot) -> Self {
        let prm = &net.params;
        let vehicles = snap
            .vehicles
            .iter()
            .map(|vs| match vs.location {
                Location::Parked { vertiport } => {
                    let mut ready = vs.ready_at.max(snap.time + 1);
                    let mut charge = vs.charge;
                    if let Some(until) = vs.recharge_until {
                        ready = ready.max(until + 1);
                        charge = prm.e_max;
                    }
                    let need = net
                        .od_pairs
                        .iter()
                        .filter(|p| p.origin == vertiport)
                        .map(|p| p.energy_per_flight)
                        .fold(0.0, f64::max);
                    let stranded = charge - need < prm.e_min - 1e-9;
                    Veh { at: vertiport, ready, charge, stranded }
                }
                Location::Flying { pair, takeoff } => {
                    let od = &net.od_pairs[pair];
                    let land = takeoff + od.flight_time_steps;
                    if vs.recharge_on_landing {
                        let wait = prm.tau_steps.max(prm.recharge_steps + 1);
                        Veh { at: od.destination, ready: land + wait, charge: prm.e_max, stranded: false }
                    } else {
                        Veh { at: od.destination, ready: land + prm.tau_steps, charge: vs.charge, stranded: false }
                    }
                }
            })
            .collect();
        Self { vehicles, flights: Vec::new(), table: ReservationTable::from_snapshot(net, snap) }
    }

    pub fn can_take(&self, net: &Network, a: usize, pair: usize) -> bool {
        let v = &self.vehicles[a];
        let od = &net.od_pairs[pair];
        v.at == od.origin && v.charge - od.energy_per_flight >= net.params.e_min - 1e-9
    }

    /// Commit a flight. A recharge starts on landing whenever the charge
    /// left could not cover every route out of the destination.
    pub fn fly(&mut self, net: &Network, a: usize, pair: usize, t: usize, passengers: usize) {
        let prm = &net.params;
        let od = &net.od_pairs[pair];
        debug_assert!(self.can_take(net, a, pair) && t >= self.vehicles[a].ready);
        debug_assert!(self.table.can_fly(net, pair, t));
        self.table.commit(net, pair, t);
        let land = t + od.flight_time_steps;
        let v = &mut self.vehicles[a];
        v.charge -= od.energy_per_flight;
        let next = net
            .od_pairs
            .iter()
            .filter(|q| q.origin == od.destination)
            .map(|q| q.energy_per_flight)
            .fold(0.0, f64::max);
        let recharge = prm.recharge_steps == 0 || v.charge - next < prm.e_min - 1e-9;
        v.at = od.destination;
        if recharge {
            v.charge = prm.e_max;
            v.ready = land + prm.tau_steps.max(prm.recharge_steps + usize::from(prm.recharge_steps > 0));
        } else {
            v.ready = land + prm.tau_steps;
        }
        self.flights.push(Flight { vehicle: a, pair, takeoff: t, passengers, recharge });
    }

    pub fn supply(&self, v: usize) -> usize {
        self.vehicles.iter().filter(|x| x.at == v && !x.stranded).count()
    }

    pub fn usable(&self) -> usize {
        self.vehicles.iter().filter(|x| !x.stranded).count()
    }

    pub fn last_landing(&self, net: &Network, floor: usize) -> usize {
        self.flights.iter().map(|f| f.takeoff + net.od_pairs[f.pair].flight_time_steps).fold(floor, usize::max)
    }

    /// Fly vehicle `a` to vertiport `to` along the fastest route sequence,
    /// each leg at its earliest conflict-free step. Returns false if a leg
    /// is out of reach on the current charge.
    pub fn relocate(&mut self, net: &Network, a: usize, to: usize, from_step: usize, left: &mut [usize], cap: usize) -> bool {
        let Ok(path) = net.rebalance_path(self.vehicles[a].at, to) else {
            return false;
        };
        for p in path {
            if !self.can_take(net, a, p) {
                return false;
            }
            let t = self.table.earliest(net, p, self.vehicles[a].ready.max(from_step));
            let pax = left[p].min(cap);
            left[p] -= pax;
            self.fly(net, a, p, t, pax);
        }
        true
    }
}

/// Largest-remainder split of `total` over `weights`, at least one each
/// when `total` allows it.
pub fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let n = weights.len();
    let sum: f64 = weights.iter().sum();
    if n == 0 || sum <= 0.0 {
        return vec![0; n];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let rest = total - out.iter().sum::<usize>();
    for &i in order.iter().take(rest) {
        out[i] += 1;
    }
    for i in 0..n {
        if out[i] == 0 {
            let (j, &big) = out.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).unwrap();
            if big > 1 {
                out[j] -= 1;
                out[i] = 1;
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstructiveOutcome {
    pub schedule: Schedule,
    /// Allocation `K_i*` in steps, one per vector.
    pub allocation: Vec<f64>,
    /// Upper bound on the cycle length in steps.
    pub bound: f64,
}

/// `sum (1 + c_i) K_i + sum C_i' + n (|A| + 1) T_max` over vectors with
/// positive allocation, in steps.
pub fn cycle_length_bound(net: &Network, r: &[ServiceVector], k: &[f64], fleet: usize) -> Result<f64, ScheduleError> {
    let kt = net.params.tau_steps as f64;
    let tmax = net.max_flight_steps() as f64;
    let mut total = 0.0;
    for (v, &ki) in r.iter().zip(k) {
        if ki <= 1e-9 {
            continue;
        }
        let c = compute_c(net, v, fleet)?;
        let fixed = if v.symmetric { c * kt } else { (c - 1.0) * kt };
        total += (1.0 + c) * ki + fixed + (fleet as f64 + 1.0) * tmax;
    }
    Ok(total)
}

const STALL_STEPS: usize = 1_000_000;

struct Run<'a> {
    net: &'a Network,
    fleet: Fleet,
    /// Passengers still to carry per pair.
    left: Vec<usize>,
    cap: usize,
    t0: usize,
}

impl Run<'_> {
    fn trips_left(&self, p: usize) -> usize {
        self.left[p].div_ceil(self.cap)
    }

    fn depart(&mut self, a: usize, p: usize, t: usize) {
        let pax = self.left[p].min(self.cap);
        self.left[p] -= pax;
        self.fleet.fly(self.net, a, p, t, pax);
    }

    /// Ready vehicle at the origin of `p` able to fly it at `t`.
    fn pick(&self, p: usize, t: usize) -> Option<usize> {
        (0..self.fleet.vehicles.len())
            .filter(|&a| self.fleet.vehicles[a].ready <= t && self.fleet.can_take(self.net, a, p))
            .min_by_key(|&a| (self.fleet.vehicles[a].ready, a))
    }

    fn drain(&self) -> usize {
        self.fleet.last_landing(self.net, self.t0) + 1
    }

    /// Move spare vehicles so each vertiport holds `target[v]`.
    fn distribute(&mut self, target: &[usize], from: usize) {
        let nv = self.net.num_vertiports();
        for to in 1..=nv {
            while self.fleet.supply(to) < target[to] {
                let donor = (0..self.fleet.vehicles.len())
                    .filter(|&a| {
                        let at = self.fleet.vehicles[a].at;
                        at != to && !self.fleet.vehicles[a].stranded && self.fleet.supply(at) > target[at]
                    })
                    .min_by_key(|&a| {
                        let v = &self.fleet.vehicles[a];
                        (self.net.rebalance_time(v.at, to).saturating_add(v.ready.saturating_sub(from)), a)
                    });
                let Some(a) = donor else { break };
                let mut left = std::mem::take(&mut self.left);
                let ok = self.fleet.relocate(self.net, a, to, from, &mut left, self.cap);
                self.left = left;
                if !ok {
                    break;
                }
            }
        }
    }

    fn run_vector(&mut self, r: &ServiceVector, quota: &mut [usize], sym: Symmetry) -> Result<(), ScheduleError> {
        let net = self.net;
        let kt = net.params.tau_steps;
        let offsets = find_offsets(net, &r.counts)?.ok_or(ScheduleError::NoPattern)?;
        let back = match sym {
            Symmetry::Reversible if !r.symmetric => reversed(net, &r.counts)
                .map(|c| find_offsets(net, &c).map(|o| o.map(|o| (c, o))))
                .transpose()?
                .flatten(),
            _ => None,
        };
        let support: Vec<usize> = r.active().collect();
        let shares = apportion(&support.iter().map(|&p| r.rates[p]).collect::<Vec<_>>(), self.fleet.usable());

        let nv = net.num_vertiports();
        let need_at = |quota: &[usize], v: usize| -> usize {
            support.iter().filter(|&&p| net.od_pairs[p].origin == v).map(|&p| quota[p]).sum()
        };
        let mut target = vec![0; nv + 1];
        for (&p, &n) in support.iter().zip(&shares) {
            target[net.od_pairs[p].origin] += n.min(quota[p]);
        }
        let mut s = self.drain();
        self.distribute(&target, s);
        s = self.drain();

        let mut stalls = 0;
        let mut t = s;
        while support.iter().any(|&p| quota[p] > 0) {
            let phase = (t - s) % kt;
            let mut fired = false;
            for &p in &support {
                if !offsets[p].contains(&phase) {
                    continue;
                }
                let od = &net.od_pairs[p];
                let serve = quota[p] > 0;
                let ret = !serve
                    && self.fleet.supply(od.origin) > need_at(quota, od.origin)
                    && self.fleet.supply(od.destination) < need_at(quota, od.destination);
                if !(serve || ret) || !self.fleet.table.can_fly(net, p, t) {
                    continue;
                }
                if let Some(a) = self.pick(p, t) {
                    self.depart(a, p, t);
                    if serve {
                        quota[p] -= 1;
                        stalls = 0;
                    }
                    for &q in &support {
                        quota[q] = quota[q].min(self.trips_left(q));
                    }
                    fired = true;
                }
            }
            if !fired && self.starved(&support, quota) {
                stalls += 1;
                if stalls > 4 * self.fleet.vehicles.len() + 8 {
                    return Err(ScheduleError::Stalled);
                }
                let start = self.drain();
                let moved = match &back {
                    Some((counts, offs)) => self.reverse_phase(counts, offs, quota, &support, start),
                    None => false,
                };
                if !moved {
                    let mut target = vec![0; nv + 1];
                    for (&p, &n) in support.iter().zip(&shares) {
                        target[net.od_pairs[p].origin] += n.min(quota[p]);
                    }
                    let before = self.fleet.flights.len();
                    self.distribute(&target, start);
                    if self.fleet.flights.len() == before {
                        return Err(ScheduleError::Stalled);
                    }
                }
                s = self.drain();
                t = s;
                continue;
            }
            t += 1;
            if t > s + STALL_STEPS {
                return Err(ScheduleError::Stalled);
            }
        }
        Ok(())
    }

    /// Some pair has work left but no vehicle at or bound for its origin,
    /// and the vector's own slots cannot bring one.
    fn starved(&self, support: &[usize], quota: &[usize]) -> bool {
        let net = self.net;
        let need_at = |v: usize| -> usize {
            support.iter().filter(|&&p| net.od_pairs[p].origin == v).map(|&p| quota[p]).sum()
        };
        // a slot of q brings a vehicle to o only when it serves or returns a spare
        let feeds = |q: usize| {
            let from = net.od_pairs[q].origin;
            let have = self.fleet.supply(from);
            have > 0 && (quota[q] > 0 || have > need_at(from))
        };
        support.iter().any(|&p| {
            let o = net.od_pairs[p].origin;
            quota[p] > 0
                && self.fleet.supply(o) == 0
                && !support.iter().any(|&q| net.od_pairs[q].destination == o && feeds(q))
        })
    }

    /// Replay the reversed pattern, returning vehicles to origins short of
    /// them. Reports whether anything flew.
    fn reverse_phase(&mut self, counts: &[usize], offsets: &[Vec<usize>], quota: &[usize], support: &[usize], s: usize) -> bool {
        let net = self.net;
        let kt = net.params.tau_steps;
        let rev: Vec<usize> = (0..counts.len()).filter(|&p| counts[p] > 0).collect();
        let need_at = |v: usize| -> usize {
            support.iter().filter(|&&p| net.od_pairs[p].origin == v).map(|&p| quota[p]).sum()
        };
        let mut any = false;
        let mut t = s;
        loop {
            // stop once no reverse leg can both find a spare vehicle and fill a gap
            let useful = |f: &Fleet, p: usize| {
                let od = &net.od_pairs[p];
                f.supply(od.destination) < need_at(od.destination)
                    && f.supply(od.origin) > need_at(od.origin)
                    && f.vehicles.iter().any(|v| v.at == od.origin && v.charge - od.energy_per_flight >= net.params.e_min - 1e-9)
            };
            if !rev.iter().any(|&p| useful(&self.fleet, p)) {
                return any;
            }
            let phase = (t - s) % kt;
            for &p in &rev {
                if offsets[p].contains(&phase) && useful(&self.fleet, p) && self.fleet.table.can_fly(net, p, t) {
                    if let Some(a) = self.pick(p, t) {
                        self.depart(a, p, t);
                        any = true;
                    }
                }
            }
            t += 1;
        }
    }
}

/// Build a conflict-free schedule serving `q` from the vectors in `r`.
pub fn constructive_cycle(
    q: &[usize],
    r: &[ServiceVector],
    fleet: &FleetSnapshot,
    net: &Network,
    capacity: usize,
) -> Result<ConstructiveOutcome, ScheduleError> {
    let t0 = fleet.time;
    if q.iter().all(|&x| x == 0) {
        return Ok(ConstructiveOutcome { schedule: Schedule::empty(t0), allocation: vec![0.0; r.len()], bound: 0.0 });
    }
    let vehicles = Fleet::new(net, fleet);
    let usable = vehicles.usable();
    let bound_fleet = fleet_bound_theorem1(r);
    if usable < bound_fleet {
        return Err(ScheduleError::FleetTooSmall(usable, bound_fleet));
    }
    let trips: Vec<f64> = q.iter().map(|&x| x.div_ceil(capacity) as f64).collect();
    let rates: Vec<Vec<f64>> = r.iter().map(|v| v.rates.clone()).collect();
    let k = solve_allocation_lp(&trips, &rates)?;
    let bound = cycle_length_bound(net, r, &k, usable)?;
    let mut run = Run { net, fleet: vehicles, left: q.to_vec(), cap: capacity, t0 };

    let mut alloc = k.clone();
    for _round in 0..8 {
        let active: Vec<usize> = (0..r.len()).filter(|&i| alloc[i] > 1e-9).collect();
        for (n, &i) in active.iter().enumerate() {
            let last = n + 1 == active.len();
            let mut quota: Vec<usize> = (0..net.num_pairs())
                .map(|p| {
                    let share = if last { usize::MAX } else { (r[i].rates[p] * alloc[i] - 1e-9).ceil().max(0.0) as usize };
                    if r[i].rates[p] > 0.0 {
                        share.min(run.trips_left(p))
                    } else {
                        0
                    }
                })
                .collect();
            if quota.iter().all(|&x| x == 0) {
                continue;
            }
            let sym = classify(net, &r[i])?;
            run.run_vector(&r[i], &mut quota, sym)?;
        }
        if run.left.iter().all(|&x| x == 0) {
            break;
        }
        let rest: Vec<f64> = (0..q.len()).map(|p| run.trips_left(p) as f64).collect();
        alloc = solve_allocation_lp(&rest, &rates)?;
    }
    if let Some(p) = run.left.iter().position(|&x| x > 0) {
        return Err(ScheduleError::UncoveredDemand(p));
    }
    let mut schedule = Schedule { flights: run.fleet.flights, start: t0, end: t0 };
    schedule.finish();
    Ok(ConstructiveOutcome { schedule, allocation: k, bound })
}

pub fn constructive_schedule(
    q: &[usize],
    r: &[ServiceVector],
    fleet: &FleetSnapshot,
    net: &Network,
    capacity: usize,
) -> Result<Schedule, ScheduleError> {
    constructive_cycle(q, r, fleet, net, capacity).map(|o| o.schedule)
}
