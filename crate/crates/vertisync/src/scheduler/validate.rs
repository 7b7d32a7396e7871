//! Independent re-check of a schedule against the cycle constraints.

use std::collections::HashMap;

use serde::Serialize;

use super::schedule::{FleetSnapshot, Location, Schedule};
use crate::network::Network;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ViolationKind {
    /// Two vehicles in one overlap class at one step.
    SectorCapacity,
    TakeoffWindow,
    LandingWindow,
    Progression,
    Service,
    Passengers,
    Energy,
    RechargeBlocking,
    /// Takeoff from somewhere the vehicle is not, or before turnaround.
    Location,
    Turnaround,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub step: usize,
    pub detail: String,
}

pub fn validate_schedule(
    sched: &Schedule,
    net: &Network,
    fleet0: &FleetSnapshot,
    q: &[usize],
    capacity: usize,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let prm = &net.params;
    let kt = prm.tau_steps;
    let kc = prm.recharge_steps;
    let t0 = fleet0.time;
    let mut push = |kind, step, detail: String| out.push(Violation { kind, step, detail });

    let mut takeoffs: HashMap<(usize, usize), usize> = HashMap::new();
    let mut landings: HashMap<(usize, usize), usize> = HashMap::new();
    let mut occupancy: HashMap<(usize, usize), usize> = HashMap::new();
    for &(v, s) in &fleet0.recent_takeoffs {
        *takeoffs.entry((v, s)).or_default() += 1;
    }
    for &(v, s) in &fleet0.recent_landings {
        *landings.entry((v, s)).or_default() += 1;
    }
    let mut occupy = |p: usize, takeoff: usize, after: usize| {
        for (i, c) in net.od_pairs[p].interior() {
            if takeoff + i > after {
                *occupancy.entry((c, takeoff + i)).or_default() += 1;
            }
        }
    };

    let mut last_step = t0;
    for (a, vs) in fleet0.vehicles.iter().enumerate() {
        // per-vehicle replay
        let (mut at, mut ready, mut charge, mut blocked_until) = match vs.location {
            Location::Parked { vertiport } => {
                let full = vs.recharge_until.is_some();
                (vertiport, vs.ready_at, if full { prm.e_max } else { vs.charge }, vs.recharge_until.unwrap_or(0))
            }
            Location::Flying { pair, takeoff } => {
                let od = &net.od_pairs[pair];
                let land = takeoff + od.flight_time_steps;
                occupy(pair, takeoff, t0);
                *landings.entry((od.destination, land)).or_default() += 1;
                last_step = last_step.max(land);
                let (c, b) = if vs.recharge_on_landing { (prm.e_max, land + kc) } else { (vs.charge, 0) };
                (od.destination, land + kt, c, b)
            }
        };
        let mut flights: Vec<_> = sched.flights.iter().filter(|f| f.vehicle == a).collect();
        flights.sort_by_key(|f| f.takeoff);
        for f in flights {
            let Some(od) = net.od_pairs.get(f.pair) else {
                push(ViolationKind::Progression, f.takeoff, format!("vehicle {a} on unknown pair {}", f.pair));
                continue;
            };
            if f.takeoff <= t0 {
                push(ViolationKind::Progression, f.takeoff, format!("vehicle {a} takes off before the cycle start"));
            }
            if od.origin != at {
                push(ViolationKind::Location, f.takeoff, format!("vehicle {a} departs {} but is at {at}", od.origin));
            } else if f.takeoff < ready {
                push(ViolationKind::Turnaround, f.takeoff, format!("vehicle {a} departs at {} before {ready}", f.takeoff));
            }
            if f.takeoff <= blocked_until {
                push(ViolationKind::RechargeBlocking, f.takeoff, format!("vehicle {a} departs while recharging"));
            }
            charge -= od.energy_per_flight;
            if charge < prm.e_min - 1e-9 {
                push(ViolationKind::Energy, f.takeoff, format!("vehicle {a} charge {charge} below minimum"));
            }
            if f.passengers > capacity {
                push(ViolationKind::Passengers, f.takeoff, format!("{} passengers exceed capacity", f.passengers));
            }
            let land = f.takeoff + od.flight_time_steps;
            *takeoffs.entry((od.origin, f.takeoff)).or_default() += 1;
            *landings.entry((od.destination, land)).or_default() += 1;
            occupy(f.pair, f.takeoff, 0);
            last_step = last_step.max(land);
            at = od.destination;
            ready = land + kt;
            if f.recharge {
                charge = prm.e_max;
                blocked_until = land + kc;
            }
        }
    }

    let mut occ: Vec<_> = occupancy.into_iter().filter(|e| e.1 > 1).collect();
    occ.sort();
    for ((c, step), n) in occ {
        push(ViolationKind::SectorCapacity, step, format!("{n} vehicles in {}", net.class_names[c]));
    }

    for v in 1..=net.num_vertiports() {
        let pads = net.pads(v);
        let t = |s: usize| takeoffs.get(&(v, s)).copied().unwrap_or(0);
        let l = |s: usize| landings.get(&(v, s)).copied().unwrap_or(0);
        for n in t0 + 1..=last_step + kt {
            let lo = (n + 1).saturating_sub(kt);
            let window: usize = (lo..=n).map(t).sum();
            if window > pads {
                push(ViolationKind::TakeoffWindow, n, format!("{window} takeoffs at {v} within one window"));
            }
            let near: usize = (lo..n).map(l).sum();
            if t(n) + near > pads {
                push(ViolationKind::LandingWindow, n, format!("{} takeoffs and {near} recent landings at {v}", t(n)));
            }
        }
    }

    let served = sched.served(net);
    for (p, (&s, &need)) in served.iter().zip(q).enumerate() {
        if s < need {
            push(ViolationKind::Service, sched.end, format!("pair {} served {s} of {need}", net.od_pairs[p].label()));
        }
    }
    out
}
