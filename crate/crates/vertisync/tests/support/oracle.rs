//! Exhaustive reference for single cycles on tiny instances.
//!
//! Walks every step of the horizon and tries every combination of takeoffs
//! (and recharge choices on landing) for every vehicle, under the cycle
//! rules written out directly: sector classes hold one vehicle, at most
//! `N_v` takeoffs per `k_tau` window, takeoffs plus landings of the previous
//! `k_tau - 1` steps within `N_v`, turnaround of `k_tau` after landing,
//! no takeoff until `k_c` steps after a recharge starts, charge never below
//! `E_min`, and every flight lands by the horizon.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vertisync::network::{build_network, Network, NetworkSpec, ParamsSpec, RouteSpec, VertiportSpec};
use vertisync::scheduler::{FleetSnapshot, Location};

#[derive(Clone, Copy, Debug)]
struct Veh {
    at: usize,
    ready: usize,
    charge: f64,
    blocked: Option<usize>,
}

struct Search<'a> {
    net: &'a Network,
    end: usize,
    need: Vec<usize>,
    min_t: Vec<usize>,
    occupied: HashMap<(usize, usize), ()>,
    takeoffs: HashMap<(usize, usize), usize>,
    landings: HashMap<(usize, usize), usize>,
    best: Option<usize>,
}

impl Search<'_> {
    fn lower_bound(&self, served: &[usize]) -> usize {
        served.iter().zip(&self.need).zip(&self.min_t).map(|((&s, &n), &t)| n.saturating_sub(s) * t).sum()
    }

    fn count(map: &HashMap<(usize, usize), usize>, v: usize, s: usize) -> usize {
        map.get(&(v, s)).copied().unwrap_or(0)
    }

    /// Whether one more takeoff from `v` at `n` keeps both vertiport rules.
    fn pad_ok(&self, v: usize, n: usize) -> bool {
        let kt = self.net.params.tau_steps;
        let pads = self.net.pads(v);
        // every window [w - kt + 1, w] that contains n
        for w in n..n + kt {
            let lo = (w + 1).saturating_sub(kt);
            let k: usize = (lo..=w).map(|s| Self::count(&self.takeoffs, v, s)).sum();
            if k + 1 > pads {
                return false;
            }
        }
        let lo = (n + 1).saturating_sub(kt);
        let near: usize = (lo..n).map(|s| Self::count(&self.landings, v, s)).sum();
        Self::count(&self.takeoffs, v, n) + 1 + near <= pads
    }

    fn sectors_free(&self, p: usize, n: usize) -> bool {
        self.net.od_pairs[p].interior().all(|(i, c)| !self.occupied.contains_key(&(c, n + i)))
    }

    fn step(&mut self, n: usize, fleet: &mut Vec<Veh>, served: &mut Vec<usize>, cost: usize) {
        if let Some(b) = self.best {
            if cost + self.lower_bound(served) >= b {
                return;
            }
        }
        if n > self.end {
            if served.iter().zip(&self.need).all(|(s, q)| s >= q) {
                self.best = Some(cost);
            }
            return;
        }
        self.vehicle(n, 0, fleet, served, cost);
    }

    fn vehicle(&mut self, n: usize, a: usize, fleet: &mut Vec<Veh>, served: &mut Vec<usize>, cost: usize) {
        if a == fleet.len() {
            self.step(n + 1, fleet, served, cost);
            return;
        }
        // stay put
        self.vehicle(n, a + 1, fleet, served, cost);
        let v = fleet[a];
        if v.ready > n || v.blocked.is_some_and(|b| n <= b) {
            return;
        }
        let prm = self.net.params.clone();
        for p in 0..self.net.num_pairs() {
            let od = self.net.od_pairs[p].clone();
            let land = n + od.flight_time_steps;
            if od.origin != v.at || land > self.end || v.charge - od.energy_per_flight < prm.e_min - 1e-9 {
                continue;
            }
            if !self.pad_ok(od.origin, n) || !self.sectors_free(p, n) {
                continue;
            }
            for (i, c) in od.interior() {
                self.occupied.insert((c, n + i), ());
            }
            *self.takeoffs.entry((od.origin, n)).or_default() += 1;
            *self.landings.entry((od.destination, land)).or_default() += 1;
            served[p] += 1;
            for recharge in [false, true] {
                fleet[a] = Veh {
                    at: od.destination,
                    ready: land + prm.tau_steps,
                    charge: if recharge { prm.e_max } else { v.charge - od.energy_per_flight },
                    blocked: if recharge { Some(land + prm.recharge_steps) } else { v.blocked },
                };
                self.vehicle(n, a + 1, fleet, served, cost + od.flight_time_steps);
            }
            fleet[a] = v;
            served[p] -= 1;
            *self.takeoffs.get_mut(&(od.origin, n)).unwrap() -= 1;
            *self.landings.get_mut(&(od.destination, land)).unwrap() -= 1;
            for (i, c) in od.interior() {
                self.occupied.remove(&(c, n + i));
            }
        }
    }
}

/// Minimum total flight steps of a cycle over `(t0, t0 + horizon]` that
/// carries `q` with vehicles of `capacity`, or `None` when none exists.
/// The fleet must be parked with no recent vertiport activity.
pub fn brute_force(net: &Network, fleet: &FleetSnapshot, q: &[usize], horizon: usize, capacity: usize) -> Option<usize> {
    assert!(fleet.recent_takeoffs.is_empty() && fleet.recent_landings.is_empty());
    let t0 = fleet.time;
    let mut vehicles: Vec<Veh> = fleet
        .vehicles
        .iter()
        .map(|s| match s.location {
            Location::Parked { vertiport } => Veh {
                at: vertiport,
                ready: s.ready_at.max(t0 + 1),
                charge: if s.recharge_until.is_some() { net.params.e_max } else { s.charge },
                blocked: s.recharge_until,
            },
            Location::Flying { .. } => panic!("oracle takes parked fleets only"),
        })
        .collect();
    let mut s = Search {
        net,
        end: t0 + horizon,
        need: q.iter().map(|&x| x.div_ceil(capacity)).collect(),
        min_t: net.od_pairs.iter().map(|p| p.flight_time_steps).collect(),
        occupied: HashMap::new(),
        takeoffs: HashMap::new(),
        landings: HashMap::new(),
        best: None,
    };
    let mut served = vec![0; net.num_pairs()];
    s.step(t0 + 1, &mut vehicles, &mut served, 0);
    s.best
}

/// A random tiny cycle: two or three vertiports, one or two routes out of
/// vertiport 1 with their reverses, up to two vehicles and a short horizon.
pub struct Tiny {
    pub net: Network,
    pub fleet: FleetSnapshot,
    pub q: Vec<usize>,
    pub horizon: usize,
    pub capacity: usize,
}

pub fn random_tiny(seed: u64) -> Tiny {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nv = rng.random_range(2..=3usize);
    let kt = rng.random_range(1..=3usize);
    let kc = rng.random_range(0..=3usize);
    let params = ParamsSpec {
        tau_minutes: kt as f64,
        step_minutes: 1.0,
        recharge_minutes: kc as f64,
        e_min: 10.0,
        e_max: 100.0,
    };
    let vertiports = (1..=nv).map(|id| VertiportSpec { id, pads: rng.random_range(1..=2) }).collect();
    let mut routes = Vec::new();
    for d in 2..=nv {
        let sectors = rng.random_range(3..=5usize);
        let energy = [20.0, 35.0, 50.0][rng.random_range(0..3)];
        let mut shared = Vec::new();
        if d == 3 && rng.random_bool(0.6) {
            // both outbound routes cross one shared sector
            shared.push((1, "joint".to_string()));
        }
        if d == 2 && nv == 3 && rng.random_bool(0.6) {
            shared.push((1, "joint".to_string()));
        }
        routes.push(RouteSpec { origin: 1, destination: d, sectors, energy, shared, mirror: None });
        if rng.random_bool(0.5) {
            routes.push(RouteSpec { origin: d, destination: 1, sectors: 0, energy, shared: Vec::new(), mirror: Some((1, d)) });
        } else {
            let back = rng.random_range(3..=5usize);
            routes.push(RouteSpec { origin: d, destination: 1, sectors: back, energy, shared: Vec::new(), mirror: None });
        }
    }
    let net = build_network(&NetworkSpec { params, vertiports, routes }).expect("tiny network builds");
    let na = rng.random_range(1..=2usize);
    let placement: Vec<usize> = (0..na).map(|_| rng.random_range(1..=nv)).collect();
    let mut fleet = FleetSnapshot::parked(&net, &placement);
    for v in fleet.vehicles.iter_mut() {
        if rng.random_bool(0.3) {
            v.charge = 60.0;
        }
    }
    let mut q = vec![0; net.num_pairs()];
    let total = rng.random_range(1..=3usize);
    for _ in 0..total {
        let p = rng.random_range(0..net.num_pairs());
        q[p] += 1;
    }
    let capacity = if rng.random_bool(0.25) { 2 } else { 1 };
    let horizon = rng.random_range(6..=14usize);
    Tiny { net, fleet, q, horizon, capacity }
}
