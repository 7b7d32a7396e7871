//! Committed airspace and vertipad usage, for conflict checks of new flights.

use super::schedule::{FleetSnapshot, Location};
use crate::network::Network;

#[derive(Clone, Debug)]
pub struct ReservationTable {
    kt: usize,
    pads: Vec<usize>,
    /// Per class, occupancy flags by absolute step.
    classes: Vec<Vec<bool>>,
    takeoffs: Vec<Vec<u16>>,
    landings: Vec<Vec<u16>>,
}

fn get<T: Copy + Default>(v: &[T], i: usize) -> T {
    v.get(i).copied().unwrap_or_default()
}

fn bump(v: &mut Vec<u16>, i: usize) {
    if v.len() <= i {
        v.resize(i + 1, 0);
    }
    v[i] += 1;
}

impl ReservationTable {
    pub fn new(net: &Network) -> Self {
        let nv = net.num_vertiports();
        Self {
            kt: net.params.tau_steps,
            pads: (1..=nv).map(|v| net.pads(v)).collect(),
            classes: vec![Vec::new(); net.num_classes()],
            takeoffs: vec![Vec::new(); nv],
            landings: vec![Vec::new(); nv],
        }
    }

    /// Table holding the snapshot's airborne vehicles and recent activity.
    pub fn from_snapshot(net: &Network, fleet: &FleetSnapshot) -> Self {
        let mut t = Self::new(net);
        for &(v, s) in &fleet.recent_takeoffs {
            bump(&mut t.takeoffs[v - 1], s);
        }
        for &(v, s) in &fleet.recent_landings {
            bump(&mut t.landings[v - 1], s);
        }
        for vs in &fleet.vehicles {
            if let Location::Flying { pair, takeoff } = vs.location {
                let od = &net.od_pairs[pair];
                for (i, c) in od.interior() {
                    t.mark(c, takeoff + i);
                }
                bump(&mut t.landings[od.destination - 1], takeoff + od.flight_time_steps);
            }
        }
        t
    }

    fn mark(&mut self, c: usize, s: usize) {
        let v = &mut self.classes[c];
        if v.len() <= s {
            v.resize(s + 1, false);
        }
        v[s] = true;
    }

    fn window_takeoffs(&self, v: usize, n: usize) -> usize {
        let lo = (n + 1).saturating_sub(self.kt);
        (lo..=n).map(|s| get(&self.takeoffs[v - 1], s) as usize).sum()
    }

    fn recent_landings(&self, v: usize, n: usize) -> usize {
        let lo = (n + 1).saturating_sub(self.kt);
        (lo..n).map(|s| get(&self.landings[v - 1], s) as usize).sum()
    }

    /// Whether a takeoff on `pair` at step `t` conflicts with nothing committed.
    pub fn can_fly(&self, net: &Network, pair: usize, t: usize) -> bool {
        let od = &net.od_pairs[pair];
        if od.interior().any(|(i, c)| get(&self.classes[c], t + i)) {
            return false;
        }
        let (o, d) = (od.origin, od.destination);
        let pads_o = self.pads[o - 1];
        for n in t..t + self.kt {
            if self.window_takeoffs(o, n) + 1 > pads_o {
                return false;
            }
        }
        let t_at = get(&self.takeoffs[o - 1], t) as usize;
        if t_at + 1 + self.recent_landings(o, t) > pads_o {
            return false;
        }
        let land = t + od.flight_time_steps;
        let pads_d = self.pads[d - 1];
        for n in land + 1..land + self.kt {
            let here = get(&self.takeoffs[d - 1], n) as usize;
            if here + self.recent_landings(d, n) + 1 > pads_d {
                return false;
            }
        }
        true
    }

    pub fn commit(&mut self, net: &Network, pair: usize, t: usize) {
        let od = &net.od_pairs[pair];
        for (i, c) in od.interior() {
            self.mark(c, t + i);
        }
        bump(&mut self.takeoffs[od.origin - 1], t);
        bump(&mut self.landings[od.destination - 1], t + od.flight_time_steps);
    }

    /// Earliest conflict-free takeoff at or after `from`.
    pub fn earliest(&self, net: &Network, pair: usize, from: usize) -> usize {
        (from..).find(|&t| self.can_fly(net, pair, t)).expect("finite commitments leave a free step")
    }
}
