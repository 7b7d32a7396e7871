//! First-come first-serve baseline: each request is committed, on arrival,
//! to the earliest conflict-free takeoff of some vehicle. Commitments are
//! never revised.

use super::constructive::Fleet;
use super::schedule::{Flight, FleetSnapshot, Schedule};
use crate::network::Network;

#[derive(Clone, Debug)]
pub struct FcfsScheduler {
    fleet: Fleet,
    start: usize,
}

impl FcfsScheduler {
    pub fn new(net: &Network, snap: &FleetSnapshot) -> Self {
        Self { fleet: Fleet::new(net, snap), start: snap.time }
    }

    /// Commit a request on `pair` that arrived at step `arrival`. Returns the
    /// new flights; the last one carries the passenger.
    pub fn request(&mut self, net: &Network, pair: usize, arrival: usize) -> Vec<Flight> {
        let before = self.fleet.flights.len();
        let od = &net.od_pairs[pair];
        let earliest = arrival + 1;
        let local = (0..self.fleet.vehicles.len())
            .filter(|&a| self.fleet.can_take(net, a, pair))
            .map(|a| (self.fleet.table.earliest(net, pair, self.fleet.vehicles[a].ready.max(earliest)), a))
            .min();
        let (t, a) = match local {
            Some(x) => x,
            None => {
                // nearest vehicle elsewhere repositions first
                let a = (0..self.fleet.vehicles.len())
                    .filter(|&a| self.fleet.vehicles[a].at != od.origin && !self.fleet.vehicles[a].stranded)
                    .min_by_key(|&a| (net.rebalance_time(self.fleet.vehicles[a].at, od.origin), a))
                    .expect("fleet is not empty");
                let mut none = vec![0; net.num_pairs()];
                let moved = self.fleet.relocate(net, a, od.origin, earliest, &mut none, 1);
                assert!(moved && self.fleet.can_take(net, a, pair), "vehicle {a} cannot reach vertiport {}", od.origin);
                (self.fleet.table.earliest(net, pair, self.fleet.vehicles[a].ready.max(earliest)), a)
            }
        };
        self.fleet.fly(net, a, pair, t, 1);
        self.fleet.flights[before..].to_vec()
    }

    pub fn flights(&self) -> &[Flight] {
        &self.fleet.flights
    }

    pub fn schedule(&self) -> Schedule {
        let mut s = Schedule { flights: self.fleet.flights.clone(), start: self.start, end: self.start };
        s.finish();
        s
    }
}

/// Schedule `requests` `(pair, arrival)` in arrival order.
pub fn fcfs_schedule(net: &Network, snap: &FleetSnapshot, requests: &[(usize, usize)]) -> Schedule {
    let mut order: Vec<usize> = (0..requests.len()).collect();
    order.sort_by_key(|&i| (requests[i].1, i));
    let mut f = FcfsScheduler::new(net, snap);
    for i in order {
        f.request(net, requests[i].0, requests[i].1);
    }
    f.schedule()
}
