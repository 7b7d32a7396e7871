use std::fmt::Write;

use serde::Serialize;

use crate::network::Network;

/// Where a vehicle is at the snapshot instant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Location {
    Parked { vertiport: usize },
    /// Airborne on `pair`, launched at absolute step `takeoff`.
    Flying { pair: usize, takeoff: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VehicleState {
    pub location: Location,
    pub charge: f64,
    /// Earliest absolute step at which a parked vehicle may take off.
    pub ready_at: usize,
    /// Charge returns to full at this step when a recharge is running.
    pub recharge_until: Option<usize>,
    /// When flying: whether a recharge starts on landing.
    pub recharge_on_landing: bool,
}

impl VehicleState {
    pub fn parked(vertiport: usize, charge: f64) -> Self {
        Self {
            location: Location::Parked { vertiport },
            charge,
            ready_at: 0,
            recharge_until: None,
            recharge_on_landing: false,
        }
    }
}

/// Fleet state at absolute step `time`, with recent vertiport activity so
/// takeoff and landing windows carry across cycle boundaries.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FleetSnapshot {
    pub time: usize,
    pub vehicles: Vec<VehicleState>,
    /// `(vertiport, step)` of takeoffs at steps `<= time`.
    pub recent_takeoffs: Vec<(usize, usize)>,
    /// `(vertiport, step)` of landings at steps `<= time`.
    pub recent_landings: Vec<(usize, usize)>,
}

impl FleetSnapshot {
    /// Every vehicle parked and fully charged at step 0.
    pub fn parked(net: &Network, placement: &[usize]) -> Self {
        Self {
            time: 0,
            vehicles: placement.iter().map(|&v| VehicleState::parked(v, net.params.e_max)).collect(),
            recent_takeoffs: Vec::new(),
            recent_landings: Vec::new(),
        }
    }

    /// `n` vehicles spread round-robin over the vertiports.
    pub fn spread(net: &Network, n: usize) -> Self {
        let nv = net.num_vertiports();
        Self::parked(net, &(0..n).map(|a| a % nv + 1).collect::<Vec<_>>())
    }

    pub fn all_at(net: &Network, n: usize, vertiport: usize) -> Self {
        Self::parked(net, &vec![vertiport; n])
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn airspace_empty(&self) -> bool {
        self.vehicles.iter().all(|v| matches!(v.location, Location::Parked { .. }))
    }
}

/// One flight: takeoff from the pair's origin, one sector per step, landing
/// `flight_time_steps` later. A recharge may start at the landing step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Flight {
    pub vehicle: usize,
    pub pair: usize,
    pub takeoff: usize,
    pub passengers: usize,
    pub recharge: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EventKind {
    Takeoff { pair: usize, passengers: usize },
    SectorAdvance { pair: usize, index: usize },
    Landing { pair: usize, vertiport: usize },
    RechargeStart { vertiport: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Event {
    pub step: usize,
    pub vehicle: usize,
    pub kind: EventKind,
    /// State of charge right after the event.
    pub charge: f64,
}

/// Flights planned for one cycle `[start, end]`, end being the last takeoff.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Schedule {
    pub flights: Vec<Flight>,
    pub start: usize,
    pub end: usize,
}

impl Schedule {
    pub fn empty(start: usize) -> Self {
        Self { flights: Vec::new(), start, end: start }
    }

    pub fn sort(&mut self) {
        self.flights.sort_by_key(|f| (f.takeoff, f.vehicle, f.pair));
    }

    pub fn finish(&mut self) {
        self.sort();
        self.end = self.flights.iter().map(|f| f.takeoff).max().unwrap_or(self.start).max(self.start);
    }

    /// Cycle length in steps.
    pub fn length(&self) -> usize {
        self.end - self.start
    }

    pub fn total_flight_steps(&self, net: &Network) -> usize {
        self.flights.iter().map(|f| net.od_pairs[f.pair].flight_time_steps).sum()
    }

    pub fn served(&self, net: &Network) -> Vec<usize> {
        let mut s = vec![0; net.num_pairs()];
        for f in &self.flights {
            s[f.pair] += f.passengers;
        }
        s
    }

    pub fn last_landing(&self, net: &Network) -> usize {
        self.flights.iter().map(|f| f.takeoff + net.od_pairs[f.pair].flight_time_steps).max().unwrap_or(self.start)
    }

    /// Time-ordered event log. `initial` supplies starting charges.
    pub fn events(&self, net: &Network, initial: &FleetSnapshot) -> Vec<Event> {
        let mut per_vehicle: Vec<Vec<&Flight>> = vec![Vec::new(); initial.len()];
        for f in &self.flights {
            per_vehicle[f.vehicle].push(f);
        }
        let mut out = Vec::new();
        for (a, flights) in per_vehicle.iter_mut().enumerate() {
            flights.sort_by_key(|f| f.takeoff);
            let vs = &initial.vehicles[a];
            let mut charge = if vs.recharge_until.is_some() { net.params.e_max } else { vs.charge };
            if let Location::Flying { pair, takeoff } = vs.location {
                let od = &net.od_pairs[pair];
                let land = takeoff + od.flight_time_steps;
                for j in 1..od.flight_time_steps {
                    if takeoff + j > initial.time {
                        out.push(Event { step: takeoff + j, vehicle: a, kind: EventKind::SectorAdvance { pair, index: j }, charge });
                    }
                }
                out.push(Event { step: land, vehicle: a, kind: EventKind::Landing { pair, vertiport: od.destination }, charge });
                if vs.recharge_on_landing {
                    out.push(Event { step: land, vehicle: a, kind: EventKind::RechargeStart { vertiport: od.destination }, charge });
                    charge = net.params.e_max;
                }
            }
            for f in flights.iter() {
                let od = &net.od_pairs[f.pair];
                charge -= od.energy_per_flight;
                out.push(Event {
                    step: f.takeoff,
                    vehicle: a,
                    kind: EventKind::Takeoff { pair: f.pair, passengers: f.passengers },
                    charge,
                });
                for j in 1..od.flight_time_steps {
                    out.push(Event {
                        step: f.takeoff + j,
                        vehicle: a,
                        kind: EventKind::SectorAdvance { pair: f.pair, index: j },
                        charge,
                    });
                }
                let land = f.takeoff + od.flight_time_steps;
                out.push(Event { step: land, vehicle: a, kind: EventKind::Landing { pair: f.pair, vertiport: od.destination }, charge });
                if f.recharge {
                    out.push(Event { step: land, vehicle: a, kind: EventKind::RechargeStart { vertiport: od.destination }, charge });
                    // the charge reads full once the recharge completes
                    charge = net.params.e_max;
                }
            }
        }
        out.sort_by_key(|e| (e.step, e.vehicle, event_rank(&e.kind)));
        out
    }

    /// CSV event log: `step,vehicle,event,od_pair,vertiport,passengers,charge`.
    pub fn to_csv(&self, net: &Network, initial: &FleetSnapshot) -> String {
        let mut s = String::from("step,vehicle,event,od_pair,vertiport,passengers,charge\n");
        for e in self.events(net, initial) {
            let (name, pair, vert, pax) = match e.kind {
                EventKind::Takeoff { pair, passengers } => ("takeoff", Some(pair), net.od_pairs[pair].origin, passengers),
                EventKind::SectorAdvance { pair, .. } => ("sector_advance", Some(pair), 0, 0),
                EventKind::Landing { pair, vertiport } => ("landing", Some(pair), vertiport, 0),
                EventKind::RechargeStart { vertiport } => ("recharge_start", None, vertiport, 0),
            };
            let pair = pair.map_or(String::new(), |p| net.od_pairs[p].label());
            let vert = if vert == 0 { String::new() } else { vert.to_string() };
            let _ = writeln!(s, "{},{},{},\"{}\",{},{},{:.3}", e.step, e.vehicle, name, pair, vert, pax, e.charge);
        }
        s
    }
}

fn event_rank(k: &EventKind) -> u8 {
    match k {
        EventKind::Landing { .. } => 0,
        EventKind::RechargeStart { .. } => 1,
        EventKind::SectorAdvance { .. } => 2,
        EventKind::Takeoff { .. } => 3,
    }
}
