use std::collections::VecDeque;

use proptest::prelude::*;
use vertisync::network::{preset, Network};
use vertisync::scheduler::{
    constructive_cycle, fcfs_schedule, validate_schedule, vertisync_cycle, Flight, FleetSnapshot, PolicyState,
    Schedule, ScheduleError, VertiSyncConfig, ViolationKind,
};
use vertisync::servicevec::{compute_c, enumerate_service_vectors, fleet_bound_theorem1};

fn kinds(s: &Schedule, net: &Network, fleet: &FleetSnapshot, q: &[usize]) -> Vec<ViolationKind> {
    validate_schedule(s, net, fleet, q, 1).into_iter().map(|v| v.kind).collect()
}

fn flight(vehicle: usize, pair: usize, takeoff: usize) -> Flight {
    Flight { vehicle, pair, takeoff, passengers: 1, recharge: false }
}

fn sched(flights: Vec<Flight>) -> Schedule {
    let mut s = Schedule { flights, start: 0, end: 0 };
    s.finish();
    s
}

#[test]
fn validator_accepts_a_clean_round_trip() {
    let net = preset("example3").unwrap();
    let fleet = FleetSnapshot::parked(&net, &[1]);
    let t = net.od_pairs[0].flight_time_steps;
    let back = t + net.params.tau_steps + 1;
    let s = sched(vec![flight(0, 0, 1), flight(0, 1, back)]);
    assert!(kinds(&s, &net, &fleet, &[1, 1]).is_empty());
}

#[test]
fn validator_flags_each_mutation() {
    let net = preset("example3").unwrap();
    let kt = net.params.tau_steps;
    let t = net.od_pairs[0].flight_time_steps;
    let two = FleetSnapshot::parked(&net, &[1, 1]);

    // second launch from a one-pad vertiport inside the window
    let s = sched(vec![flight(0, 0, 1), flight(1, 0, 1 + kt - 1)]);
    assert!(kinds(&s, &net, &two, &[2, 0]).contains(&ViolationKind::TakeoffWindow));

    // both launched together: same sectors at the same steps
    let s = sched(vec![flight(0, 0, 1), flight(1, 0, 1)]);
    assert!(kinds(&s, &net, &two, &[2, 0]).contains(&ViolationKind::SectorCapacity));

    let s = sched(vec![flight(0, 0, 1)]);
    assert!(kinds(&s, &net, &two, &[2, 0]).contains(&ViolationKind::Service));

    let one = FleetSnapshot::parked(&net, &[1]);
    let s = sched(vec![flight(0, 0, 1), flight(0, 1, 1 + t + kt - 1)]);
    assert!(kinds(&s, &net, &one, &[1, 1]).contains(&ViolationKind::Turnaround));

    let s = sched(vec![flight(0, 1, 1)]);
    assert!(kinds(&s, &net, &one, &[0, 1]).contains(&ViolationKind::Location));

    let mut low = FleetSnapshot::parked(&net, &[1]);
    low.vehicles[0].charge = net.params.e_min + net.od_pairs[0].energy_per_flight - 1.0;
    let s = sched(vec![flight(0, 0, 1)]);
    assert_eq!(kinds(&s, &net, &low, &[1, 0]), vec![ViolationKind::Energy]);

    // a recharge forbids takeoffs until it completes
    let mut f = flight(0, 0, 1);
    f.recharge = true;
    let done = 1 + t + net.params.recharge_steps;
    assert!(done >= 1 + t + kt);
    let k = kinds(&sched(vec![f, flight(0, 1, done)]), &net, &one, &[1, 1]);
    assert_eq!(k, vec![ViolationKind::RechargeBlocking]);
    assert!(kinds(&sched(vec![f, flight(0, 1, done + 1)]), &net, &one, &[1, 1]).is_empty());

    let mut f = flight(0, 0, 1);
    f.passengers = 3;
    assert!(kinds(&sched(vec![f]), &net, &one, &[1, 0]).contains(&ViolationKind::Passengers));
}

#[test]
fn empty_queue_gives_empty_cycle() {
    let net = preset("la4").unwrap();
    let r = enumerate_service_vectors(&net).unwrap();
    let fleet = FleetSnapshot::spread(&net, 4);
    let out = constructive_cycle(&[0; 8], &r, &fleet, &net, 1).unwrap();
    assert!(out.schedule.flights.is_empty());
    assert_eq!(out.schedule.length(), 0);
}

#[test]
fn small_fleet_is_rejected() {
    let net = preset("la4").unwrap();
    let r = enumerate_service_vectors(&net).unwrap();
    let need = fleet_bound_theorem1(&r);
    assert!(need > 1);
    let fleet = FleetSnapshot::spread(&net, need - 1);
    let e = constructive_cycle(&[1; 8], &r, &fleet, &net, 1).unwrap_err();
    assert_eq!(e, ScheduleError::FleetTooSmall(need - 1, need));
}

#[test]
fn uncovered_demand_is_reported() {
    let net = preset("la4").unwrap();
    let r: Vec<_> = enumerate_service_vectors(&net).unwrap().into_iter().filter(|v| v.counts[0] == 0).collect();
    let fleet = FleetSnapshot::spread(&net, 8);
    let mut q = vec![0; 8];
    q[0] = 1;
    let e = constructive_cycle(&q, &r, &fleet, &net, 1).unwrap_err();
    assert_eq!(e, ScheduleError::UncoveredDemand(0));
}

#[test]
fn exact_and_constructive_cycles_are_both_valid() {
    let net = preset("example3").unwrap();
    let r = enumerate_service_vectors(&net).unwrap();
    let mut state = PolicyState::new(&net, FleetSnapshot::spread(&net, 2));
    state.queues[0] = VecDeque::from(vec![0, 0]);
    state.queues[1] = VecDeque::from(vec![0]);
    let q = state.queue_lengths();
    let cons = vertisync_cycle(&net, &state, &VertiSyncConfig::constructive(r.clone())).unwrap();
    let mut cfg = VertiSyncConfig::constructive(r);
    cfg.exact = true;
    let exact = vertisync_cycle(&net, &state, &cfg).unwrap();
    for rep in [&cons, &exact] {
        assert!(validate_schedule(&rep.schedule, &net, &state.fleet, &q, 1).is_empty());
    }
    // three flights of T each, no repositioning is needed with one vehicle per side
    let t = net.od_pairs[0].flight_time_steps as f64;
    assert_eq!(exact.objective, 3.0 * t);
    assert!(cons.objective >= exact.objective);
}

#[test]
fn fcfs_serves_in_arrival_order_without_conflicts() {
    let net = preset("la4").unwrap();
    let fleet = FleetSnapshot::spread(&net, 4);
    let reqs = vec![(0, 3), (0, 0), (4, 1), (2, 2), (3, 2), (1, 5)];
    let s = fcfs_schedule(&net, &fleet, &reqs);
    let mut q = vec![0; 8];
    for &(p, _) in &reqs {
        q[p] += 1;
    }
    assert!(validate_schedule(&s, &net, &fleet, &q, 1).is_empty());
    let mut on0: Vec<usize> = s.flights.iter().filter(|f| f.pair == 0 && f.passengers > 0).map(|f| f.takeoff).collect();
    on0.sort();
    assert_eq!(on0.len(), 2);
    assert!(on0[0] > 0);
}

#[test]
fn fcfs_moves_an_idle_vehicle_when_the_origin_is_empty() {
    let net = preset("example3").unwrap();
    let fleet = FleetSnapshot::parked(&net, &[2]);
    let s = fcfs_schedule(&net, &fleet, &[(0, 0)]);
    assert_eq!(s.flights.len(), 2);
    assert_eq!((s.flights[0].pair, s.flights[0].passengers), (1, 0));
    assert_eq!((s.flights[1].pair, s.flights[1].passengers), (0, 1));
    assert!(validate_schedule(&s, &net, &fleet, &[1, 0], 1).is_empty());
}

fn bound_from(net: &Network, r: &[vertisync::servicevec::ServiceVector], k: &[f64], na: usize) -> f64 {
    let kt = net.params.tau_steps as f64;
    let tmax = net.od_pairs.iter().map(|p| p.flight_time_steps).max().unwrap() as f64;
    r.iter()
        .zip(k)
        .filter(|(_, &k)| k > 1e-9)
        .map(|(v, &k)| {
            let c = compute_c(net, v, na).unwrap();
            let i = if v.symmetric { 0.0 } else { 1.0 };
            (1.0 + c) * k + (c - i) * kt + (na as f64 + 1.0) * tmax
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn constructive_cycles_are_conflict_free_and_within_bound(
        which in 0..2usize,
        extra in 0..6usize,
        places in proptest::collection::vec(1..=4usize, 12),
        q in proptest::collection::vec(0..5usize, 8),
        capacity in 1..=2usize,
    ) {
        let name = ["la4", "example3"][which];
        let net = preset(name).unwrap();
        let r = enumerate_service_vectors(&net).unwrap();
        let na = fleet_bound_theorem1(&r) + extra;
        let nv = net.num_vertiports();
        let placement: Vec<usize> = places.iter().take(na).map(|&v| (v - 1) % nv + 1).collect();
        let placement: Vec<usize> = placement.into_iter().chain(std::iter::repeat(1)).take(na).collect();
        let fleet = FleetSnapshot::parked(&net, &placement);
        let q: Vec<usize> = q.into_iter().take(net.num_pairs()).collect();
        let out = constructive_cycle(&q, &r, &fleet, &net, capacity).unwrap();
        let v = validate_schedule(&out.schedule, &net, &fleet, &q, capacity);
        prop_assert!(v.is_empty(), "{v:?}");
        prop_assert!((out.schedule.length() as f64) <= out.bound + 1e-9, "{} > {}", out.schedule.length(), out.bound);
        let want = bound_from(&net, &r, &out.allocation, na);
        prop_assert!((out.bound - want).abs() < 1e-6);
    }
}

#[test]
fn vehicles_without_charge_for_every_route_stay_parked() {
    let net = preset("la4").unwrap();
    let r = enumerate_service_vectors(&net).unwrap();
    let q = [4, 4, 0, 5, 2, 4, 0, 0];
    let mut fleet = FleetSnapshot::parked(&net, &[2, 3, 3, 2, 3, 2]);
    let costliest = net.od_pairs.iter().filter(|p| p.origin == 2).map(|p| p.energy_per_flight).fold(0.0, f64::max);
    fleet.vehicles[5].charge = net.params.e_min + costliest - 2.0;
    let out = constructive_cycle(&q, &r, &fleet, &net, 1).unwrap();
    assert!(validate_schedule(&out.schedule, &net, &fleet, &q, 1).is_empty());
    assert!(out.schedule.flights.iter().all(|f| f.vehicle != 5));

    let need = fleet_bound_theorem1(&r);
    let mut low = FleetSnapshot::parked(&net, &vec![2; need]);
    low.vehicles[0].charge = net.params.e_min;
    let e = constructive_cycle(&q, &r, &low, &net, 1).unwrap_err();
    assert_eq!(e, ScheduleError::FleetTooSmall(need - 1, need));
}
