mod support;

use support::oracle::{brute_force, random_tiny};
use vertisync::network::preset;
use vertisync::scheduler::{validate_schedule, FleetSnapshot};
use vertisync::solver::{IlpOptions, Status};
use vertisync::tfmp::{
    build_instance, estimate_for, estimate_size, horizon_bound, isolated_pairs, preprocess, solve_cycle, Group,
};

fn exact(t: &support::oracle::Tiny, reduce: bool) -> Option<usize> {
    let (sched, sol, obj) =
        solve_cycle(&t.net, &t.fleet, &t.q, t.horizon, t.capacity, reduce, &IlpOptions::default()).unwrap();
    match sched {
        Some(s) => {
            let v = validate_schedule(&s, &t.net, &t.fleet, &t.q, t.capacity);
            assert!(v.is_empty(), "decoded schedule violates {v:?}");
            assert_eq!(s.total_flight_steps(&t.net) as f64, obj);
            Some(obj.round() as usize)
        }
        None => {
            assert_eq!(sol.status, Status::Infeasible);
            None
        }
    }
}

#[test]
fn example1_constraint_bound() {
    let (vars, rows) = estimate_size(4, 8, 40, 5, 100);
    assert_eq!(rows, 55_808);
    // 100·5·40 + 2·100·5·4
    assert_eq!(vars, 24_000);
}

#[test]
fn built_instances_stay_under_the_bound() {
    for name in ["la4", "example3", "la12-reduced"] {
        let net = preset(name).unwrap();
        for (na, m) in [(1, 4), (2, 8), (3, 12)] {
            let fleet = FleetSnapshot::spread(&net, na);
            let mut q = vec![0; net.num_pairs()];
            q[0] = 1;
            let inst = build_instance(&net, &fleet, &q, m, 1).unwrap();
            let (_, bound) = estimate_for(&net, na, m);
            assert!(inst.num_constraints() <= bound, "{name} {na} {m}: {} > {bound}", inst.num_constraints());
            let pre = preprocess(&inst);
            assert!(pre.num_constraints() <= inst.num_constraints());
        }
    }
}

#[test]
fn instance_has_every_constraint_group() {
    let net = preset("example3").unwrap();
    let fleet = FleetSnapshot::spread(&net, 2);
    let inst = build_instance(&net, &fleet, &[1, 1], 60, 1).unwrap();
    let groups: Vec<Group> = inst.group_counts().into_iter().map(|g| g.0).collect();
    for g in [
        Group::ServiceCompletion,
        Group::Monotone,
        Group::Progression,
        Group::VisitUpdate,
        Group::TakeoffAfterVisit,
        Group::SectorCapacity,
        Group::TakeoffWindow,
        Group::LandingWindow,
        Group::ChargeBalance,
        Group::RechargeMonotone,
        Group::RechargeAtVisit,
        Group::RechargeBlocking,
    ] {
        assert!(groups.contains(&g), "missing {g:?}");
    }
}

#[test]
fn horizon_bound_sums_service_and_return_legs() {
    let net = preset("example3").unwrap();
    let h = horizon_bound(&net, &[2, 1]);
    let t = net.od_pairs[0].flight_time_steps;
    assert_eq!(h, 3 * (t + net.od_pairs[0].rebalance_time_steps) + net.params.tau_steps);
    assert_eq!(horizon_bound(&net, &[0, 0]), net.params.recharge_steps + 1);
}

#[test]
fn zero_demand_costs_nothing() {
    let net = preset("la12-reduced").unwrap();
    let fleet = FleetSnapshot::spread(&net, 2);
    let q = vec![0; net.num_pairs()];
    let (s, _, obj) = solve_cycle(&net, &fleet, &q, 4, 1, true, &IlpOptions::default()).unwrap();
    assert_eq!(obj, 0.0);
    assert!(s.unwrap().flights.is_empty());
}

#[test]
fn symmetric_demand_without_rebalancing_costs_its_flight_time() {
    let net = preset("la12-reduced").unwrap();
    let fleet = FleetSnapshot::spread(&net, 8);
    let mut q = vec![0; net.num_pairs()];
    for p in [0, 4, 8, 9, 12, 13] {
        q[p] = 1;
    }
    let expect: usize = q.iter().zip(&net.od_pairs).map(|(&n, p)| n * p.flight_time_steps).sum();
    let (s, _, obj) = solve_cycle(&net, &fleet, &q, 10, 1, true, &IlpOptions::default()).unwrap();
    assert!(s.is_some());
    assert_eq!(obj, expect as f64);
}

#[test]
fn too_short_horizon_is_infeasible() {
    let net = preset("example3").unwrap();
    let fleet = FleetSnapshot::spread(&net, 2);
    let t = net.od_pairs[0].flight_time_steps;
    let (s, sol, _) = solve_cycle(&net, &fleet, &[1, 0], t - 1, 1, false, &IlpOptions::default()).unwrap();
    assert!(s.is_none());
    assert_eq!(sol.status, Status::Infeasible);
}

#[test]
fn branch_and_bound_matches_exhaustive_search() {
    let mut compared = 0;
    for seed in 0..60 {
        let t = random_tiny(seed);
        let want = brute_force(&t.net, &t.fleet, &t.q, t.horizon, t.capacity);
        let got = exact(&t, false);
        assert_eq!(got, want, "seed {seed}: q={:?} horizon={}", t.q, t.horizon);
        compared += usize::from(want.is_some());
    }
    // the family must not be trivially infeasible
    assert!(compared >= 20, "only {compared} feasible instances");
}

#[test]
fn preprocessing_preserves_the_optimum() {
    let mut reduced = 0;
    for seed in 100..140 {
        let t = random_tiny(seed);
        reduced += usize::from(isolated_pairs(&t.net).iter().any(|&b| b));
        assert_eq!(exact(&t, true), exact(&t, false), "seed {seed}");
    }
    assert!(reduced >= 5, "only {reduced} instances had a removable route");
}
