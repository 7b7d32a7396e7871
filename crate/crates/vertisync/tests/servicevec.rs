mod support;

use support::periodic::{brute_conflict_free, periodic_ok};
use vertisync::network::{preset, Network};
use vertisync::servicevec::{
    classify, compute_c, enumerate_service_vectors, enumerate_with, find_offsets, fleet_bound_corollary1,
    fleet_bound_theorem1, is_conflict_free, rates_to_counts, reversed, EnumerateOptions, ServiceError, Symmetry,
    ThroughputRegion,
};

fn rates(net: &Network, counts: &[usize]) -> Vec<f64> {
    counts.iter().map(|&m| m as f64 / net.params.tau_steps as f64).collect()
}

#[test]
fn la4_single_pad_vectors() {
    let net = preset("la4").unwrap();
    assert!(is_conflict_free(&net, &[0.1, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0]));
    assert!(is_conflict_free(&net, &[0.0, 0.1, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0]));
    // two launches from one single-pad vertiport within one k_tau
    assert!(!is_conflict_free(&net, &[0.1, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
    assert!(!is_conflict_free(&net, &[0.0; 8]));
    assert!(!is_conflict_free(&net, &[0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
}

#[test]
fn offsets_agree_with_periodic_replay() {
    let net = preset("la4").unwrap();
    let mut feasible = 0;
    for code in 0..256usize {
        let counts: Vec<usize> = (0..8).map(|b| (code >> b) & 1).collect();
        let got = find_offsets(&net, &counts).unwrap();
        let want = brute_conflict_free(&net, &counts);
        assert_eq!(got.is_some(), want, "{counts:?}");
        if let Some(off) = got {
            feasible += 1;
            let launches: Vec<(usize, usize)> =
                off.iter().enumerate().flat_map(|(p, os)| os.iter().map(move |&o| (p, o))).collect();
            assert!(periodic_ok(&net, &launches), "{counts:?} offsets {off:?}");
        }
    }
    assert!(feasible > 1 && feasible < 256);
}

#[test]
fn enumeration_is_downward_closed_and_replays() {
    let net = preset("la4").unwrap();
    let all = enumerate_service_vectors(&net).unwrap();
    assert!(!all.is_empty());
    for v in &all {
        assert!(brute_conflict_free(&net, &v.counts), "{:?}", v.counts);
        assert_eq!(v.rates, rates(&net, &v.counts));
    }
    let mut sorted = all.iter().map(|v| v.counts.clone()).collect::<Vec<_>>();
    sorted.sort_by(|a, b| b.cmp(a));
    assert_eq!(sorted, all.iter().map(|v| v.counts.clone()).collect::<Vec<_>>());
}

#[test]
fn wide_grid_hits_the_cap() {
    let mut spec = vertisync::network::preset_spec("la4").unwrap();
    spec.set_pads(10);
    let net = vertisync::network::build_network(&spec).unwrap();
    let e = enumerate_service_vectors(&net).unwrap_err();
    assert!(matches!(e, ServiceError::CombinatorialLimitExceeded(..)), "{e:?}");
    let opts = EnumerateOptions { support: Some(vec![0, 4]), maximal_only: true, ..Default::default() };
    let some = enumerate_with(&net, &opts).unwrap();
    assert!(some.iter().all(|v| v.active().all(|p| p == 0 || p == 4)));
}

#[test]
fn example3_vectors_are_reversible_with_inflation_one_point_one() {
    let net = preset("example3").unwrap();
    let all = enumerate_service_vectors(&net).unwrap();
    let counts: Vec<Vec<usize>> = all.iter().map(|v| v.counts.clone()).collect();
    assert_eq!(counts, vec![vec![1, 0], vec![0, 1]]);
    let t = net.od_pairs[0].flight_time_steps as f64;
    let kc = net.params.recharge_steps as f64;
    let a = 32.0;
    for v in &all {
        assert!(!v.symmetric);
        assert_eq!(classify(&net, v).unwrap(), Symmetry::Reversible);
        assert!(reversed(&net, &v.counts).is_some());
        let sum = v.total_rate();
        let expect = 1.0 + 2.0 * (t + kc - a / sum).max(t) * sum / a;
        let c = compute_c(&net, v, 32).unwrap();
        assert!((c - expect).abs() < 1e-12);
        assert!((c - 1.1).abs() < 1e-12, "c = {c}");
    }
    assert_eq!(fleet_bound_theorem1(&all), 1);
    assert_eq!(fleet_bound_corollary1(&net, &all), Err(ServiceError::NotSymmetricNetwork));
    assert!(matches!(compute_c(&net, &all[0], 0), Err(ServiceError::FleetTooSmall(..))));
}

#[test]
fn example3_region_boundaries() {
    let net = preset("example3").unwrap();
    let all = enumerate_service_vectors(&net).unwrap();
    let d = ThroughputRegion::necessary(&all);
    let d1 = ThroughputRegion::sufficient(&net, &all, 32).unwrap();
    // half the period each way at rate 0.1, shrunk by 1 + c
    let edge_d = 0.1 * 0.5;
    let edge_d1 = 0.1 * 0.5 / 2.1;
    assert!((d.boundary_scale(&[1.0, 1.0]) - edge_d).abs() < 1e-9);
    assert!((d1.boundary_scale(&[1.0, 1.0]) - edge_d1).abs() < 1e-9);
    assert!(d1.contains(&[0.02, 0.02], true, 1e-9));
    assert!(!d1.contains(&[0.025, 0.025], true, 1e-9));
    assert!(d.contains(&[0.04, 0.04], true, 1e-9));
    assert!(!d.contains(&[0.06, 0.06], false, 1e-9));
    assert!(d.contains(&[0.0, 0.0], false, 1e-9));
    for i in 0..=20 {
        let x = 0.004 * i as f64;
        let l = [x, 0.5 * x];
        if d1.contains(&l, true, 1e-9) {
            assert!(d.contains(&l, true, 1e-9), "{x}");
        }
    }
}

#[test]
fn fleet_bounds_on_symmetric_vectors() {
    let net = preset("la4").unwrap();
    let sym: Vec<_> = enumerate_service_vectors(&net).unwrap().into_iter().filter(|v| v.symmetric).collect();
    assert!(!sym.is_empty());
    let kc = net.params.recharge_steps as f64;
    let mut want1 = 0;
    let mut want2 = 0;
    for v in &sym {
        let nz: Vec<f64> = v.rates.iter().copied().filter(|&r| r > 0.0).collect();
        let min = nz.iter().copied().fold(1.0, f64::min);
        let sum: f64 = nz.iter().sum();
        let tmax = v.active().map(|p| net.od_pairs[p].flight_time_steps).max().unwrap() as f64;
        want1 = want1.max((sum / min - 1e-9).ceil() as usize);
        want2 = want2.max((sum * (1.0 / min).max(tmax + kc) - 1e-9).ceil() as usize);
        assert!(compute_c(&net, v, 40).unwrap() >= 0.0);
    }
    assert_eq!(fleet_bound_theorem1(&sym), want1);
    assert_eq!(fleet_bound_corollary1(&net, &sym).unwrap(), want2);
}

#[test]
fn off_grid_rates_are_rejected() {
    let net = preset("example3").unwrap();
    assert!(matches!(rates_to_counts(&net, &[0.03, 0.0]), Err(ServiceError::BadRates(_))));
    assert!(matches!(rates_to_counts(&net, &[0.1]), Err(ServiceError::BadRates(_))));
    assert_eq!(rates_to_counts(&net, &[0.1, 0.0]).unwrap(), vec![1, 0]);
}
