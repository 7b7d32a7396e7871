//! Periodic replay reference for conflict-free rate vectors.

#![allow(dead_code)]

use vertisync::network::Network;

/// Replays a strictly periodic launch pattern over several periods and
/// checks sectors and pad windows step by step.
pub fn periodic_ok(net: &Network, launches: &[(usize, usize)]) -> bool {
    let k = net.params.tau_steps;
    let tmax = net.od_pairs.iter().map(|p| p.flight_time_steps).max().unwrap();
    let len = tmax + 6 * k;
    let steady = tmax + k..len - k;
    let nv = net.num_vertiports();
    let mut occ = vec![vec![0usize; len + tmax + 1]; net.num_classes()];
    let mut tk = vec![vec![0usize; len + tmax + 1]; nv + 1];
    let mut ld = vec![vec![0usize; len + tmax + 1]; nv + 1];
    for &(p, o) in launches {
        let od = &net.od_pairs[p];
        let mut n = o;
        while n < len {
            for (j, c) in od.interior() {
                occ[c][n + j] += 1;
            }
            tk[od.origin][n] += 1;
            ld[od.destination][n + od.flight_time_steps] += 1;
            n += k;
        }
    }
    for n in steady {
        if occ.iter().any(|c| c[n] > 1) {
            return false;
        }
        for v in 1..=nv {
            let pads = net.pads(v);
            let window: usize = tk[v][n + 1 - k..=n].iter().sum();
            let landed: usize = ld[v][n + 1 - k..n].iter().sum();
            if window > pads || tk[v][n] + landed > pads {
                return false;
            }
        }
    }
    true
}

/// Tries every residue assignment, fixing the first launch at 0.
pub fn brute_conflict_free(net: &Network, counts: &[usize]) -> bool {
    let k = net.params.tau_steps;
    // a period's launches from one vertiport all fall in one window
    let mut out = vec![0; net.num_vertiports() + 1];
    for (p, &m) in counts.iter().enumerate() {
        out[net.od_pairs[p].origin] += m;
    }
    if (1..=net.num_vertiports()).any(|v| out[v] > net.pads(v)) {
        return false;
    }
    let slots: Vec<usize> = counts.iter().enumerate().flat_map(|(p, &m)| std::iter::repeat_n(p, m)).collect();
    if slots.is_empty() {
        return true;
    }
    let free = slots.len() - 1;
    let total = k.pow(free as u32);
    (0..total).any(|mut code| {
        let mut launches = vec![(slots[0], 0)];
        for &p in &slots[1..] {
            launches.push((p, code % k));
            code /= k;
        }
        periodic_ok(net, &launches)
    })
}
