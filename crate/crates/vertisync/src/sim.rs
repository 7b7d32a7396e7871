//! Discrete-time simulation of scheduling policies against random demand.
//!
//! One run draws arrivals step by step, hands queues to the policy and
//! executes the committed flights. A monitor re-checks overlap classes and
//! vertiport windows at every step, and the whole executed timeline is
//! validated once more at the end.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Network;
use crate::scheduler::{
    validate_schedule, vertisync_cycle, FcfsScheduler, Flight, FleetSnapshot, Location, PolicyState, Schedule,
    ScheduleError, VehicleState, VertiSyncConfig, Violation, ViolationKind,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("not enough samples for a saturation verdict: {0} < {1}")]
    InsufficientData(usize, usize),
    #[error("invalid demand: {0}")]
    BadDemand(String),
    #[error("invalid sweep direction: {0}")]
    BadDirection(String),
    #[error("initial fleet must be parked and non-empty")]
    BadFleet,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DemandKind {
    /// Arrival probability per step on each pair.
    Bernoulli(Vec<f64>),
    /// Poisson rates in requests per τ on each pair, as `(start_step, rates)`
    /// segments sorted by start. The first segment starts at step 0.
    PoissonPiecewise(Vec<(usize, Vec<f64>)>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    pub kind: DemandKind,
    pub seed: u64,
}

impl DemandModel {
    pub fn bernoulli(rates: Vec<f64>, seed: u64) -> Self {
        Self { kind: DemandKind::Bernoulli(rates), seed }
    }

    pub fn validate(&self, net: &Network) -> Result<(), SimError> {
        let np = net.num_pairs();
        let check = |rates: &[f64], prob: bool| -> Result<(), SimError> {
            if rates.len() != np {
                return Err(SimError::BadDemand(format!("{} rates for {np} pairs", rates.len())));
            }
            for &r in rates {
                if !r.is_finite() || r < 0.0 || (prob && r > 1.0) {
                    return Err(SimError::BadDemand(format!("rate {r} out of range")));
                }
            }
            Ok(())
        };
        match &self.kind {
            DemandKind::Bernoulli(r) => check(r, true),
            DemandKind::PoissonPiecewise(segs) => {
                if segs.first().map(|s| s.0) != Some(0) {
                    return Err(SimError::BadDemand("first segment must start at step 0".into()));
                }
                if segs.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(SimError::BadDemand("segments must start at increasing steps".into()));
                }
                segs.iter().try_for_each(|s| check(&s.1, false))
            }
        }
    }

    /// Expected arrivals per step on each pair at `step`.
    pub fn mean_rate(&self, net: &Network, step: usize) -> Vec<f64> {
        match &self.kind {
            DemandKind::Bernoulli(r) => r.clone(),
            DemandKind::PoissonPiecewise(segs) => {
                let kt = net.params.tau_steps.max(1) as f64;
                let seg = segs.iter().rev().find(|s| s.0 <= step).unwrap_or(&segs[0]);
                seg.1.iter().map(|r| r / kt).collect()
            }
        }
    }

    /// The model with every rate multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let kind = match &self.kind {
            DemandKind::Bernoulli(r) => DemandKind::Bernoulli(r.iter().map(|x| x * s).collect()),
            DemandKind::PoissonPiecewise(segs) => {
                DemandKind::PoissonPiecewise(segs.iter().map(|(t, r)| (*t, r.iter().map(|x| x * s).collect())).collect())
            }
        };
        Self { kind, seed: self.seed }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { kind: self.kind.clone(), seed }
    }

    pub fn stream<'a>(&'a self, net: &'a Network) -> DemandStream<'a> {
        DemandStream { model: self, net, rng: ChaCha8Rng::seed_from_u64(self.seed) }
    }
}

/// Seeded arrival draws. Pairs are sampled in index order at each step.
pub struct DemandStream<'a> {
    model: &'a DemandModel,
    net: &'a Network,
    rng: ChaCha8Rng,
}

impl DemandStream<'_> {
    pub fn draw(&mut self, step: usize) -> Vec<usize> {
        let rates = self.model.mean_rate(self.net, step);
        let poisson = matches!(self.model.kind, DemandKind::PoissonPiecewise(_));
        rates
            .iter()
            .map(|&r| {
                if r <= 0.0 {
                    0
                } else if poisson {
                    Poisson::new(r).expect("positive rate").sample(&mut self.rng) as usize
                } else {
                    usize::from(Bernoulli::new(r.min(1.0)).expect("probability").sample(&mut self.rng))
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub enum Policy {
    VertiSync(VertiSyncConfig),
    Fcfs,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::VertiSync(c) if c.exact => "vertisync-exact",
            Policy::VertiSync(_) => "vertisync-constructive",
            Policy::Fcfs => "fcfs",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TripRecord {
    pub id: usize,
    pub pair: usize,
    pub arrival: usize,
    pub takeoff: Option<usize>,
    pub landing: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleRecord {
    pub index: usize,
    pub start: usize,
    /// Last takeoff of the cycle.
    pub end: usize,
    pub requests: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub policy: String,
    pub horizon: usize,
    pub step_minutes: f64,
    /// `queues[n][p]` after the takeoffs of step `n`, for `n` in `0..=horizon`.
    pub queues: Vec<Vec<u32>>,
    pub trips: Vec<TripRecord>,
    pub cycles: Vec<CycleRecord>,
    /// Mean arrivals per step on the busiest pair over the final half of the horizon.
    pub arrival_rate: f64,
    pub violations: Vec<Violation>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

impl Metrics {
    pub fn generated(&self) -> usize {
        self.trips.len()
    }

    /// Requests that took off within the horizon.
    pub fn serviced(&self) -> usize {
        self.trips.iter().filter(|t| t.takeoff.is_some()).count()
    }

    pub fn served_per_pair(&self, num_pairs: usize) -> Vec<usize> {
        let mut s = vec![0; num_pairs];
        for t in self.trips.iter().filter(|t| t.takeoff.is_some()) {
            s[t.pair] += 1;
        }
        s
    }

    /// Wait until takeoff in steps; requests still queued count up to the horizon.
    fn wait(&self, t: &TripRecord) -> usize {
        t.takeoff.unwrap_or(self.horizon) - t.arrival
    }

    /// Mean wait in minutes of the serviced requests.
    pub fn mean_wait_minutes(&self) -> Option<f64> {
        mean(self.trips.iter().filter(|t| t.takeoff.is_some()).map(|t| self.wait(t) as f64)).map(|w| w * self.step_minutes)
    }

    /// Mean wait in minutes of requests arriving in `[from, to)`, with
    /// unserviced requests censored at the horizon.
    pub fn mean_wait_arrived(&self, from: usize, to: usize) -> Option<f64> {
        mean(self.trips.iter().filter(|t| t.arrival >= from && t.arrival < to).map(|t| self.wait(t) as f64))
            .map(|w| w * self.step_minutes)
    }

    /// `(bucket_start_step, mean_travel_minutes, trips)` over requests by
    /// arrival bucket. Travel runs from request to landing, counted for
    /// completed trips only.
    pub fn bucket_travel(&self, bucket_steps: usize) -> Vec<(usize, f64, usize)> {
        let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for t in &self.trips {
            if let Some(l) = t.landing.filter(|&l| l <= self.horizon) {
                let e = acc.entry(t.arrival / bucket_steps * bucket_steps).or_default();
                e.0 += (l - t.arrival) as f64;
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(b, (s, n))| (b, s / n as f64 * self.step_minutes, n)).collect()
    }

    pub fn max_queue_series(&self) -> Vec<f64> {
        self.queues.iter().map(|q| q.iter().copied().max().unwrap_or(0) as f64).collect()
    }

    pub fn verdict(&self, test: &SaturationTest) -> Result<Saturation, SimError> {
        saturation_verdict(&self.max_queue_series(), self.arrival_rate, test)
    }

    pub fn queues_csv(&self, net: &Network) -> String {
        let mut s = String::from("step,od_pair,queue_len\n");
        for (n, row) in self.queues.iter().enumerate() {
            for (p, q) in row.iter().enumerate() {
                let _ = writeln!(s, "{n},\"{}\",{q}", net.od_pairs[p].label());
            }
        }
        s
    }

    pub fn trips_csv(&self, net: &Network) -> String {
        let opt = |x: Option<usize>| x.map_or(String::new(), |v| v.to_string());
        let mut s = String::from("request_id,od_pair,arrival_step,takeoff_step,landing_step\n");
        for t in &self.trips {
            let _ = writeln!(
                s,
                "{},\"{}\",{},{},{}",
                t.id,
                net.od_pairs[t.pair].label(),
                t.arrival,
                opt(t.takeoff),
                opt(t.landing)
            );
        }
        s
    }

    pub fn cycles_csv(&self) -> String {
        let mut s = String::from("cycle_idx,start_step,end_step\n");
        for c in &self.cycles {
            let _ = writeln!(s, "{},{},{}", c.index, c.start, c.end);
        }
        s
    }
}

/// Step-by-step check of overlap classes and vertiport windows over all
/// committed flights.
struct Monitor {
    kt: usize,
    pads: Vec<usize>,
    occupancy: HashMap<usize, HashMap<usize, u16>>,
    takeoffs: Vec<HashMap<usize, u16>>,
    landings: Vec<HashMap<usize, u16>>,
}

impl Monitor {
    fn new(net: &Network) -> Self {
        let nv = net.num_vertiports();
        Self {
            kt: net.params.tau_steps,
            pads: (1..=nv).map(|v| net.pads(v)).collect(),
            occupancy: HashMap::new(),
            takeoffs: vec![HashMap::new(); nv],
            landings: vec![HashMap::new(); nv],
        }
    }

    fn commit(&mut self, net: &Network, f: &Flight) {
        let od = &net.od_pairs[f.pair];
        for (i, c) in od.interior() {
            *self.occupancy.entry(f.takeoff + i).or_default().entry(c).or_default() += 1;
        }
        *self.takeoffs[od.origin - 1].entry(f.takeoff).or_default() += 1;
        *self.landings[od.destination - 1].entry(f.takeoff + od.flight_time_steps).or_default() += 1;
    }

    fn check(&mut self, net: &Network, n: usize, out: &mut Vec<Violation>) {
        if let Some(occ) = self.occupancy.remove(&n) {
            let mut over: Vec<_> = occ.into_iter().filter(|e| e.1 > 1).collect();
            over.sort();
            for (c, k) in over {
                out.push(Violation {
                    kind: ViolationKind::SectorCapacity,
                    step: n,
                    detail: format!("{k} vehicles in {}", net.class_names[c]),
                });
            }
        }
        let lo = (n + 1).saturating_sub(self.kt);
        for v in 0..self.pads.len() {
            let t = |s: usize| self.takeoffs[v].get(&s).copied().unwrap_or(0) as usize;
            let l = |s: usize| self.landings[v].get(&s).copied().unwrap_or(0) as usize;
            let window: usize = (lo..=n).map(t).sum();
            if window > self.pads[v] {
                out.push(Violation {
                    kind: ViolationKind::TakeoffWindow,
                    step: n,
                    detail: format!("{window} takeoffs at {} within one window", v + 1),
                });
            }
            let near: usize = (lo..n).map(l).sum();
            if t(n) + near > self.pads[v] {
                out.push(Violation {
                    kind: ViolationKind::LandingWindow,
                    step: n,
                    detail: format!("{} takeoffs and {near} recent landings at {}", t(n), v + 1),
                });
            }
        }
        // steps older than one window are no longer read
        if n >= self.kt {
            for v in 0..self.pads.len() {
                self.takeoffs[v].remove(&(n - self.kt));
                self.landings[v].remove(&(n - self.kt));
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Parked {
    at: usize,
    charge: f64,
    ready: usize,
    recharge_until: Option<usize>,
}

fn snapshot(net: &Network, fleet: &[Parked], recent: &[Flight], t: usize) -> FleetSnapshot {
    let kt = net.params.tau_steps;
    let lo = (t + 1).saturating_sub(kt);
    let mut snap = FleetSnapshot {
        time: t,
        vehicles: fleet
            .iter()
            .map(|v| {
                let running = v.recharge_until.filter(|&u| u > t);
                VehicleState {
                    location: Location::Parked { vertiport: v.at },
                    charge: if running.is_some() { net.params.e_max } else { v.charge },
                    ready_at: v.ready,
                    recharge_until: running,
                    recharge_on_landing: false,
                }
            })
            .collect(),
        recent_takeoffs: Vec::new(),
        recent_landings: Vec::new(),
    };
    for f in recent {
        let od = &net.od_pairs[f.pair];
        let land = f.takeoff + od.flight_time_steps;
        if (lo..=t).contains(&f.takeoff) {
            snap.recent_takeoffs.push((od.origin, f.takeoff));
        }
        if (lo..=t).contains(&land) {
            snap.recent_landings.push((od.destination, land));
        }
    }
    snap
}

fn apply(net: &Network, fleet: &mut [Parked], flights: &[Flight]) {
    let prm = &net.params;
    let mut order: Vec<&Flight> = flights.iter().collect();
    order.sort_by_key(|f| (f.takeoff, f.vehicle));
    for f in order {
        let od = &net.od_pairs[f.pair];
        let land = f.takeoff + od.flight_time_steps;
        let v = &mut fleet[f.vehicle];
        v.charge -= od.energy_per_flight;
        v.at = od.destination;
        v.ready = land + prm.tau_steps;
        if f.recharge {
            v.charge = prm.e_max;
            v.recharge_until = Some(land + prm.recharge_steps);
        }
    }
}

/// Simulate `horizon` steps after `fleet0.time`.
pub fn run(
    net: &Network,
    policy: &Policy,
    demand: &DemandModel,
    horizon: usize,
    fleet0: &FleetSnapshot,
) -> Result<Metrics, SimError> {
    demand.validate(net)?;
    if fleet0.is_empty() || !fleet0.airspace_empty() {
        return Err(SimError::BadFleet);
    }
    let np = net.num_pairs();
    let t0 = fleet0.time;
    let t_end = t0 + horizon;
    let capacity = match policy {
        Policy::VertiSync(c) => c.capacity,
        Policy::Fcfs => 1,
    };
    let mut stream = demand.stream(net);
    let mut monitor = Monitor::new(net);
    let mut violations = Vec::new();
    let mut queues: Vec<VecDeque<usize>> = vec![VecDeque::new(); np];
    let mut trips: Vec<TripRecord> = Vec::new();
    let mut cycles = Vec::new();
    let mut pending: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut executed: Vec<Flight> = Vec::new();
    let mut queue_rows = vec![vec![0u32; np]];

    let mut fleet: Vec<Parked> = fleet0
        .vehicles
        .iter()
        .map(|v| {
            let Location::Parked { vertiport } = v.location else { unreachable!("checked parked") };
            Parked { at: vertiport, charge: v.charge, ready: v.ready_at, recharge_until: v.recharge_until }
        })
        .collect();
    let mut fcfs = matches!(policy, Policy::Fcfs).then(|| FcfsScheduler::new(net, fleet0));
    let mut next_boundary = t0 + 1;

    for n in t0 + 1..=t_end {
        let arrivals = stream.draw(n);
        for (p, &k) in arrivals.iter().enumerate() {
            for _ in 0..k {
                let id = trips.len();
                trips.push(TripRecord { id, pair: p, arrival: n, takeoff: None, landing: None });
                queues[p].push_back(id);
                if let Some(sched) = fcfs.as_mut() {
                    let flights = sched.request(net, p, n);
                    let last = flights.last().expect("a request yields its service flight");
                    pending.entry(last.takeoff).or_default().push(id);
                    for f in &flights {
                        monitor.commit(net, f);
                    }
                    executed.extend(flights);
                }
            }
        }

        if let (Policy::VertiSync(cfg), true) = (policy, n == next_boundary) {
            let snap = snapshot(net, &fleet, &executed, n);
            let state = PolicyState {
                queues: queues.iter().map(|q| q.iter().map(|&id| trips[id].arrival).collect()).collect(),
                fleet: snap.clone(),
                clock: n,
            };
            let q = state.queue_lengths();
            let report = vertisync_cycle(net, &state, cfg)?;
            let mut sched: Schedule = report.schedule;
            sched.sort();
            violations.extend(validate_schedule(&sched, net, &snap, &q, capacity));
            // requests leave in arrival order within each pair
            let mut cursor = vec![0usize; np];
            for f in &sched.flights {
                let take = f.passengers.min(q[f.pair] - cursor[f.pair]);
                let ids = queues[f.pair].iter().skip(cursor[f.pair]).take(take).copied();
                pending.entry(f.takeoff).or_default().extend(ids);
                cursor[f.pair] += take;
                monitor.commit(net, f);
            }
            apply(net, &mut fleet, &sched.flights);
            if !sched.flights.is_empty() {
                cycles.push(CycleRecord { index: cycles.len(), start: n, end: sched.end, requests: q.iter().sum() });
            }
            next_boundary = sched.last_landing(net).max(n + 1);
            executed.extend(sched.flights);
            // keep only flights that can still touch a vertiport window
            let horizon_cut = n.saturating_sub(net.params.tau_steps + net.max_flight_steps());
            if executed.len() > 4096 && fcfs.is_none() {
                executed.retain(|f| f.takeoff >= horizon_cut);
            }
        }

        if let Some(ids) = pending.remove(&n) {
            for id in ids {
                let t = &mut trips[id];
                t.takeoff = Some(n);
                t.landing = Some(n + net.od_pairs[t.pair].flight_time_steps);
                let q = &mut queues[t.pair];
                let pos = q.iter().position(|&x| x == id).expect("serviced request is queued");
                q.remove(pos);
            }
        }
        monitor.check(net, n, &mut violations);
        queue_rows.push(queues.iter().map(|q| q.len() as u32).collect());
    }

    // replay of everything that took off within the horizon
    if let Some(sched) = fcfs.as_ref() {
        let mut all = sched.schedule();
        all.flights.retain(|f| f.takeoff <= t_end);
        all.finish();
        violations.extend(validate_schedule(&all, net, fleet0, &vec![0; np], capacity));
    }
    violations.sort_by(|a, b| (a.step, a.kind as u8, &a.detail).cmp(&(b.step, b.kind as u8, &b.detail)));

    let half = t0 + horizon / 2;
    let arrival_rate = mean((half + 1..=t_end).map(|n| demand.mean_rate(net, n).into_iter().fold(0.0, f64::max)))
        .unwrap_or(0.0);
    Ok(Metrics {
        policy: policy.name().to_string(),
        horizon: t_end,
        step_minutes: net.params.step_minutes,
        queues: queue_rows,
        trips,
        cycles,
        arrival_rate,
        violations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Saturation {
    UnderSaturated,
    OverSaturated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationTest {
    /// Slope allowance as a fraction of the arrival rate.
    pub eps_sat: f64,
    pub min_samples: usize,
}

impl Default for SaturationTest {
    fn default() -> Self {
        Self { eps_sat: 0.05, min_samples: 200 }
    }
}

/// Least-squares slope test on the final half of a queue series.
pub fn saturation_verdict(series: &[f64], arrival_rate: f64, test: &SaturationTest) -> Result<Saturation, SimError> {
    if series.len() < test.min_samples.max(2) {
        return Err(SimError::InsufficientData(series.len(), test.min_samples.max(2)));
    }
    let tail = &series[series.len() / 2..];
    let k = tail.len() as f64;
    let xm = (k - 1.0) / 2.0;
    let ym = tail.iter().sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in tail.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(if slope <= test.eps_sat * arrival_rate { Saturation::UnderSaturated } else { Saturation::OverSaturated })
}

/// Majority verdict; ties count as over-saturated.
pub fn majority(verdicts: &[Saturation]) -> Saturation {
    let under = verdicts.iter().filter(|&&v| v == Saturation::UnderSaturated).count();
    if 2 * under > verdicts.len() {
        Saturation::UnderSaturated
    } else {
        Saturation::OverSaturated
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub test: SaturationTest,
    /// Bracket width, relative to its midpoint, at which bisection stops.
    pub rel_width: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { horizon: 50_000, seeds: (1..=5).collect(), test: SaturationTest::default(), rel_width: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub scale: f64,
    pub verdict: Saturation,
    pub under_votes: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    /// Midpoint of the final bracket.
    pub lambda_star: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scale,verdict\n");
        for p in &self.points {
            let v = match p.verdict {
                Saturation::UnderSaturated => "under",
                Saturation::OverSaturated => "over",
            };
            let _ = writeln!(s, "{},{v}", p.scale);
        }
        s
    }
}

/// Majority verdict over seeds at one demand scale.
pub fn evaluate_scale(
    net: &Network,
    policy: &Policy,
    direction: &[f64],
    fleet0: &FleetSnapshot,
    scale: f64,
    cfg: &SweepConfig,
) -> Result<SweepPoint, SimError> {
    let rates: Vec<f64> = direction.iter().map(|d| d * scale).collect();
    let runs: Vec<Result<(Saturation, usize), SimError>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let m = run(net, policy, &DemandModel::bernoulli(rates.clone(), seed), cfg.horizon, fleet0)?;
            Ok((m.verdict(&cfg.test)?, m.violations.len()))
        })
        .collect();
    let mut verdicts = Vec::new();
    let mut violations = 0;
    for r in runs {
        let (v, k) = r?;
        verdicts.push(v);
        violations += k;
    }
    let under_votes = verdicts.iter().filter(|&&v| v == Saturation::UnderSaturated).count();
    Ok(SweepPoint { scale, verdict: majority(&verdicts), under_votes, violations })
}

/// Bisection on the Bernoulli demand `s·direction` for the under/over-saturation transition.
pub fn throughput_sweep(
    net: &Network,
    policy: &Policy,
    direction: &[f64],
    fleet0: &FleetSnapshot,
    cfg: &SweepConfig,
) -> Result<SweepResult, SimError> {
    if direction.len() != net.num_pairs() {
        return Err(SimError::BadDirection(format!("{} entries for {} pairs", direction.len(), net.num_pairs())));
    }
    if direction.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(SimError::BadDirection("entries must be finite and non-negative".into()));
    }
    let dmax = direction.iter().copied().fold(0.0, f64::max);
    if dmax <= 0.0 {
        return Err(SimError::BadDirection("direction is zero".into()));
    }
    let s_max = 1.0 / dmax;
    // no pair can exceed its origin's pads per takeoff window
    let kt = net.params.tau_steps.max(1) as f64;
    let cap = (0..net.num_pairs())
        .filter(|&p| direction[p] > 0.0)
        .map(|p| net.pads(net.od_pairs[p].origin) as f64 / kt / direction[p])
        .fold(f64::INFINITY, f64::min);
    let mut points = Vec::new();
    let mut lo = 0.0;
    let mut hi = (1.25 * cap).min(s_max);
    loop {
        let pt = evaluate_scale(net, policy, direction, fleet0, hi, cfg)?;
        let over = pt.verdict == Saturation::OverSaturated;
        points.push(pt);
        if over {
            break;
        }
        lo = hi;
        if hi >= s_max {
            return Ok(SweepResult { lambda_star: s_max, points });
        }
        hi = (2.0 * hi).min(s_max);
    }
    while (hi - lo) / (0.5 * (hi + lo)) > cfg.rel_width {
        let mid = 0.5 * (lo + hi);
        let pt = evaluate_scale(net, policy, direction, fleet0, mid, cfg)?;
        if pt.verdict == Saturation::UnderSaturated {
            lo = mid;
        } else {
            hi = mid;
        }
        points.push(pt);
    }
    Ok(SweepResult { lambda_star: 0.5 * (lo + hi), points })
}
