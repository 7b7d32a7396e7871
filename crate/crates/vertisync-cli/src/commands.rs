use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use rayon::prelude::*;
use vertisync::network::Network;
use vertisync::scheduler::{validate_schedule, vertisync_cycle, PolicyState, ScheduleError};
use vertisync::servicevec::{
    classify, compute_c, fleet_bound_corollary1, fleet_bound_theorem1, ServiceVector, ThroughputRegion,
};
use vertisync::sim::{run, throughput_sweep, SimError};
use vertisync::tfmp::{build_instance, estimate_for, estimate_size, horizon_bound, preprocess};

use crate::config::{Engine, ExperimentConfig};

/// Exit code for a cycle with no feasible schedule inside its horizon.
pub const EXIT_INFEASIBLE: i32 = 3;

fn write(out: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let p = out.join(name);
    fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
}

fn pair_cols(net: &Network, prefix: &str) -> String {
    net.od_pairs.iter().map(|p| format!(",{prefix}_{}_{}", p.origin, p.destination)).collect()
}

fn class_name(net: &Network, v: &ServiceVector) -> Result<&'static str> {
    Ok(match classify(net, v)? {
        vertisync::servicevec::Symmetry::Symmetric => "symmetric",
        vertisync::servicevec::Symmetry::Reversible => "reversible",
        vertisync::servicevec::Symmetry::Neither => "neither",
    })
}

pub fn enumerate(cfg: &ExperimentConfig) -> Result<()> {
    let net = cfg.network()?;
    let r = cfg.vectors(&net)?;
    let fleet = cfg.fleet.size;
    let b1 = fleet_bound_theorem1(&r);
    let b2 = fleet_bound_corollary1(&net, &r).ok();
    println!("{} service vectors on {} pairs", r.len(), net.num_pairs());
    let mut csv = format!("index,symmetric,class,c{}\n", pair_cols(&net, "rate"));
    for (i, v) in r.iter().enumerate() {
        let class = class_name(&net, v)?;
        let c = if fleet > 0 { compute_c(&net, v, fleet).ok() } else { None };
        let c_txt = c.map_or("-".to_string(), |c| format!("{c}"));
        println!("  r{i:<4} {:?} symmetric={} {class} c={c_txt}", v.rates, v.symmetric);
        let _ = write!(csv, "{i},{},{class},{}", v.symmetric, c.map_or(String::new(), |c| c.to_string()));
        for x in &v.rates {
            let _ = write!(csv, ",{x}");
        }
        csv.push('\n');
    }
    println!("fleet bound (all vectors): {b1}");
    match b2 {
        Some(b) => println!("fleet bound (symmetric vectors): {b}"),
        None => println!("fleet bound (symmetric vectors): not applicable"),
    }
    write(&cfg.run.out, "service_vectors.csv", &csv)
}

pub fn regions(cfg: &ExperimentConfig) -> Result<()> {
    let net = cfg.network()?;
    let sec = cfg.regions.as_ref().context("config has no [regions] section")?;
    ensure!(sec.ray.len() == net.num_pairs(), "ray has {} entries for {} pairs", sec.ray.len(), net.num_pairs());
    ensure!(sec.ray.iter().all(|x| x.is_finite() && *x >= 0.0), "ray entries must be non-negative");
    ensure!(sec.ray.iter().any(|&x| x > 0.0), "ray is zero");
    ensure!(sec.points >= 1, "points must be positive");
    let r = cfg.vectors(&net)?;
    let d = ThroughputRegion::necessary(&r);
    let d1 = ThroughputRegion::sufficient(&net, &r, cfg.fleet.size)?;
    // the symmetric inner set needs every vector symmetric and a large enough fleet
    let d2 = match fleet_bound_corollary1(&net, &r) {
        Ok(b) if cfg.fleet.size >= b => Some(ThroughputRegion::necessary(&r)),
        _ => None,
    };
    let sd = d.boundary_scale(&sec.ray);
    let s1 = d1.boundary_scale(&sec.ray);
    println!("outer boundary scale {sd}");
    println!("inner boundary scale {s1}");
    let top = sec.max_scale.unwrap_or(1.5 * sd);
    let mut csv = String::from("scale,in_D,in_D1,in_D2\n");
    for k in 1..=sec.points {
        let s = top * k as f64 / sec.points as f64;
        let lam: Vec<f64> = sec.ray.iter().map(|x| x * s).collect();
        let in_d = d.contains(&lam, false, 1e-9);
        let in_d1 = d1.contains(&lam, true, 1e-9);
        let in_d2 = d2.as_ref().map_or(String::new(), |g| g.contains(&lam, true, 1e-9).to_string());
        let _ = writeln!(csv, "{s},{in_d},{in_d1},{in_d2}");
    }
    write(&cfg.run.out, "regions.csv", &csv)
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let net = cfg.network()?;
    let fleet = cfg.fleet(&net)?;
    let policy = cfg.policy(&net)?;
    ensure!(cfg.run.horizon_steps >= 1, "run.horizon_steps must be at least 1");
    let runs: Vec<(u64, Result<_, SimError>)> = cfg
        .run
        .seeds
        .par_iter()
        .map(|&seed| {
            let m = cfg.demand(&net, seed).map_err(|e| SimError::BadDemand(e.to_string()));
            (seed, m.and_then(|d| run(&net, &policy, &d, cfg.run.horizon_steps, &fleet)))
        })
        .collect();
    let mut summary = String::from("seed,generated,serviced,mean_wait_min,peak_travel_min,violations\n");
    for (seed, m) in runs {
        let m = m?;
        let dir = cfg.run.out.join(format!("seed_{seed}"));
        write(&dir, "queues.csv", &m.queues_csv(&net))?;
        write(&dir, "trips.csv", &m.trips_csv(&net))?;
        write(&dir, "cycles.csv", &m.cycles_csv())?;
        let bucket = (10.0 / net.params.step_minutes).round().max(1.0) as usize;
        let peak = m.bucket_travel(bucket).iter().map(|b| b.1).fold(0.0, f64::max);
        let wait = m.mean_wait_minutes().unwrap_or(0.0);
        println!(
            "seed {seed}: {} serviced of {} generated, mean wait {wait:.2} min, peak travel {peak:.2} min, {} violations",
            m.serviced(),
            m.generated(),
            m.violations.len()
        );
        let _ = writeln!(summary, "{seed},{},{},{wait},{peak},{}", m.generated(), m.serviced(), m.violations.len());
    }
    write(&cfg.run.out, "summary.csv", &summary)
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<()> {
    let net = cfg.network()?;
    let fleet = cfg.fleet(&net)?;
    let policy = cfg.policy(&net)?;
    let (dir, sc) = cfg.sweep_config()?;
    let res = throughput_sweep(&net, &policy, &dir, &fleet, &sc)?;
    for p in &res.points {
        println!("  scale {:<12} {:?} ({} of {} under)", p.scale, p.verdict, p.under_votes, sc.seeds.len());
    }
    println!("lambda* = {}", res.lambda_star);
    write(&cfg.run.out, "sweep.csv", &res.to_csv())
}

pub fn size(cfg: &ExperimentConfig) -> Result<()> {
    let sec = cfg.size.clone().unwrap_or_default();
    let explicit = sec.vertiports.is_some() && sec.pairs.is_some() && sec.sectors.is_some();
    if explicit {
        let a = sec.vehicles.unwrap_or(cfg.fleet.size);
        let m = sec.mk_steps.context("size.mk_steps is required with explicit counts")?;
        let (v, p, s) = (sec.vertiports.unwrap(), sec.pairs.unwrap(), sec.sectors.unwrap());
        let (vars, rows) = estimate_size(v, p, s, a, m);
        println!("inputs |V|={v} |P|={p} sum|S_p|={s} |A|={a} M={m}");
        println!("variables (formula) {vars}");
        println!("constraints (upper bound) {rows}");
        return Ok(());
    }
    let net = cfg.network()?;
    let fleet = cfg.fleet(&net)?;
    let q = cfg.schedule.as_ref().map_or(vec![0; net.num_pairs()], |s| s.queues.clone());
    ensure!(q.len() == net.num_pairs(), "queues has {} entries for {} pairs", q.len(), net.num_pairs());
    let m = match sec.mk_steps {
        Some(m) => m,
        None => cfg.mk_steps(&net)?.unwrap_or_else(|| horizon_bound(&net, &q)),
    };
    let (vars, rows) = estimate_for(&net, fleet.len(), m);
    println!(
        "inputs |V|={} |P|={} sum|S_p|={} |A|={} M={m}",
        net.num_vertiports(),
        net.num_pairs(),
        net.total_sectors(),
        fleet.len()
    );
    println!("variables (formula) {vars}");
    println!("constraints (upper bound) {rows}");
    if m == 0 {
        println!("empty horizon: nothing to build");
        return Ok(());
    }
    let inst = build_instance(&net, &fleet, &q, m, cfg.policy.capacity)?;
    println!("built {} variables, {} constraints", inst.num_vars(), inst.num_constraints());
    let pre = preprocess(&inst);
    println!("preprocessed {} variables, {} constraints", pre.num_vars(), pre.num_constraints());
    Ok(())
}

/// Returns the process exit code.
pub fn schedule(cfg: &ExperimentConfig) -> Result<i32> {
    let net = cfg.network()?;
    let fleet = cfg.fleet(&net)?;
    let sec = cfg.schedule.as_ref().context("config has no [schedule] section")?;
    ensure!(sec.queues.len() == net.num_pairs(), "queues has {} entries for {} pairs", sec.queues.len(), net.num_pairs());
    let vs = cfg.vertisync(&net)?;
    let mut state = PolicyState::new(&net, fleet.clone());
    for (p, &n) in sec.queues.iter().enumerate() {
        state.queues[p].extend(std::iter::repeat_n(fleet.time, n));
    }
    let t = Instant::now();
    let report = match vertisync_cycle(&net, &state, &vs) {
        Ok(r) => r,
        Err(ScheduleError::InfeasibleCycle(h)) => {
            println!("status infeasible");
            println!("horizon {h} steps");
            write(&cfg.run.out, "schedule_report.csv", &format!("key,value\nstatus,infeasible\nhorizon_steps,{h}\n"))?;
            return Ok(EXIT_INFEASIBLE);
        }
        Err(e) => return Err(e.into()),
    };
    let cpu = t.elapsed().as_secs_f64();
    let s = &report.schedule;
    let violations = validate_schedule(s, &net, &fleet, &sec.queues, vs.capacity);
    let minutes = s.length() as f64 * net.params.step_minutes;
    let engine = if cfg.policy.engine == Engine::Exact { "exact" } else { "constructive" };
    println!("status feasible");
    println!("engine {engine}");
    println!("cycle length {minutes} min");
    println!("objective {}", report.objective);
    if report.gap.is_finite() {
        println!("gap {:.4}%", 100.0 * report.gap);
    }
    println!("cpu {cpu:.2} s");
    println!("violations {}", violations.len());
    let mut rep = String::from("key,value\nstatus,feasible\n");
    let _ = writeln!(rep, "engine,{engine}");
    let _ = writeln!(rep, "cycle_minutes,{minutes}");
    let _ = writeln!(rep, "objective,{}", report.objective);
    let _ = writeln!(rep, "gap,{}", if report.gap.is_finite() { report.gap.to_string() } else { String::new() });
    let _ = writeln!(rep, "nodes,{}", report.nodes);
    let _ = writeln!(rep, "horizon_steps,{}", report.horizon);
    let _ = writeln!(rep, "violations,{}", violations.len());
    write(&cfg.run.out, "schedule_report.csv", &rep)?;
    let mut csv = String::from("vehicle,od_pair,takeoff_step,landing_step,passengers,recharge\n");
    for f in &s.flights {
        let od = &net.od_pairs[f.pair];
        let _ = writeln!(
            csv,
            "{},\"{}\",{},{},{},{}",
            f.vehicle,
            od.label(),
            f.takeoff,
            f.takeoff + od.flight_time_steps,
            f.passengers,
            f.recharge
        );
    }
    write(&cfg.run.out, "flights.csv", &csv)?;
    write(&cfg.run.out, "schedule.csv", &s.to_csv(&net, &fleet))?;
    Ok(0)
}
