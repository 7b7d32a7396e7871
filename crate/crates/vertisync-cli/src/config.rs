//! Experiment configuration file.
//!
//! One TOML document with a `schema_version` key. Per-pair vectors (rates,
//! rays, queues) follow the route order of the network file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Deserialize;
use vertisync::network::{build_network, preset_spec, Network, NetworkSpec};
use vertisync::scheduler::{FleetSnapshot, VertiSyncConfig};
use vertisync::servicevec::{enumerate_with, EnumerateOptions, ServiceVector};
use vertisync::sim::{DemandKind, DemandModel, Policy, SaturationTest, SweepConfig};
use vertisync::solver::IlpOptions;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub network: NetworkConfig,
    #[serde(default)]
    pub fleet: FleetConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    pub demand: Option<DemandConfig>,
    #[serde(default)]
    pub run: RunConfig,
    pub sweep: Option<SweepSection>,
    pub regions: Option<RegionsSection>,
    pub schedule: Option<ScheduleSection>,
    pub size: Option<SizeSection>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub preset: Option<String>,
    /// Network TOML file, relative to the config file.
    pub file: Option<PathBuf>,
    pub inline: Option<NetworkSpec>,
    /// Vertipads at every vertiport.
    pub pads: Option<usize>,
    /// Recharge completes within the landing turnaround.
    #[serde(default)]
    pub instant_recharge: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Placement {
    /// `"spread"` or `"all:<vertiport>"`.
    Named(String),
    List(Vec<usize>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetConfig {
    #[serde(default)]
    pub size: usize,
    #[serde(default = "spread")]
    pub placement: Placement,
}

fn spread() -> Placement {
    Placement::Named("spread".into())
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self { size: 0, placement: spread() }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    #[default]
    Vertisync,
    Fcfs,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Constructive,
    Exact,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(default)]
    pub kind: PolicyKind,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default = "one")]
    pub capacity: usize,
    pub node_limit: Option<usize>,
    #[serde(default)]
    pub gap: f64,
    /// Cycle horizon override for the exact engine.
    pub mk_minutes: Option<f64>,
    #[serde(default = "yes")]
    pub preprocess: bool,
    /// Pairs (0-based route indices) allowed in enumerated service vectors.
    pub support: Option<Vec<usize>>,
    #[serde(default)]
    pub maximal_only: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Vertisync,
            engine: Engine::Constructive,
            capacity: 1,
            node_limit: None,
            gap: 0.0,
            mk_minutes: None,
            preprocess: true,
            support: None,
            maximal_only: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum DemandKindConfig {
    Bernoulli,
    Poisson,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start_minute: f64,
    /// Requests per τ on each pair.
    pub rates: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandConfig {
    pub kind: DemandKindConfig,
    /// Bernoulli: arrival probability per step on each pair.
    pub rates: Option<Vec<f64>>,
    /// Poisson: piecewise-constant rates.
    pub segments: Option<Vec<Segment>>,
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub horizon_steps: usize,
    #[serde(default = "first_seed")]
    pub seeds: Vec<u64>,
    #[serde(default = "out_dir")]
    pub out: PathBuf,
}

fn first_seed() -> Vec<u64> {
    vec![1]
}

fn out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { horizon_steps: 0, seeds: first_seed(), out: out_dir() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub direction: Vec<f64>,
    pub horizon_steps: Option<usize>,
    #[serde(default = "five_percent")]
    pub rel_width: f64,
    #[serde(default = "five_percent")]
    pub eps_sat: f64,
    #[serde(default = "min_samples")]
    pub min_samples: usize,
}

fn five_percent() -> f64 {
    0.05
}

fn min_samples() -> usize {
    200
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsSection {
    pub ray: Vec<f64>,
    /// Largest scale on the grid; defaults to 1.5 times the outer boundary.
    pub max_scale: Option<f64>,
    #[serde(default = "grid_points")]
    pub points: usize,
}

fn grid_points() -> usize {
    20
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub queues: Vec<usize>,
}

/// Explicit size-formula inputs. Any field left out comes from the network,
/// the fleet, and the horizon.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeSection {
    pub vertiports: Option<usize>,
    pub pairs: Option<usize>,
    pub sectors: Option<usize>,
    pub vehicles: Option<usize>,
    pub mk_steps: Option<usize>,
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub engine: Option<Engine>,
    pub gap: Option<f64>,
    pub mk_minutes: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path, ov: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        ensure!(
            cfg.schema_version == SCHEMA_VERSION,
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            cfg.schema_version
        );
        if let Some(f) = &cfg.network.file {
            let base = path.parent().unwrap_or(Path::new("."));
            let full = base.join(f);
            ensure!(full.is_file(), "network file {} does not exist", full.display());
            cfg.network.file = Some(full);
        }
        if let Some(s) = ov.seed {
            cfg.run.seeds = vec![s];
        }
        if let Some(o) = &ov.out {
            cfg.run.out = o.clone();
        }
        if let Some(e) = ov.engine {
            cfg.policy.engine = e;
        }
        if let Some(g) = ov.gap {
            cfg.policy.gap = g;
        }
        if let Some(m) = ov.mk_minutes {
            cfg.policy.mk_minutes = Some(m);
        }
        ensure!(!cfg.run.seeds.is_empty(), "seeds must be nonempty");
        ensure!(cfg.policy.capacity >= 1, "capacity must be at least 1");
        ensure!(cfg.policy.gap >= 0.0, "gap must be non-negative");
        Ok(cfg)
    }

    pub fn network(&self) -> Result<Network> {
        let nc = &self.network;
        let mut spec = match (&nc.preset, &nc.file, &nc.inline) {
            (Some(p), None, None) => preset_spec(p)?,
            (None, Some(f), None) => NetworkSpec::from_toml(&fs::read_to_string(f)?)?,
            (None, None, Some(s)) => s.clone(),
            _ => bail!("give exactly one of network.preset, network.file, network.inline"),
        };
        if let Some(p) = nc.pads {
            spec.set_pads(p);
        }
        if nc.instant_recharge {
            spec.params.recharge_minutes = 0.0;
        }
        Ok(build_network(&spec)?)
    }

    pub fn fleet(&self, net: &Network) -> Result<FleetSnapshot> {
        let f = &self.fleet;
        let nv = net.num_vertiports();
        let snap = match &f.placement {
            Placement::List(v) => {
                ensure!(f.size == 0 || f.size == v.len(), "fleet.size disagrees with the placement list");
                ensure!(v.iter().all(|&x| (1..=nv).contains(&x)), "placement names an unknown vertiport");
                FleetSnapshot::parked(net, v)
            }
            Placement::Named(s) if s == "spread" => FleetSnapshot::spread(net, f.size),
            Placement::Named(s) => match s.strip_prefix("all:").and_then(|v| v.parse::<usize>().ok()) {
                Some(v) if (1..=nv).contains(&v) => FleetSnapshot::all_at(net, f.size, v),
                _ => bail!("placement must be \"spread\", \"all:<vertiport>\" or a list"),
            },
        };
        ensure!(!snap.is_empty(), "fleet is empty");
        Ok(snap)
    }

    pub fn vectors(&self, net: &Network) -> Result<Vec<ServiceVector>> {
        let opts = EnumerateOptions {
            support: self.policy.support.clone(),
            maximal_only: self.policy.maximal_only,
            ..EnumerateOptions::default()
        };
        if let Some(s) = &opts.support {
            ensure!(!s.is_empty(), "policy.support is empty");
            ensure!(s.iter().all(|&p| p < net.num_pairs()), "policy.support names an unknown pair");
        }
        Ok(enumerate_with(net, &opts)?)
    }

    pub fn ilp(&self) -> IlpOptions {
        let mut o = IlpOptions { gap: self.policy.gap, ..IlpOptions::default() };
        if let Some(n) = self.policy.node_limit {
            o.node_limit = n;
        }
        o
    }

    pub fn mk_steps(&self, net: &Network) -> Result<Option<usize>> {
        match self.policy.mk_minutes {
            None => Ok(None),
            Some(m) => {
                let k = m / net.params.step_minutes;
                ensure!(k >= 0.0 && (k - k.round()).abs() < 1e-9, "mk_minutes must be a whole number of steps");
                Ok(Some(k.round() as usize))
            }
        }
    }

    pub fn vertisync(&self, net: &Network) -> Result<VertiSyncConfig> {
        let exact = self.policy.engine == Engine::Exact;
        let vectors = if exact { Vec::new() } else { self.vectors(net)? };
        Ok(VertiSyncConfig {
            vectors,
            capacity: self.policy.capacity,
            exact,
            horizon: self.mk_steps(net)?,
            ilp: self.ilp(),
            preprocess: self.policy.preprocess,
        })
    }

    pub fn policy(&self, net: &Network) -> Result<Policy> {
        Ok(match self.policy.kind {
            PolicyKind::Fcfs => Policy::Fcfs,
            PolicyKind::Vertisync => Policy::VertiSync(self.vertisync(net)?),
        })
    }

    pub fn demand(&self, net: &Network, seed: u64) -> Result<DemandModel> {
        let d = self.demand.as_ref().context("config has no [demand] section")?;
        let kind = match d.kind {
            DemandKindConfig::Bernoulli => {
                ensure!(d.segments.is_none(), "bernoulli demand takes rates, not segments");
                DemandKind::Bernoulli(d.rates.clone().context("bernoulli demand needs rates")?)
            }
            DemandKindConfig::Poisson => {
                ensure!(d.rates.is_none(), "poisson demand takes segments, not rates");
                let segs = d.segments.as_ref().context("poisson demand needs segments")?;
                let mut out = Vec::with_capacity(segs.len());
                for s in segs {
                    let k = s.start_minute / net.params.step_minutes;
                    ensure!(k >= 0.0 && (k - k.round()).abs() < 1e-9, "segment start must fall on a step");
                    out.push((k.round() as usize, s.rates.clone()));
                }
                DemandKind::PoissonPiecewise(out)
            }
        };
        let model = DemandModel { kind, seed }.scaled(d.scale);
        model.validate(net)?;
        Ok(model)
    }

    pub fn sweep_config(&self) -> Result<(Vec<f64>, SweepConfig)> {
        let s = self.sweep.as_ref().context("config has no [sweep] section")?;
        let horizon = s.horizon_steps.unwrap_or(self.run.horizon_steps);
        ensure!(horizon >= 1, "sweep needs horizon_steps");
        Ok((
            s.direction.clone(),
            SweepConfig {
                horizon,
                seeds: self.run.seeds.clone(),
                test: SaturationTest { eps_sat: s.eps_sat, min_samples: s.min_samples },
                rel_width: s.rel_width,
            },
        ))
    }
}
