//! Sector-discretized vertiport networks.
//!
//! A route is an ordered list of sectors traversed one per time step. Its
//! first and last sectors sit on vertipads at the endpoints; interior sectors
//! carry an overlap class, and sectors of different routes with the same class
//! are one physical airspace volume of capacity 1.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Vertiport {
    pub id: usize,
    pub num_vertipads: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SectorRef {
    pub route_id: usize,
    pub index_in_route: usize,
    pub overlap_class: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OdPair {
    pub id: usize,
    pub origin: usize,
    pub destination: usize,
    pub sectors: Vec<SectorRef>,
    pub flight_time_steps: usize,
    pub rebalance_time_steps: usize,
    pub energy_per_flight: f64,
}

impl OdPair {
    /// Interior sectors as `(index, class)`; endpoints are vertipads.
    pub fn interior(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let last = self.sectors.len() - 1;
        self.sectors[1..last].iter().map(|s| (s.index_in_route, s.overlap_class))
    }

    pub fn label(&self) -> String {
        format!("({},{})", self.origin, self.destination)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkParams {
    pub tau_steps: usize,
    pub recharge_steps: usize,
    pub e_min: f64,
    pub e_max: f64,
    pub step_minutes: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Network {
    pub vertiports: Vec<Vertiport>,
    pub od_pairs: Vec<OdPair>,
    pub params: NetworkParams,
    pub class_names: Vec<String>,
    #[serde(skip)]
    paths: HashMap<(usize, usize), Vec<usize>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("vertiport {0} cannot reach every other vertiport")]
    NotStronglyConnected(usize),
    #[error("takeoff separation {tau} min is not an integer multiple of the {step} min step")]
    NonIntegerKTau { tau: f64, step: f64 },
    #[error("more than one route from {0} to {1}")]
    DuplicateRoute(usize, usize),
    #[error("route ({0},{1}): {2}")]
    BadOverlapClass(usize, usize, String),
    #[error("invalid vertiport: {0}")]
    BadVertiport(String),
    #[error("invalid route: {0}")]
    BadRoute(String),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("no route sequence from {0} to {1}")]
    NoPath(usize, usize),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct ParamsSpec {
    pub tau_minutes: f64,
    pub step_minutes: f64,
    #[serde(default)]
    pub recharge_minutes: f64,
    pub e_min: f64,
    pub e_max: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct VertiportSpec {
    pub id: usize,
    #[serde(default = "one")]
    pub pads: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct RouteSpec {
    pub origin: usize,
    pub destination: usize,
    /// Sector count including both vertipad sectors. Taken from the mirrored
    /// route when `mirror` is set.
    #[serde(default)]
    pub sectors: usize,
    pub energy: f64,
    /// Named overlap classes as `[index, name]`.
    #[serde(default)]
    pub shared: Vec<(usize, String)>,
    /// Fly the reverse of route `[origin, destination]` through the same sectors.
    #[serde(default)]
    pub mirror: Option<(usize, usize)>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct NetworkSpec {
    pub params: ParamsSpec,
    pub vertiports: Vec<VertiportSpec>,
    pub routes: Vec<RouteSpec>,
}

impl NetworkSpec {
    pub fn from_toml(text: &str) -> Result<Self, NetworkError> {
        toml::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))
    }

    pub fn set_pads(&mut self, pads: usize) {
        for v in &mut self.vertiports {
            v.pads = pads;
        }
    }
}

fn whole_steps(minutes: f64, step: f64) -> Option<usize> {
    let k = minutes / step;
    ((k - k.round()).abs() < 1e-9 && k >= -1e-9).then(|| k.round() as usize)
}

pub fn build_network(spec: &NetworkSpec) -> Result<Network, NetworkError> {
    let ps = &spec.params;
    if !(ps.step_minutes > 0.0) {
        return Err(NetworkError::BadParams("step_minutes must be positive".into()));
    }
    let tau_steps = whole_steps(ps.tau_minutes, ps.step_minutes)
        .filter(|&k| k >= 1)
        .ok_or(NetworkError::NonIntegerKTau { tau: ps.tau_minutes, step: ps.step_minutes })?;
    let recharge_steps = whole_steps(ps.recharge_minutes, ps.step_minutes)
        .ok_or_else(|| NetworkError::BadParams("recharge time is not a whole number of steps".into()))?;
    if !(ps.e_min < ps.e_max) || ps.e_min < 0.0 {
        return Err(NetworkError::BadParams("need 0 <= e_min < e_max".into()));
    }

    let mut ids: Vec<usize> = spec.vertiports.iter().map(|v| v.id).collect();
    ids.sort_unstable();
    if ids.is_empty() || ids.iter().enumerate().any(|(k, &id)| id != k + 1) {
        return Err(NetworkError::BadVertiport("ids must be unique and contiguous from 1".into()));
    }
    let mut vertiports: Vec<Vertiport> =
        spec.vertiports.iter().map(|v| Vertiport { id: v.id, num_vertipads: v.pads }).collect();
    vertiports.sort_by_key(|v| v.id);
    if let Some(v) = vertiports.iter().find(|v| v.num_vertipads == 0) {
        return Err(NetworkError::BadVertiport(format!("vertiport {} has no vertipads", v.id)));
    }
    let nv = vertiports.len();

    let mut seen = HashSet::new();
    let mut by_od: HashMap<(usize, usize), usize> = HashMap::new();
    for (p, r) in spec.routes.iter().enumerate() {
        for v in [r.origin, r.destination] {
            if v == 0 || v > nv {
                return Err(NetworkError::BadRoute(format!("unknown vertiport {v}")));
            }
        }
        if r.origin == r.destination {
            return Err(NetworkError::BadRoute(format!("route {} starts and ends at the same vertiport", r.origin)));
        }
        if !seen.insert((r.origin, r.destination)) {
            return Err(NetworkError::DuplicateRoute(r.origin, r.destination));
        }
        if !(r.energy > 0.0) {
            return Err(NetworkError::BadRoute(format!("route ({},{}) needs positive energy", r.origin, r.destination)));
        }
        by_od.insert((r.origin, r.destination), p);
    }

    // resolve sector counts and named classes, following mirrors
    let mut class_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut intern = |name: String, names: &mut Vec<String>| -> usize {
        *class_ids.entry(name.clone()).or_insert_with(|| {
            names.push(name);
            names.len() - 1
        })
    };
    let mut od_pairs = Vec::with_capacity(spec.routes.len());
    for (p, r) in spec.routes.iter().enumerate() {
        let bad = |msg: String| NetworkError::BadOverlapClass(r.origin, r.destination, msg);
        let (count, named): (usize, Vec<(usize, String)>) = match r.mirror {
            None => (r.sectors, r.shared.clone()),
            Some(m) => {
                let &q = by_od.get(&m).ok_or_else(|| bad(format!("mirrored route {m:?} does not exist")))?;
                let base = &spec.routes[q];
                if base.mirror.is_some() {
                    return Err(bad("mirror of a mirror".into()));
                }
                if base.sectors < 2 {
                    return Err(bad("mirrored route is too short".into()));
                }
                let last = base.sectors - 1;
                let mut named: Vec<(usize, String)> = (1..last)
                    .map(|j| {
                        let own = base.shared.iter().find(|(i, _)| *i == j).map(|(_, n)| n.clone());
                        (last - j, own.unwrap_or_else(|| format!("({},{})#{}", base.origin, base.destination, j)))
                    })
                    .collect();
                named.extend(r.shared.iter().cloned());
                (base.sectors, named)
            }
        };
        if count < 2 {
            return Err(NetworkError::BadRoute(format!("route ({},{}) needs at least 2 sectors", r.origin, r.destination)));
        }
        let last = count - 1;
        let mut by_index: BTreeMap<usize, String> = BTreeMap::new();
        let mut names_here = HashSet::new();
        for (j, name) in named {
            if j == 0 || j >= last {
                return Err(bad(format!("index {j} is not an interior sector")));
            }
            if !names_here.insert(name.clone()) {
                return Err(bad(format!("class {name:?} appears twice")));
            }
            if by_index.insert(j, name).is_some() {
                return Err(bad(format!("sector {j} named twice")));
            }
        }
        let mut sectors = Vec::with_capacity(count);
        for j in 0..count {
            let name = match by_index.get(&j) {
                Some(n) => n.clone(),
                None => format!("({},{})#{}", r.origin, r.destination, j),
            };
            sectors.push(SectorRef { route_id: p, index_in_route: j, overlap_class: intern(name, &mut class_names) });
        }
        od_pairs.push(OdPair {
            id: p,
            origin: r.origin,
            destination: r.destination,
            sectors,
            flight_time_steps: last,
            rebalance_time_steps: 0,
            energy_per_flight: r.energy,
        });
    }
    // a class must not repeat within a route, even when it arrives by a mirror
    for od in &od_pairs {
        let mut s = HashSet::new();
        if !od.sectors.iter().all(|x| s.insert(x.overlap_class)) {
            return Err(NetworkError::BadOverlapClass(od.origin, od.destination, "class repeats".into()));
        }
    }

    let params = NetworkParams { tau_steps, recharge_steps, e_min: ps.e_min, e_max: ps.e_max, step_minutes: ps.step_minutes };
    let mut net = Network { vertiports, od_pairs, params, class_names, paths: HashMap::new() };

    for v in 1..=nv {
        let out = net.reachable(v, false);
        let inn = net.reachable(v, true);
        if out.len() < nv || inn.len() < nv {
            return Err(NetworkError::NotStronglyConnected(v));
        }
    }
    for a in 1..=nv {
        for b in 1..=nv {
            if a != b {
                let path = net.shortest(a, b).ok_or(NetworkError::NoPath(a, b))?;
                net.paths.insert((a, b), path);
            }
        }
    }
    for p in 0..net.od_pairs.len() {
        let od = &net.od_pairs[p];
        let t = net.path_time(&net.paths[&(od.destination, od.origin)]);
        net.od_pairs[p].rebalance_time_steps = t;
    }
    Ok(net)
}

impl Network {
    pub fn num_pairs(&self) -> usize {
        self.od_pairs.len()
    }

    pub fn num_vertiports(&self) -> usize {
        self.vertiports.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn pads(&self, v: usize) -> usize {
        self.vertiports[v - 1].num_vertipads
    }

    pub fn pair(&self, origin: usize, destination: usize) -> Option<usize> {
        self.od_pairs.iter().position(|p| p.origin == origin && p.destination == destination)
    }

    pub fn opposite(&self, p: usize) -> Option<usize> {
        let od = &self.od_pairs[p];
        self.pair(od.destination, od.origin)
    }

    pub fn max_flight_steps(&self) -> usize {
        self.od_pairs.iter().map(|p| p.flight_time_steps).max().unwrap_or(0)
    }

    pub fn total_sectors(&self) -> usize {
        self.od_pairs.iter().map(|p| p.sectors.len()).sum()
    }

    /// Flight time plus one turnaround per intermediate stop.
    pub fn path_time(&self, path: &[usize]) -> usize {
        let flight: usize = path.iter().map(|&p| self.od_pairs[p].flight_time_steps).sum();
        flight + self.params.tau_steps * path.len().saturating_sub(1)
    }

    /// Minimum-flight-time route sequence from `from` to `to`.
    pub fn rebalance_path(&self, from: usize, to: usize) -> Result<Vec<usize>, NetworkError> {
        if from == to {
            return Err(NetworkError::NoPath(from, to));
        }
        self.paths.get(&(from, to)).cloned().ok_or(NetworkError::NoPath(from, to))
    }

    pub fn rebalance_time(&self, from: usize, to: usize) -> usize {
        if from == to {
            return 0;
        }
        self.paths.get(&(from, to)).map_or(usize::MAX, |p| self.path_time(p))
    }

    fn reachable(&self, v: usize, reverse: bool) -> HashSet<usize> {
        let mut seen = HashSet::from([v]);
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for od in &self.od_pairs {
                let (a, b) = if reverse { (od.destination, od.origin) } else { (od.origin, od.destination) };
                if a == u && seen.insert(b) {
                    stack.push(b);
                }
            }
        }
        seen
    }

    // Dijkstra on flight time, ties by fewer hops, then lexicographic pair ids
    fn shortest(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let mut best: HashMap<usize, (usize, usize, Vec<usize>)> = HashMap::new();
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0usize, 0usize, Vec::<usize>::new(), from)));
        while let Some(Reverse((d, h, path, u))) = heap.pop() {
            if let Some((bd, bh, bp)) = best.get(&u) {
                if (*bd, *bh, bp) <= (d, h, &path) {
                    continue;
                }
            }
            best.insert(u, (d, h, path.clone()));
            if u == to {
                continue;
            }
            for od in &self.od_pairs {
                if od.origin == u {
                    let mut np = path.clone();
                    np.push(od.id);
                    heap.push(Reverse((d + od.flight_time_steps, h + 1, np, od.destination)));
                }
            }
        }
        best.remove(&to).map(|(_, _, p)| p)
    }
}

pub const PRESETS: [&str; 3] = ["la4", "example3", "la12-reduced"];

pub fn preset_spec(name: &str) -> Result<NetworkSpec, NetworkError> {
    let text = match name {
        "la4" => include_str!("../presets/la4.toml"),
        "example3" => include_str!("../presets/example3.toml"),
        "la12-reduced" => include_str!("../presets/la12-reduced.toml"),
        other => return Err(NetworkError::UnknownPreset(other.to_string())),
    };
    NetworkSpec::from_toml(text)
}

pub fn preset(name: &str) -> Result<Network, NetworkError> {
    build_network(&preset_spec(name)?)
}
