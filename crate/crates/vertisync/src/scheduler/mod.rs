//! Scheduling engines: exact cycles through the integer program, the
//! service-vector construction, and the FCFS baseline, plus a validator.

pub mod constructive;
pub mod fcfs;
mod reserve;
pub mod schedule;
pub mod validate;

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

pub use constructive::{apportion, constructive_cycle, constructive_schedule, cycle_length_bound, ConstructiveOutcome};
pub use fcfs::{fcfs_schedule, FcfsScheduler};
pub use reserve::ReservationTable;
pub use schedule::{Event, EventKind, Flight, FleetSnapshot, Location, Schedule, VehicleState};
pub use validate::{validate_schedule, Violation, ViolationKind};

use crate::network::Network;
use crate::servicevec::{ServiceError, ServiceVector};
use crate::solver::{IlpOptions, SolverError, Status};
use crate::tfmp::{horizon_bound, solve_cycle, TfmpError};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ScheduleError {
    #[error("fleet of {0} is below the required {1}")]
    FleetTooSmall(usize, usize),
    #[error("no service vector covers pair {0}")]
    UncoveredDemand(usize),
    #[error("no feasible schedule within a horizon of {0} steps")]
    InfeasibleCycle(usize),
    #[error("service vector has no conflict-free takeoff pattern")]
    NoPattern,
    #[error("construction made no progress")]
    Stalled,
    #[error("solver stopped early: {0:?}")]
    SolverStopped(Status),
    #[error(transparent)]
    Service(ServiceError),
    #[error(transparent)]
    Solver(SolverError),
    #[error(transparent)]
    Tfmp(TfmpError),
}

impl From<SolverError> for ScheduleError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::UncoveredDemand(p) => Self::UncoveredDemand(p),
            e => Self::Solver(e),
        }
    }
}

impl From<ServiceError> for ScheduleError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::FleetTooSmall(a, b) => Self::FleetTooSmall(a, b),
            e => Self::Service(e),
        }
    }
}

impl From<TfmpError> for ScheduleError {
    fn from(e: TfmpError) -> Self {
        match e {
            TfmpError::Solver(s) => s.into(),
            e => Self::Tfmp(e),
        }
    }
}

/// Outstanding requests and vehicles at a cycle boundary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicyState {
    /// Arrival step of each queued request, oldest first.
    pub queues: Vec<VecDeque<usize>>,
    pub fleet: FleetSnapshot,
    pub clock: usize,
}

impl PolicyState {
    pub fn new(net: &Network, fleet: FleetSnapshot) -> Self {
        Self { queues: vec![VecDeque::new(); net.num_pairs()], clock: fleet.time, fleet }
    }

    pub fn queue_lengths(&self) -> Vec<usize> {
        self.queues.iter().map(VecDeque::len).collect()
    }
}

#[derive(Clone, Debug)]
pub struct VertiSyncConfig {
    pub vectors: Vec<ServiceVector>,
    pub capacity: usize,
    pub exact: bool,
    /// Replaces the conservative horizon of the exact engine.
    pub horizon: Option<usize>,
    pub ilp: IlpOptions,
    pub preprocess: bool,
}

impl VertiSyncConfig {
    pub fn constructive(vectors: Vec<ServiceVector>) -> Self {
        Self { vectors, capacity: 1, exact: false, horizon: None, ilp: IlpOptions::default(), preprocess: true }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CycleReport {
    pub schedule: Schedule,
    /// Total flight steps of the cycle's flights.
    pub objective: f64,
    pub gap: f64,
    pub nodes: usize,
    pub horizon: usize,
    /// Length bound of the construction, when it was used.
    pub bound: Option<f64>,
}

/// Doublings of the derived horizon tried before a cycle is declared infeasible.
pub const HORIZON_RETRIES: usize = 2;

/// Plan one cycle serving exactly the requests queued at its start.
pub fn vertisync_cycle(net: &Network, state: &PolicyState, cfg: &VertiSyncConfig) -> Result<CycleReport, ScheduleError> {
    let q = state.queue_lengths();
    let snap = &state.fleet;
    if q.iter().all(|&x| x == 0) {
        return Ok(CycleReport {
            schedule: Schedule::empty(snap.time),
            objective: 0.0,
            gap: 0.0,
            nodes: 0,
            horizon: 0,
            bound: None,
        });
    }
    if cfg.exact {
        // the derived horizon ignores rebalancing ahead of service, so it may be doubled
        let (mut horizon, retries) = match cfg.horizon {
            Some(h) => (h, 0),
            None => (horizon_bound(net, &q), HORIZON_RETRIES),
        };
        for attempt in 0..=retries {
            let (sched, sol, obj) = solve_cycle(net, snap, &q, horizon, cfg.capacity, cfg.preprocess, &cfg.ilp)?;
            match (sched, sol.status) {
                (Some(schedule), _) => {
                    return Ok(CycleReport { schedule, objective: obj, gap: sol.gap(), nodes: sol.nodes, horizon, bound: None })
                }
                (None, Status::Infeasible) if attempt < retries => horizon *= 2,
                (None, Status::Infeasible) => return Err(ScheduleError::InfeasibleCycle(horizon)),
                (None, s) => return Err(ScheduleError::SolverStopped(s)),
            }
        }
        unreachable!("the last attempt returns");
    }
    let out = constructive_cycle(&q, &cfg.vectors, snap, net, cfg.capacity)?;
    let objective = out.schedule.total_flight_steps(net) as f64;
    Ok(CycleReport { schedule: out.schedule, objective, gap: f64::NAN, nodes: 0, horizon: 0, bound: Some(out.bound) })
}
