//! VertiSync: conflict-free takeoff scheduling for on-demand urban air mobility.
//!
//! * [`network`] sector-discretized vertiport networks and presets
//! * [`servicevec`] service vectors and throughput regions
//! * [`solver`] simplex and branch-and-bound
//! * [`tfmp`] the time-expanded cycle program
//! * [`scheduler`] exact, constructive and FCFS engines plus a validator
//! * [`sim`] discrete-time stochastic simulation

pub mod solver;
pub mod network;
pub mod servicevec;
pub mod tfmp;
pub mod scheduler;
pub mod sim;
