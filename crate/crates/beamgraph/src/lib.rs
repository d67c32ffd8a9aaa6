//! Beam management for mmwave vehicular networks.
//!
//! Joint beam design (number, width and direction of beams per base
//! station) and zone association are cast as weighted bipartite matching
//! with conflicts: beam candidates on the left, occupied zones on the
//! right, coverage edges weighted by noise-limited rate, and conflict edges
//! between overlapping same-gNB candidates. A sorted-greedy heuristic
//! solves each epoch; an exhaustive oracle validates it on small instances.
//! A discrete-time simulator with proportional-fair scheduling compares the
//! matcher against a DBSCAN clustering baseline.
//!
//! Modules follow the pipeline:
//!
//! - [`scenario`]: world description, traces, zone grid, configuration
//! - [`geometry`]: angles, coverage and conflict predicates
//! - [`channel`]: path loss, antenna gains, SINR, CQI rates
//! - [`graphbuild`]: conflict-graph construction per snapshot
//! - [`matching`]: greedy solver, exact oracle, feasibility certifier
//! - [`baseline`]: DBSCAN benchmark beam designer
//! - [`simulator`]: epoch loop, power allocation, PF scheduling, metrics

pub mod baseline;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod graphbuild;
pub mod matching;
pub mod scenario;
pub mod simulator;

pub use error::{Error, Result};
