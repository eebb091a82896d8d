//! Simulation and closed forms for the age of information seen at decision
//! epochs (age upon decisions, AuD) in a FCFS update-and-decide queue.
//!
//! Updates arrive at a single server, are served first come first served and
//! are delivered to a receiver that acts at random decision epochs. The
//! [`queue`] engine produces per-update traces, [`decision`] samples them at
//! decision epochs, [`analytic`] holds the M/M/1 closed forms, [`stats`]
//! certifies simulation output against them and [`experiment`] drives sweeps
//! and validation runs.

pub mod analytic;
pub mod decision;
pub mod dist;
pub mod error;
pub mod experiment;
pub mod queue;
pub mod stats;

pub use error::{AudError, Result};
