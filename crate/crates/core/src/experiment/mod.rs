//! Experiment runner: sweeps over `(lambda, mu)`, the decision-rate
//! invariance run and the bundled validation checks.

pub mod config;
pub mod measure;
pub mod output;
pub mod sweep;
pub mod validate;

pub use config::{ExperimentConfig, Mode, RateGrid};
pub use sweep::{run_nu_invariance, run_sweep, NuInvarianceResult, RowStatus, SweepResult, SweepRow};
pub use validate::{run_validation, Check, Outcome, ValidationReport};
