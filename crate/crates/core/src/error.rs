use thiserror::Error;

pub type Result<T, E = AudError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AudError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unstable system: utilization rho = {rho} is not below 1")]
    Unstable { rho: f64 },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("generating function diverges at s = {s} (must be below {bound})")]
    Divergence { s: f64, bound: f64 },

    #[error("horizon {horizon} lies beyond the last departure {last_departure}")]
    Truncation { horizon: f64, last_departure: f64 },

    #[error("empty averaging window [{from}, {to}]")]
    EmptyWindow { from: f64, to: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
