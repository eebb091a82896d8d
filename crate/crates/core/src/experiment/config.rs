//! Experiment configuration: flat `key = value` text with `#` comments.
//!
//! Recognized keys: `mode`, `lambda`, `mu`, `nu`, `updates`, `seed`,
//! `confidence`, `out`, `allow_unstable`, `periodic_decisions`, `simulate`,
//! `batches`, `warmup`, `oracle_rate_factor`. Rates accept a single value,
//! a comma list, or an inclusive `start:stop:step` range.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{AudError, Result};
use crate::stats::{DEFAULT_BATCHES, DEFAULT_CONFIDENCE};

/// Steady-state modes expect at least this many updates; smaller runs are
/// carried out but flagged low-power.
pub const MIN_STEADY_UPDATES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SweepLambda,
    SweepMu,
    GridLambdaMu,
    NuInvariance,
    Validate,
}

impl FromStr for Mode {
    type Err = AudError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sweep_lambda" => Mode::SweepLambda,
            "sweep_mu" => Mode::SweepMu,
            "grid_lambda_mu" => Mode::GridLambdaMu,
            "nu_invariance" => Mode::NuInvariance,
            "validate" => Mode::Validate,
            other => return Err(AudError::Config(format!("unknown mode '{other}'"))),
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::SweepLambda => "sweep_lambda",
            Mode::SweepMu => "sweep_mu",
            Mode::GridLambdaMu => "grid_lambda_mu",
            Mode::NuInvariance => "nu_invariance",
            Mode::Validate => "validate",
        };
        f.write_str(s)
    }
}

/// An ordered, non-empty list of positive rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RateGrid(Vec<f64>);

impl RateGrid {
    pub fn single(rate: f64) -> Self {
        RateGrid(vec![rate])
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(AudError::Config("empty rate grid".into()));
        }
        if let Some(bad) = points.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(AudError::Config(format!("rate {bad} is not positive")));
        }
        Ok(RateGrid(points))
    }

    /// Inclusive range; points are `start + i * step` rounded to 12 decimals.
    pub fn range(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(stop >= start) {
            return Err(AudError::Config(format!("bad range {start}:{stop}:{step}")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        let points = (0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect();
        RateGrid::from_points(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }
}

impl FromStr for RateGrid {
    type Err = AudError;

    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| AudError::Config(format!("not a number: '{t}'")))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [start, stop, step] => RateGrid::range(num(start)?, num(stop)?, num(step)?),
            [list] => RateGrid::from_points(list.split(',').map(num).collect::<Result<_>>()?),
            _ => Err(AudError::Config(format!("bad rate grid '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// `None` lets the sweep infer its mode from the grid shapes.
    pub mode: Option<Mode>,
    pub lambda: RateGrid,
    pub mu: RateGrid,
    pub nu_list: Vec<f64>,
    pub n_updates: usize,
    pub seed: u64,
    pub confidence: f64,
    pub output_path: Option<PathBuf>,
    pub allow_unstable: bool,
    pub periodic_decisions: bool,
    /// Run simulations; `false` produces analytic-only sweeps.
    pub simulate: bool,
    pub batches: usize,
    /// Overrides the default warm-up length.
    pub warmup: Option<usize>,
    /// Multiplies the system-time oracle rate in validation. Anything but 1
    /// deliberately mis-specifies the oracle.
    pub oracle_rate_factor: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: None,
            lambda: RateGrid::single(0.5),
            mu: RateGrid::single(1.0),
            nu_list: vec![0.1, 1.0, 10.0],
            n_updates: 1_000_000,
            seed: 42,
            confidence: DEFAULT_CONFIDENCE,
            output_path: None,
            allow_unstable: false,
            periodic_decisions: false,
            simulate: true,
            batches: DEFAULT_BATCHES,
            warmup: None,
            oracle_rate_factor: 1.0,
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(AudError::Config(format!("{key}: expected true/false, got '{value}'"))),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| AudError::Config(format!("{key}: cannot parse '{value}'")))
}

impl ExperimentConfig {
    /// Parses config text on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                AudError::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mode" => self.mode = Some(value.parse()?),
            "lambda" => self.lambda = value.parse()?,
            "mu" => self.mu = value.parse()?,
            "nu" => self.nu_list = value.parse::<RateGrid>()?.0,
            "updates" => self.n_updates = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "confidence" => {
                let c: f64 = parse_num(key, value)?;
                if !(c > 0.0 && c < 1.0) {
                    return Err(AudError::Config(format!("confidence {c} outside (0, 1)")));
                }
                self.confidence = c;
            }
            "out" => self.output_path = Some(PathBuf::from(value)),
            "allow_unstable" => self.allow_unstable = parse_bool(key, value)?,
            "periodic_decisions" => self.periodic_decisions = parse_bool(key, value)?,
            "simulate" => self.simulate = parse_bool(key, value)?,
            "batches" => {
                let b: usize = parse_num(key, value)?;
                if b < 2 {
                    return Err(AudError::Config("batches must be at least 2".into()));
                }
                self.batches = b;
            }
            "warmup" => self.warmup = Some(parse_num(key, value)?),
            "oracle_rate_factor" => self.oracle_rate_factor = parse_num(key, value)?,
            other => return Err(AudError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Sweep mode implied by the grids when none was set.
    pub fn sweep_mode(&self) -> Mode {
        match self.mode {
            Some(m) => m,
            None => match (self.lambda.points().len() > 1, self.mu.points().len() > 1) {
                (true, true) => Mode::GridLambdaMu,
                (true, false) => Mode::SweepLambda,
                _ => Mode::SweepMu,
            },
        }
    }

    /// `(lambda, mu)` grid points in output order.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        match self.sweep_mode() {
            Mode::SweepMu => {
                for &mu in self.mu.points() {
                    for &lambda in self.lambda.points() {
                        out.push((lambda, mu));
                    }
                }
            }
            _ => {
                for &lambda in self.lambda.points() {
                    for &mu in self.mu.points() {
                        out.push((lambda, mu));
                    }
                }
            }
        }
        out
    }

    pub fn warmup_for(&self, n: usize) -> usize {
        self.warmup
            .unwrap_or_else(|| crate::queue::default_warmup(n))
            .min(n.saturating_sub(1))
    }

    pub fn low_power(&self) -> bool {
        self.n_updates < MIN_STEADY_UPDATES
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu_list.is_empty() {
            return Err(AudError::Config("nu list is empty".into()));
        }
        if self.n_updates == 0 {
            return Err(AudError::Config("updates must be at least 1".into()));
        }
        if !(self.oracle_rate_factor.is_finite() && self.oracle_rate_factor > 0.0) {
            return Err(AudError::Config("oracle_rate_factor must be positive".into()));
        }
        Ok(())
    }
}
