//! Parameter sweeps and the decision-rate invariance experiment.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::measure::{aud_estimate, interdepartures, paired_difference_ci, thinned_system_times, AudEstimate, SteadyWindow};
use crate::analytic::{avg_aud, system_time_rate};
use crate::decision::DecisionProcess;
use crate::dist::splitmix64;
use crate::error::{AudError, Result};
use crate::queue::{simulate_mm1, system_time_stride, QueueRates, SimOptions};
use crate::stats::{ks_exponential, EstimateWithCI};

pub const SWEEP_CSV_HEADER: &str = "lambda,mu,nu,analytic_aud,empirical_aud,ci_half_width,n_decisions,n_undefined_decisions,ks_T_pvalue,ks_Y_pvalue,status";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    /// `rho >= 1`; no analytic value and no simulation.
    Unstable,
    /// `rho >= 1` simulated under the override; no analytic value.
    UnstableSimulated,
    /// Simulated, but no defined decision fell in the steady-state window.
    InsufficientData,
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Unstable => "unstable",
            RowStatus::UnstableSimulated => "unstable-simulated",
            RowStatus::InsufficientData => "insufficient-data",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    pub analytic_aud: Option<f64>,
    pub empirical_aud: Option<f64>,
    pub ci_half_width: Option<f64>,
    pub n_decisions: Option<usize>,
    pub n_undefined_decisions: Option<usize>,
    pub ks_t_pvalue: Option<f64>,
    pub ks_y_pvalue: Option<f64>,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SWEEP_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.lambda,
                r.mu,
                r.nu,
                opt(r.analytic_aud),
                opt(r.empirical_aud),
                opt(r.ci_half_width),
                opt(r.n_decisions),
                opt(r.n_undefined_decisions),
                opt(r.ks_t_pvalue),
                opt(r.ks_y_pvalue),
                r.status.as_str()
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Seed of grid point `index`: `seed ^ splitmix64(index)`.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ splitmix64(index as u64)
}

/// Thread pool sized by `AUD_LAB_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("AUD_LAB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| AudError::Config(format!("AUD_LAB_THREADS='{v}' is not a count")))?;
        if n > 0 {
            builder = builder.num_threads(n);
        }
    }
    builder
        .build()
        .map_err(|e| AudError::Config(format!("thread pool: {e}")))
}

/// Everything measured at one grid point.
#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub rows: Vec<SweepRow>,
    /// Per-ν estimates, aligned with `rows`; `None` when not simulated.
    pub estimates: Vec<Option<AudEstimate>>,
}

fn decision_process(cfg: &ExperimentConfig, nu: f64) -> DecisionProcess {
    if cfg.periodic_decisions {
        DecisionProcess::Periodic { rate: nu }
    } else {
        DecisionProcess::Poisson { rate: nu }
    }
}

/// Simulates one grid point (when enabled) and evaluates every ν on the
/// same trace.
pub fn evaluate_point(cfg: &ExperimentConfig, index: usize, lambda: f64, mu: f64) -> Result<PointOutcome> {
    let rates = QueueRates::new(lambda, mu)?;
    let stable = rates.is_stable();
    let analytic_aud = avg_aud(rates).ok();
    let blank = |nu: f64, status: RowStatus| SweepRow {
        lambda,
        mu,
        nu,
        analytic_aud,
        empirical_aud: None,
        ci_half_width: None,
        n_decisions: None,
        n_undefined_decisions: None,
        ks_t_pvalue: None,
        ks_y_pvalue: None,
        status,
    };

    if !cfg.simulate || (!stable && !cfg.allow_unstable) {
        let status = if stable { RowStatus::Ok } else { RowStatus::Unstable };
        return Ok(PointOutcome {
            rows: cfg.nu_list.iter().map(|&nu| blank(nu, status)).collect(),
            estimates: vec![None; cfg.nu_list.len()],
        });
    }

    let seed = point_seed(cfg.seed, index);
    let opts = SimOptions {
        allow_unstable: cfg.allow_unstable,
    };
    let trace = simulate_mm1(rates, cfg.n_updates, seed, opts)?;
    let warmup = cfg.warmup_for(trace.len());
    let window = SteadyWindow::new(&trace, warmup)?;

    let (ks_t_pvalue, ks_y_pvalue) = if stable {
        let t = thinned_system_times(&trace, warmup, system_time_stride(rates.rho()));
        let ks_t = ks_exponential(&t, system_time_rate(rates)?).ok().map(|r| r.p_value);
        let ks_y = ks_exponential(&interdepartures(&trace, warmup), lambda)
            .ok()
            .map(|r| r.p_value);
        (ks_t, ks_y)
    } else {
        (None, None)
    };

    let estimates: Vec<AudEstimate> = cfg
        .nu_list
        .par_iter()
        .map(|&nu| {
            aud_estimate(
                &trace,
                &window,
                decision_process(cfg, nu),
                seed,
                cfg.batches,
                cfg.confidence,
            )
        })
        .collect::<Result<_>>()?;

    let rows = estimates
        .iter()
        .map(|est| {
            let status = match (stable, est.batches.mean) {
                (false, _) => RowStatus::UnstableSimulated,
                (true, None) => RowStatus::InsufficientData,
                (true, Some(_)) => RowStatus::Ok,
            };
            SweepRow {
                empirical_aud: est.batches.mean,
                ci_half_width: est.ci.map(|c| c.half_width),
                n_decisions: Some(est.batches.n_total),
                n_undefined_decisions: Some(est.batches.n_undefined),
                ks_t_pvalue,
                ks_y_pvalue,
                ..blank(est.nu, status)
            }
        })
        .collect();

    Ok(PointOutcome {
        rows,
        estimates: estimates.into_iter().map(Some).collect(),
    })
}

/// One row per `(lambda, mu, nu)` in grid order; deterministic given the seed.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let grid = cfg.grid();
    let pool = thread_pool()?;
    let outcomes: Vec<PointOutcome> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, &(lambda, mu))| evaluate_point(cfg, i, lambda, mu))
            .collect::<Result<_>>()
    })?;
    Ok(SweepResult {
        rows: outcomes.into_iter().flat_map(|o| o.rows).collect(),
    })
}

/// Comparison of the AuD means of two decision rates on a shared trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairComparison {
    pub nu_a: f64,
    pub nu_b: f64,
    pub difference: f64,
    /// `|difference| <= half_width_a + half_width_b`.
    pub intervals_overlap: bool,
    /// Interval of the window-paired difference.
    pub paired_half_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuInvarianceSummary {
    pub lambda: f64,
    pub mu: f64,
    pub analytic_aud: Option<f64>,
    pub max_pairwise_difference: f64,
    /// Largest `|empirical / analytic - 1|` over the decision rates.
    pub max_relative_error: Option<f64>,
    pub all_overlap: bool,
    pub pairs: Vec<PairComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuInvarianceResult {
    pub sweep: SweepResult,
    pub summary: NuInvarianceSummary,
}

/// Evaluates every ν in `cfg.nu_list` on one shared trace at the first
/// `(lambda, mu)` of the config.
///
/// Decision streams are keyed by the ν value, so repeated entries reproduce
/// identical rows.
pub fn run_nu_invariance(cfg: &ExperimentConfig) -> Result<NuInvarianceResult> {
    cfg.validate()?;
    if cfg.nu_list.len() < 2 {
        return Err(AudError::Config("nu-invariance needs at least two decision rates".into()));
    }
    let (lambda, mu) = (cfg.lambda.first(), cfg.mu.first());
    let pool = thread_pool()?;
    let outcome = pool.install(|| evaluate_point(cfg, 0, lambda, mu))?;

    let cis: Vec<Option<EstimateWithCI>> = outcome
        .estimates
        .iter()
        .map(|e| e.as_ref().and_then(|e| e.ci))
        .collect();
    let mut pairs = Vec::new();
    for a in 0..cis.len() {
        for b in a + 1..cis.len() {
            let (Some(ca), Some(cb)) = (cis[a], cis[b]) else {
                continue;
            };
            let paired = match (&outcome.estimates[a], &outcome.estimates[b]) {
                (Some(ea), Some(eb)) => {
                    paired_difference_ci(&ea.batches.batches, &eb.batches.batches, cfg.confidence).ok()
                }
                _ => None,
            };
            pairs.push(PairComparison {
                nu_a: cfg.nu_list[a],
                nu_b: cfg.nu_list[b],
                difference: ca.mean - cb.mean,
                intervals_overlap: ca.overlaps(&cb),
                paired_half_width: paired.map(|p| p.half_width),
            });
        }
    }
    let analytic_aud = outcome.rows[0].analytic_aud;
    let max_relative_error = analytic_aud.and_then(|a| {
        outcome
            .rows
            .iter()
            .map(|r| r.empirical_aud.map(|e| (e / a - 1.0).abs()))
            .collect::<Option<Vec<_>>>()
            .map(|v| v.into_iter().fold(0.0, f64::max))
    });
    let summary = NuInvarianceSummary {
        lambda,
        mu,
        analytic_aud,
        max_pairwise_difference: pairs.iter().map(|p| p.difference.abs()).fold(0.0, f64::max),
        max_relative_error,
        all_overlap: !pairs.is_empty() && pairs.iter().all(|p| p.intervals_overlap),
        pairs,
    };
    Ok(NuInvarianceResult {
        sweep: SweepResult { rows: outcome.rows },
        summary,
    })
}
