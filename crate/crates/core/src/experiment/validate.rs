//! Bundled oracle checks: one simulated trace certified against every closed
//! form.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::measure::{
    aoi_time_average, aud_estimate, busy_on_arrival_estimate, cross_moment_estimate,
    interdepartures, occupancy_estimates, paired_difference_ci, thinned_system_times, SteadyWindow,
};
use super::sweep::{point_seed, thread_pool};
use crate::analytic::{
    avg_aud, avg_aud_via_renewal, bisection_rho_star, cross_moment_ty, golden_section_rho_star,
    mean_interdeparture, mgf_interdeparture, mixture_mgf_interdeparture, prob_busy_on_arrival,
    second_moment_interdeparture, stationary_queue_dist, system_time_rate,
};
use crate::decision::DecisionProcess;
use crate::dist::SeededStream;
use crate::error::Result;
use crate::queue::{simulate_mm1, system_time_stride, QueueRates, SimOptions};
use crate::stats::ks_exponential;

/// Below this many updates checks are marked low-power and every
/// statistical tolerance widens by `sqrt(LOW_POWER_UPDATES / n)`.
pub const LOW_POWER_UPDATES: usize = 100_000;
/// Largest queue length whose stationary probability is checked.
pub const QUEUE_LENGTH_CHECKS: usize = 10;
/// Stream for the random probe points of the algebraic checks.
const PROBE_STREAM: u64 = 7;

pub const VALIDATION_CSV_HEADER: &str = "check,value,expected,tolerance,outcome,low_power";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    /// Not enough data to run the check.
    Skip,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Skip => "skip",
        })
    }
}

/// One check: passes when `|value - expected| <= tolerance`, except K-S
/// checks where `value` is the p-value and must be at least `expected`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub outcome: Outcome,
    pub low_power: bool,
}

impl Check {
    fn within(name: impl Into<String>, value: f64, expected: f64, tolerance: f64, low_power: bool) -> Self {
        let ok = (value - expected).abs() <= tolerance;
        Check {
            name: name.into(),
            value,
            expected,
            tolerance,
            outcome: if ok { Outcome::Pass } else { Outcome::Fail },
            low_power,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64, low_power: bool) -> Self {
        Check {
            name: name.into(),
            value,
            expected: threshold,
            tolerance: 0.0,
            outcome: if value >= threshold { Outcome::Pass } else { Outcome::Fail },
            low_power,
        }
    }

    fn skipped(name: impl Into<String>, expected: f64, low_power: bool) -> Self {
        Check {
            name: name.into(),
            value: f64::NAN,
            expected,
            tolerance: 0.0,
            outcome: Outcome::Skip,
            low_power,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub lambda: f64,
    pub mu: f64,
    pub n_updates: usize,
    pub low_power: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.outcome != Outcome::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.outcome == Outcome::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{VALIDATION_CSV_HEADER}")?;
        for c in &self.checks {
            let value = if c.value.is_nan() { String::new() } else { c.value.to_string() };
            writeln!(
                out,
                "{},{},{},{},{},{}",
                c.name, value, c.expected, c.tolerance, c.outcome, c.low_power
            )?;
        }
        Ok(())
    }

    /// One line per check plus a verdict.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "validation at lambda={} mu={} with {} updates{}\n",
            self.lambda,
            self.mu,
            self.n_updates,
            if self.low_power { " (low power)" } else { "" }
        );
        for c in &self.checks {
            s.push_str(&format!(
                "  [{}] {:<32} value={:.6} expected={:.6} tol={:.3e}\n",
                c.outcome, c.name, c.value, c.expected, c.tolerance
            ));
        }
        let fails = self.failures().count();
        s.push_str(&if fails == 0 {
            "all checks passed\n".to_string()
        } else {
            format!("{fails} check(s) failed\n")
        });
        s
    }
}

fn widening(n: usize) -> f64 {
    if n < LOW_POWER_UPDATES {
        (LOW_POWER_UPDATES as f64 / n as f64).sqrt()
    } else {
        1.0
    }
}

/// Runs every oracle check at the first `(lambda, mu)` of `cfg`.
pub fn run_validation(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let rates = QueueRates::new(cfg.lambda.first(), cfg.mu.first())?;
    rates.ensure_stable()?;
    let n = cfg.n_updates;
    let low = n < LOW_POWER_UPDATES;
    let widen = widening(n);
    let seed = point_seed(cfg.seed, 0);
    let trace = simulate_mm1(rates, n, seed, SimOptions::default())?;
    let warmup = cfg.warmup_for(n);
    let window = SteadyWindow::new(&trace, warmup)?;
    let analytic = avg_aud(rates)?;
    let mut checks = Vec::new();

    // Average AuD at every decision rate, on the shared trace.
    let pool = thread_pool()?;
    let estimates = pool.install(|| {
        cfg.nu_list
            .par_iter()
            .map(|&nu| {
                let process = if cfg.periodic_decisions {
                    DecisionProcess::Periodic { rate: nu }
                } else {
                    DecisionProcess::Poisson { rate: nu }
                };
                aud_estimate(&trace, &window, process, seed, cfg.batches, cfg.confidence)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let tol_aud = 0.01 * widen * analytic;
    for est in &estimates {
        let name = format!("aud_mean[nu={}]", est.nu);
        checks.push(match est.batches.mean {
            Some(m) => Check::within(name, m, analytic, tol_aud, low),
            None => Check::skipped(name, analytic, low),
        });
    }
    for a in 0..estimates.len() {
        for b in a + 1..estimates.len() {
            let name = format!("nu_overlap[{}|{}]", estimates[a].nu, estimates[b].nu);
            checks.push(match (estimates[a].ci, estimates[b].ci) {
                (Some(ca), Some(cb)) => Check::within(
                    name,
                    (ca.mean - cb.mean).abs(),
                    0.0,
                    (ca.half_width + cb.half_width) * widen,
                    low,
                ),
                _ => Check::skipped(name, 0.0, low),
            });
        }
    }

    // Exponential system and inter-departure times.
    let t_samples = thinned_system_times(&trace, warmup, system_time_stride(rates.rho()));
    let t_rate = system_time_rate(rates)? * cfg.oracle_rate_factor;
    checks.push(match ks_exponential(&t_samples, t_rate) {
        Ok(ks) => Check::at_least("ks_system_time", ks.p_value, 0.01, low),
        Err(_) => Check::skipped("ks_system_time", 0.01, low),
    });
    let y_samples = interdepartures(&trace, warmup);
    checks.push(match ks_exponential(&y_samples, rates.lambda) {
        Ok(ks) => Check::at_least("ks_interdeparture", ks.p_value, 0.01, low),
        Err(_) => Check::skipped("ks_interdeparture", 0.01, low),
    });
    if y_samples.len() >= 2 {
        let ey = mean_interdeparture(rates)?;
        let ey2 = second_moment_interdeparture(rates)?;
        let m1 = y_samples.iter().sum::<f64>() / y_samples.len() as f64;
        let m2 = y_samples.iter().map(|y| y * y).sum::<f64>() / y_samples.len() as f64;
        checks.push(Check::within("mean_interdeparture", m1, ey, 0.01 * widen * ey, low));
        checks.push(Check::within(
            "second_moment_interdeparture",
            m2,
            ey2,
            0.02 * widen * ey2,
            low,
        ));
    }

    // Time-weighted queue-length distribution.
    let pi = stationary_queue_dist(rates, QUEUE_LENGTH_CHECKS)?;
    match occupancy_estimates(&trace, &window, QUEUE_LENGTH_CHECKS, cfg.batches, cfg.confidence) {
        Ok(occ) => {
            for (i, (est, p)) in occ.iter().zip(&pi).enumerate() {
                checks.push(Check::within(format!("queue_length_pi[{i}]"), est.mean, *p, est.half_width * widen, low));
            }
        }
        Err(_) => {
            for (i, p) in pi.iter().enumerate() {
                checks.push(Check::skipped(format!("queue_length_pi[{i}]"), *p, low));
            }
        }
    }

    // Busy-on-arrival probability within three standard errors.
    let rho = prob_busy_on_arrival(rates)?;
    checks.push(match busy_on_arrival_estimate(&trace, warmup, cfg.batches, cfg.confidence) {
        Ok(est) => Check::within("prob_busy_on_arrival", est.mean, rho, 3.0 * est.std_error() * widen, low),
        Err(_) => Check::skipped("prob_busy_on_arrival", rho, low),
    });

    // Probe points for the algebraic identities.
    let mut probe = SeededStream::new(cfg.seed, PROBE_STREAM);
    let s_bound = rates.lambda.min(rates.mu);
    let mut worst_mgf = 0.0f64;
    for _ in 0..10 {
        let s = s_bound * (3.0 * probe.open_unit() - 2.0);
        let mix = mixture_mgf_interdeparture(rates, s)?;
        let direct = mgf_interdeparture(rates, s)?;
        worst_mgf = worst_mgf.max((mix / direct - 1.0).abs());
    }
    checks.push(Check::within("mgf_mixture_identity", worst_mgf, 0.0, 1e-10, false));

    let ety = cross_moment_ty(rates)?;
    checks.push(match cross_moment_estimate(&trace, warmup, cfg.batches, cfg.confidence) {
        Ok(est) => Check::within("cross_moment_ty", est.mean, ety, 0.02 * widen * ety, low),
        Err(_) => Check::skipped("cross_moment_ty", ety, low),
    });

    let mut worst_dual = (avg_aud_via_renewal(rates)? / analytic - 1.0).abs();
    for _ in 0..100 {
        let mu = 0.1 + 10.0 * probe.open_unit();
        let rho = 0.01 + 0.98 * probe.open_unit();
        let r = QueueRates::new(rho * mu, mu)?;
        worst_dual = worst_dual.max((avg_aud_via_renewal(r)? / avg_aud(r)? - 1.0).abs());
    }
    checks.push(Check::within("dual_path_aud", worst_dual, 0.0, 1e-12, false));

    // Poisson decisions see the time average of the AoI sawtooth.
    let pasta_idx = estimates.iter().position(|e| e.nu == 1.0).unwrap_or(0);
    let pasta = &estimates[pasta_idx];
    let name = format!("pasta_aoi_vs_aud[nu={}]", pasta.nu);
    let aoi = aoi_time_average(&trace, &window, cfg.batches, cfg.confidence);
    checks.push(match (aoi, pasta.batches.mean) {
        (Ok((aoi_ci, aoi_batches)), Some(aud_mean)) => {
            let aoi_opt: Vec<Option<f64>> = aoi_batches.into_iter().map(Some).collect();
            match paired_difference_ci(&pasta.batches.batches, &aoi_opt, cfg.confidence) {
                Ok(diff) => Check::within(name, aud_mean, aoi_ci.mean, diff.half_width * widen, low),
                Err(_) => Check::skipped(name, aoi_ci.mean, low),
            }
        }
        _ => Check::skipped(name, analytic, low),
    });

    let golden = golden_section_rho_star(1e-12);
    let bisect = bisection_rho_star(1e-12);
    checks.push(Check::within("rho_star_agreement", golden, bisect, 1e-9, false));
    checks.push(Check::within("rho_star_range", golden, 0.525, 0.075, false));

    Ok(ValidationReport {
        lambda: rates.lambda,
        mu: rates.mu,
        n_updates: n,
        low_power: low,
        checks,
    })
}
