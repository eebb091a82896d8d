//! Closed forms for the FCFS M/M/1 update-and-decide system.
//!
//! None of these take the decision rate: the average age upon decisions of a
//! Poisson-sampled M/M/1 queue depends on the arrival and service rates only.

use crate::error::{AudError, Result};
use crate::queue::QueueRates;

/// `pi_i = (1 - rho) rho^i` for `i = 0..=max_i`.
pub fn stationary_queue_dist(rates: QueueRates, max_i: usize) -> Result<Vec<f64>> {
    rates.ensure_stable()?;
    let rho = rates.rho();
    Ok((0..=max_i).map(|i| (1.0 - rho) * rho.powi(i as i32)).collect())
}

/// Rate `mu (1 - rho) = mu - lambda` of the exponential system time.
pub fn system_time_rate(rates: QueueRates) -> Result<f64> {
    rates.ensure_stable()?;
    Ok(rates.mu * (1.0 - rates.rho()))
}

pub fn system_time_pdf(rates: QueueRates, x: f64) -> Result<f64> {
    let r = system_time_rate(rates)?;
    exponential_pdf(r, x)
}

pub fn mean_system_time(rates: QueueRates) -> Result<f64> {
    Ok(1.0 / system_time_rate(rates)?)
}

/// Departures of a stable M/M/1 queue form a Poisson process at `lambda`.
pub fn interdeparture_pdf(rates: QueueRates, x: f64) -> Result<f64> {
    rates.ensure_stable()?;
    exponential_pdf(rates.lambda, x)
}

pub fn mean_interdeparture(rates: QueueRates) -> Result<f64> {
    rates.ensure_stable()?;
    Ok(1.0 / rates.lambda)
}

pub fn second_moment_interdeparture(rates: QueueRates) -> Result<f64> {
    rates.ensure_stable()?;
    Ok(2.0 / (rates.lambda * rates.lambda))
}

fn exponential_pdf(rate: f64, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(AudError::Domain(format!("density evaluated at x = {x} < 0")));
    }
    Ok(rate * (-rate * x).exp())
}

/// Probability that an arriving update finds its predecessor still in the
/// system, `Pr{X_k < T_{k-1}}`, which equals `rho`.
pub fn prob_busy_on_arrival(rates: QueueRates) -> Result<f64> {
    rates.ensure_stable()?;
    Ok(rates.rho())
}

fn check_mgf_argument(s: f64, bound: f64) -> Result<()> {
    if s < bound {
        Ok(())
    } else {
        Err(AudError::Divergence { s, bound })
    }
}

/// `E[exp(s Y_k) | X_k > T_{k-1}] = lambda mu / ((lambda - s)(mu - s))`:
/// an idle gap followed by a full service.
pub fn conditional_mgf_y_given_idle(rates: QueueRates, s: f64) -> Result<f64> {
    rates.ensure_stable()?;
    check_mgf_argument(s, rates.lambda.min(rates.mu))?;
    Ok(rates.lambda * rates.mu / ((rates.lambda - s) * (rates.mu - s)))
}

/// `E[exp(s Y_k) | X_k < T_{k-1}] = mu / (mu - s)`: back-to-back service.
pub fn conditional_mgf_y_given_busy(rates: QueueRates, s: f64) -> Result<f64> {
    rates.ensure_stable()?;
    check_mgf_argument(s, rates.mu)?;
    Ok(rates.mu / (rates.mu - s))
}

/// Unconditional MGF of the inter-departure time, `lambda / (lambda - s)`.
pub fn mgf_interdeparture(rates: QueueRates, s: f64) -> Result<f64> {
    rates.ensure_stable()?;
    check_mgf_argument(s, rates.lambda)?;
    Ok(rates.lambda / (rates.lambda - s))
}

/// The busy/idle mixture `rho M_busy(s) + (1 - rho) M_idle(s)`.
pub fn mixture_mgf_interdeparture(rates: QueueRates, s: f64) -> Result<f64> {
    let rho = prob_busy_on_arrival(rates)?;
    Ok(rho * conditional_mgf_y_given_busy(rates, s)?
        + (1.0 - rho) * conditional_mgf_y_given_idle(rates, s)?)
}

/// `E[T_{k-1} Y_k] = 1 / (mu^2 (1 - rho)) + (1 - rho) / (mu^2 rho)`.
pub fn cross_moment_ty(rates: QueueRates) -> Result<f64> {
    rates.ensure_stable()?;
    let rho = rates.rho();
    let mu2 = rates.mu * rates.mu;
    let v = 1.0 / (mu2 * (1.0 - rho)) + (1.0 - rho) / (mu2 * rho);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(AudError::Domain(format!("cross moment diverges at rho = {rho}")))
    }
}

/// Dimensionless shape `g(rho) = 1 + 1/rho + rho^2 / (1 - rho)`, so that the
/// average AuD is `g(rho) / mu`.
pub fn aud_shape(rho: f64) -> f64 {
    1.0 + 1.0 / rho + rho * rho / (1.0 - rho)
}

/// `g'(rho) = -1/rho^2 + rho (2 - rho) / (1 - rho)^2`.
pub fn aud_shape_derivative(rho: f64) -> f64 {
    -1.0 / (rho * rho) + rho * (2.0 - rho) / ((1.0 - rho) * (1.0 - rho))
}

/// Average age upon decisions, `(1/mu)(1 + 1/rho + rho^2/(1 - rho))`.
pub fn avg_aud(rates: QueueRates) -> Result<f64> {
    rates.ensure_stable()?;
    Ok(aud_shape(rates.rho()) / rates.mu)
}

/// The same average assembled from the renewal-reward ratio
/// `(E[Y^2] + 2 E[T_{k-1} Y_k]) / (2 E[Y])`.
pub fn avg_aud_via_renewal(rates: QueueRates) -> Result<f64> {
    let ey = mean_interdeparture(rates)?;
    let ey2 = second_moment_interdeparture(rates)?;
    let ety = cross_moment_ty(rates)?;
    Ok((ey2 + 2.0 * ety) / (2.0 * ey))
}

/// Every closed-form quantity for one parameter pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticReport {
    pub avg_aud: f64,
    pub avg_aud_via_renewal: f64,
    pub mean_system_time: f64,
    pub mean_interdeparture: f64,
    pub second_moment_interdeparture: f64,
    pub cross_moment_ty: f64,
    pub prob_busy_on_arrival: f64,
    pub stationary_dist_head: Vec<f64>,
}

impl AnalyticReport {
    pub fn new(rates: QueueRates, max_i: usize) -> Result<Self> {
        Ok(AnalyticReport {
            avg_aud: avg_aud(rates)?,
            avg_aud_via_renewal: avg_aud_via_renewal(rates)?,
            mean_system_time: mean_system_time(rates)?,
            mean_interdeparture: mean_interdeparture(rates)?,
            second_moment_interdeparture: second_moment_interdeparture(rates)?,
            cross_moment_ty: cross_moment_ty(rates)?,
            prob_busy_on_arrival: prob_busy_on_arrival(rates)?,
            stationary_dist_head: stationary_queue_dist(rates, max_i)?,
        })
    }
}

/// Search bracket for the optimal utilization.
pub const RHO_BRACKET: (f64, f64) = (1e-6, 1.0 - 1e-6);

/// Utilization minimizing the average AuD and the matching arrival rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalUtilization {
    pub rho_star: f64,
    pub lambda_star: f64,
}

/// Minimizes `g(rho)`; `rho*` does not depend on `mu`.
pub fn optimal_utilization(mu: f64) -> Result<OptimalUtilization> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(AudError::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    let rho_star = golden_section_rho_star(1e-12);
    Ok(OptimalUtilization {
        rho_star,
        lambda_star: rho_star * mu,
    })
}

/// `g(a) - g(b)` without cancellation:
/// `(a - b) [ (a + b - ab) / ((1 - a)(1 - b)) - 1/(ab) ]`.
fn aud_shape_difference(a: f64, b: f64) -> f64 {
    (a - b) * ((a + b - a * b) / ((1.0 - a) * (1.0 - b)) - 1.0 / (a * b))
}

/// Golden-section search for the minimizer of `g` on [`RHO_BRACKET`].
///
/// Probe values are compared through their exact difference; near the
/// minimum `g` is flat to ~1e-16 over a 1e-8 neighbourhood, so comparing
/// rounded values would stall well short of the target tolerance.
pub fn golden_section_rho_star(tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = RHO_BRACKET;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    while hi - lo > tol {
        if aud_shape_difference(c, d) < 0.0 {
            hi = d;
            d = c;
            c = hi - inv_phi * (hi - lo);
        } else {
            lo = c;
            c = d;
            d = lo + inv_phi * (hi - lo);
        }
    }
    0.5 * (lo + hi)
}

/// Bisection on the root of `g'` over [`RHO_BRACKET`].
pub fn bisection_rho_star(tol: f64) -> f64 {
    let (mut lo, mut hi) = RHO_BRACKET;
    debug_assert!(aud_shape_derivative(lo) < 0.0 && aud_shape_derivative(hi) > 0.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if aud_shape_derivative(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
