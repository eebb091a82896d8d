//! Steady-state estimators over a simulated trace.
//!
//! Everything here discards the first `warmup` updates. Time-based estimators
//! use the window from the departure of the last warm-up update to the last
//! departure, split into equal batches; the batch layout is shared so that
//! estimates from the same trace can be paired window by window.

use crate::decision::{aoi_path, aud_batches, decisions, time_average_batches, AudBatches, DecisionProcess};
use crate::error::{AudError, Result};
use crate::queue::{occupancy_batches, queue_length_process, UpdateTrace};
use crate::stats::{batch_means_ci, mean_ci, EstimateWithCI};

/// Post-warm-up time window of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyWindow {
    pub warmup: usize,
    pub from: f64,
    pub to: f64,
}

impl SteadyWindow {
    pub fn new(trace: &UpdateTrace, warmup: usize) -> Result<Self> {
        if warmup >= trace.len() {
            return Err(AudError::InsufficientData {
                needed: warmup + 1,
                got: trace.len(),
            });
        }
        let d = trace.departures();
        let from = d[warmup.saturating_sub(1)];
        let to = d[d.len() - 1];
        if !(to > from) {
            return Err(AudError::EmptyWindow { from, to });
        }
        Ok(SteadyWindow { warmup, from, to })
    }

    pub fn duration(&self) -> f64 {
        self.to - self.from
    }
}

/// AuD of one decision process over the window, with its batch-means interval.
#[derive(Debug, Clone, PartialEq)]
pub struct AudEstimate {
    pub nu: f64,
    pub batches: AudBatches,
    /// `None` when fewer than two windows hold decisions.
    pub ci: Option<EstimateWithCI>,
}

/// Runs `process` over the whole trace (horizon = last departure) and
/// averages the AuD of decisions inside `window`.
pub fn aud_estimate(
    trace: &UpdateTrace,
    window: &SteadyWindow,
    process: DecisionProcess,
    seed: u64,
    n_batches: usize,
    confidence: f64,
) -> Result<AudEstimate> {
    let horizon = window.to;
    let stream = process.stream(seed);
    let batches = aud_batches(
        decisions(trace, process, horizon, stream)?,
        window.from,
        window.to,
        n_batches,
    )?;
    let ci = match batches.mean {
        Some(mean) => mean_ci(&batches.batch_means(), confidence).ok().map(|mut ci| {
            ci.mean = mean;
            ci
        }),
        None => None,
    };
    Ok(AudEstimate {
        nu: process.rate(),
        batches,
        ci,
    })
}

/// Time average of the AoI sawtooth over the window, batched.
pub fn aoi_time_average(
    trace: &UpdateTrace,
    window: &SteadyWindow,
    n_batches: usize,
    confidence: f64,
) -> Result<(EstimateWithCI, Vec<f64>)> {
    let path = aoi_path(trace)?;
    let batches = time_average_batches(&path, window.from, window.to, n_batches)?;
    let mut ci = mean_ci(&batches, confidence)?;
    // Equal-width windows: the mean of batch averages is the window average.
    ci.mean = batches.iter().sum::<f64>() / batches.len() as f64;
    Ok((ci, batches))
}

/// Interval for `mean(a_b - b_b)` over windows where both batches exist.
pub fn paired_difference_ci(
    a: &[Option<f64>],
    b: &[Option<f64>],
    confidence: f64,
) -> Result<EstimateWithCI> {
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some((*x)? - (*y)?))
        .collect();
    mean_ci(&diffs, confidence)
}

/// Time-weighted fraction of the window spent at each queue length
/// `0..=max_len`, each with a batch-means interval.
pub fn occupancy_estimates(
    trace: &UpdateTrace,
    window: &SteadyWindow,
    max_len: usize,
    n_batches: usize,
    confidence: f64,
) -> Result<Vec<EstimateWithCI>> {
    let path = queue_length_process(trace);
    let batches = occupancy_batches(&path, window.from, window.to, n_batches, max_len)?;
    (0..=max_len)
        .map(|i| {
            let col: Vec<f64> = batches.iter().map(|b| b[i]).collect();
            mean_ci(&col, confidence)
        })
        .collect()
}

/// `Pr{X_k < T_{k-1}}` over post-warm-up updates, batch-means interval.
pub fn busy_on_arrival_estimate(
    trace: &UpdateTrace,
    warmup: usize,
    n_batches: usize,
    confidence: f64,
) -> Result<EstimateWithCI> {
    let xs: Vec<f64> = crate::queue::busy_indicators(trace, warmup.max(1))
        .map(|b| if b { 1.0 } else { 0.0 })
        .collect();
    batch_means_ci(&xs, n_batches, confidence)
}

/// `E[T_{k-1} Y_k]` over post-warm-up updates, batch-means interval.
pub fn cross_moment_estimate(
    trace: &UpdateTrace,
    warmup: usize,
    n_batches: usize,
    confidence: f64,
) -> Result<EstimateWithCI> {
    let xs: Vec<f64> = (warmup.max(1)..trace.len())
        .map(|i| trace.system_time(i - 1) * trace.inter_departure(i))
        .collect();
    batch_means_ci(&xs, n_batches, confidence)
}

/// Post-warm-up inter-departure times.
pub fn interdepartures(trace: &UpdateTrace, warmup: usize) -> Vec<f64> {
    (warmup.max(1)..trace.len()).map(|i| trace.inter_departure(i)).collect()
}

/// Post-warm-up system times, keeping every `stride`-th update.
pub fn thinned_system_times(trace: &UpdateTrace, warmup: usize, stride: usize) -> Vec<f64> {
    (warmup..trace.len())
        .step_by(stride.max(1))
        .map(|i| trace.system_time(i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::{simulate_mm1, QueueRates, SimOptions};

    #[test]
    fn window_starts_after_warmup() {
        let rates = QueueRates::new(0.5, 1.0).unwrap();
        let t = simulate_mm1(rates, 100, 1, SimOptions::default()).unwrap();
        let w = SteadyWindow::new(&t, 10).unwrap();
        assert_eq!(w.from, t.departures()[9]);
        assert_eq!(w.to, t.last_departure().unwrap());
        assert!(SteadyWindow::new(&t, 100).is_err());
    }

    #[test]
    fn paired_difference_skips_missing() {
        let a = [Some(1.0), None, Some(3.0), Some(5.0)];
        let b = [Some(0.0), Some(1.0), Some(2.0), Some(4.0)];
        let ci = paired_difference_ci(&a, &b, 0.99).unwrap();
        assert_eq!(ci.n, 3);
        assert_eq!(ci.mean, 1.0);
        assert_eq!(ci.half_width, 0.0);
    }
}
