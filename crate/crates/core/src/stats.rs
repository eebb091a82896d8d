//! Confidence intervals and Kolmogorov-Smirnov goodness-of-fit tests.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::decision::DecisionRecord;
use crate::error::{AudError, Result};
use crate::queue::UpdateTrace;

pub const DEFAULT_CONFIDENCE: f64 = 0.99;
/// Number of batches used for batch-means intervals.
pub const DEFAULT_BATCHES: usize = 100;
/// Smallest sample accepted by the K-S tests.
pub const KS_MIN_SAMPLES: usize = 50;

/// A sample mean with a symmetric normal-approximation interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
    pub confidence: f64,
}

impl EstimateWithCI {
    pub fn lo(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.half_width
    }

    pub fn overlaps(&self, other: &EstimateWithCI) -> bool {
        (self.mean - other.mean).abs() <= self.half_width + other.half_width
    }

    /// Standard error implied by the half-width.
    pub fn std_error(&self) -> f64 {
        z_value(self.confidence).map_or(f64::NAN, |z| self.half_width / z)
    }
}

/// Two-sided standard normal quantile for `confidence`.
pub fn z_value(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(AudError::InvalidParameter(format!("confidence {confidence}")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + 0.5 * confidence))
}

/// `mean ± z * s / sqrt(n)` with `s` the sample standard deviation.
pub fn mean_ci(samples: &[f64], confidence: f64) -> Result<EstimateWithCI> {
    let n = samples.len();
    if n < 2 {
        return Err(AudError::InsufficientData { needed: 2, got: n });
    }
    let z = z_value(confidence)?;
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    Ok(EstimateWithCI {
        mean,
        half_width: z * sd / (n as f64).sqrt(),
        n,
        confidence,
    })
}

/// Means of `n_batches` contiguous, near-equal slices of `samples`.
pub fn batch_means(samples: &[f64], n_batches: usize) -> Result<Vec<f64>> {
    if n_batches == 0 || samples.len() < n_batches {
        return Err(AudError::InsufficientData {
            needed: n_batches.max(1),
            got: samples.len(),
        });
    }
    let n = samples.len();
    Ok((0..n_batches)
        .map(|b| {
            let chunk = &samples[b * n / n_batches..(b + 1) * n / n_batches];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect())
}

/// Batch-means interval: the grand mean of the samples with the interval
/// computed from the spread of the batch means.
pub fn batch_means_ci(samples: &[f64], n_batches: usize, confidence: f64) -> Result<EstimateWithCI> {
    let batches = batch_means(samples, n_batches)?;
    let mut est = mean_ci(&batches, confidence)?;
    est.mean = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub reject_at_001: bool,
}

/// One-sample K-S test of `samples` against a fully specified `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    let n = samples.len();
    if n < KS_MIN_SAMPLES {
        return Err(AudError::InsufficientData {
            needed: KS_MIN_SAMPLES,
            got: n,
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / nf - f).max(f - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    let p_value = kolmogorov_survival(nf.sqrt() * statistic);
    Ok(KsResult {
        statistic,
        p_value,
        n,
        reject_at_001: p_value < 0.01,
    })
}

pub fn ks_exponential(samples: &[f64], rate: f64) -> Result<KsResult> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(AudError::InvalidParameter(format!("rate {rate}")));
    }
    ks_test(samples, |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() })
}

pub fn ks_uniform(samples: &[f64]) -> Result<KsResult> {
    ks_test(samples, |x| x.clamp(0.0, 1.0))
}

/// Asymptotic Kolmogorov tail `Q(x) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 x^2)`,
/// truncated once terms fall below 1e-10.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.3 {
        // Alternating series converges too slowly here; use the dual
        // theta-function form of the CDF.
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut cdf = 0.0;
        for k in 1..=50 {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * pi2 / (8.0 * x * x)).exp();
            cdf += term;
            if term < 1e-10 * cdf.max(1e-300) {
                break;
            }
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / x * cdf;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += sign * term;
        if term < 1e-10 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Position of each decision within its inter-departure interval, scaled to
/// [0, 1]. Decisions without a following departure in the trace are skipped.
pub fn normalized_offsets(decisions: &[DecisionRecord], trace: &UpdateTrace) -> Vec<f64> {
    let d = trace.departures();
    decisions
        .iter()
        .filter_map(|r| {
            let k = r.freshest_index?;
            let next = *d.get(k + 1)?;
            Some((r.tau - d[k]) / (next - d[k]))
        })
        .collect()
}

/// K-S test of the normalized decision offsets against Uniform(0, 1).
pub fn uniformity_offsets(decisions: &[DecisionRecord], trace: &UpdateTrace) -> Result<KsResult> {
    ks_uniform(&normalized_offsets(decisions, trace))
}
