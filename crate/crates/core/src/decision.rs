//! Decision epochs, age upon decisions and the continuous age-of-information
//! sawtooth.
//!
//! At a decision epoch `tau` the receiver acts on the freshest update that has
//! departed, `k = max{k : t'_k <= tau}`, whose age is `tau - t_k`. Before the
//! first departure no update exists; such decisions carry no AuD and are
//! counted separately.

use std::io::Write;

use crate::dist::{decision_stream_id, DistributionSpec, SeededStream};
use crate::error::{AudError, Result};
use crate::queue::UpdateTrace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRecord {
    pub tau: f64,
    /// 0-based index of the freshest departed update; `None` before the first departure.
    pub freshest_index: Option<usize>,
    pub generation_time: Option<f64>,
    pub aud: Option<f64>,
}

impl DecisionRecord {
    pub fn is_defined(&self) -> bool {
        self.aud.is_some()
    }
}

/// Evaluates a decision made at `tau` against `trace`.
pub fn decision_at(trace: &UpdateTrace, tau: f64) -> DecisionRecord {
    let departed = trace.departures().partition_point(|&d| d <= tau);
    match departed.checked_sub(1) {
        Some(k) => {
            let generated = trace.arrivals()[k];
            DecisionRecord {
                tau,
                freshest_index: Some(k),
                generation_time: Some(generated),
                aud: Some(tau - generated),
            }
        }
        None => DecisionRecord {
            tau,
            freshest_index: None,
            generation_time: None,
            aud: None,
        },
    }
}

/// Decisions at caller-chosen epochs, which must lie within the trace.
pub fn decisions_at(trace: &UpdateTrace, epochs: &[f64]) -> Result<Vec<DecisionRecord>> {
    let last = trace.last_departure().ok_or(AudError::InsufficientData { needed: 1, got: 0 })?;
    epochs
        .iter()
        .map(|&tau| {
            if tau > last {
                Err(AudError::Truncation {
                    horizon: tau,
                    last_departure: last,
                })
            } else {
                Ok(decision_at(trace, tau))
            }
        })
        .collect()
}

/// How decision epochs are spaced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecisionProcess {
    /// Exponential gaps with the given rate.
    Poisson { rate: f64 },
    /// Fixed gaps of `1 / rate`.
    Periodic { rate: f64 },
}

impl DecisionProcess {
    pub fn rate(&self) -> f64 {
        match *self {
            DecisionProcess::Poisson { rate } | DecisionProcess::Periodic { rate } => rate,
        }
    }

    pub fn gaps(&self) -> Result<DistributionSpec> {
        match *self {
            DecisionProcess::Poisson { rate } => DistributionSpec::exponential(rate),
            DecisionProcess::Periodic { rate } => {
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(AudError::InvalidParameter(format!("decision rate {rate}")));
                }
                DistributionSpec::deterministic(1.0 / rate)
            }
        }
    }

    /// The stream the process draws from for a run seeded with `seed`.
    pub fn stream(&self, seed: u64) -> SeededStream {
        SeededStream::new(seed, decision_stream_id(self.rate()))
    }
}

/// Lazily generated decisions on `(0, horizon]`.
#[derive(Debug)]
pub struct Decisions<'a> {
    trace: &'a UpdateTrace,
    gaps: DistributionSpec,
    stream: SeededStream,
    now: f64,
    horizon: f64,
}

impl Iterator for Decisions<'_> {
    type Item = DecisionRecord;

    fn next(&mut self) -> Option<DecisionRecord> {
        self.now += self.gaps.sample_valid(&mut self.stream);
        if self.now > self.horizon {
            self.now = f64::INFINITY;
            return None;
        }
        Some(decision_at(self.trace, self.now))
    }
}

/// Streams decisions of `process` against `trace` up to `horizon`, which must
/// not exceed the last departure.
pub fn decisions<'a>(
    trace: &'a UpdateTrace,
    process: DecisionProcess,
    horizon: f64,
    stream: SeededStream,
) -> Result<Decisions<'a>> {
    let last = trace.last_departure().ok_or(AudError::InsufficientData { needed: 1, got: 0 })?;
    if horizon > last {
        return Err(AudError::Truncation {
            horizon,
            last_departure: last,
        });
    }
    if !(horizon >= 0.0) {
        return Err(AudError::InvalidParameter(format!("horizon {horizon}")));
    }
    Ok(Decisions {
        trace,
        gaps: process.gaps()?,
        stream,
        now: 0.0,
        horizon,
    })
}

/// Poisson decisions at rate `nu` on `(0, horizon]`, collected.
pub fn generate_decisions(
    trace: &UpdateTrace,
    nu: f64,
    horizon: f64,
    stream: SeededStream,
) -> Result<Vec<DecisionRecord>> {
    Ok(decisions(trace, DecisionProcess::Poisson { rate: nu }, horizon, stream)?.collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AudAverage {
    pub mean: f64,
    pub n_defined: usize,
    pub n_undefined: usize,
}

/// Mean AuD over the defined decisions.
pub fn average_aud(decisions: &[DecisionRecord]) -> Result<AudAverage> {
    let mut sum = 0.0;
    let mut n_defined = 0;
    for aud in decisions.iter().filter_map(|d| d.aud) {
        sum += aud;
        n_defined += 1;
    }
    if n_defined == 0 {
        return Err(AudError::InsufficientData { needed: 1, got: 0 });
    }
    Ok(AudAverage {
        mean: sum / n_defined as f64,
        n_defined,
        n_undefined: decisions.len() - n_defined,
    })
}

/// AuD statistics over a time window, with per-window batch means.
#[derive(Debug, Clone, PartialEq)]
pub struct AudBatches {
    /// `None` when no defined decision falls in the window.
    pub mean: Option<f64>,
    pub n_defined: usize,
    /// Undefined decisions anywhere in the stream, window or not.
    pub n_undefined: usize,
    /// Decisions generated in total.
    pub n_total: usize,
    /// Mean AuD of the decisions in each equal-width window, `None` when a
    /// window holds no decision. Aligned with the windows of any other
    /// stream batched over the same range.
    pub batches: Vec<Option<f64>>,
}

impl AudBatches {
    /// Means of the non-empty windows.
    pub fn batch_means(&self) -> Vec<f64> {
        self.batches.iter().flatten().copied().collect()
    }
}

/// Consumes a decision stream, averaging the defined AuD values whose epoch
/// lies in `[from, to)`, split into `n_batches` equal windows.
pub fn aud_batches<I>(decisions: I, from: f64, to: f64, n_batches: usize) -> Result<AudBatches>
where
    I: IntoIterator<Item = DecisionRecord>,
{
    if !(to > from) || n_batches == 0 {
        return Err(AudError::EmptyWindow { from, to });
    }
    let width = (to - from) / n_batches as f64;
    let mut sums = vec![0.0; n_batches];
    let mut counts = vec![0usize; n_batches];
    let mut n_undefined = 0;
    let mut n_total = 0;
    for d in decisions {
        n_total += 1;
        let Some(aud) = d.aud else {
            n_undefined += 1;
            continue;
        };
        if d.tau < from || d.tau >= to {
            continue;
        }
        let b = (((d.tau - from) / width) as usize).min(n_batches - 1);
        sums[b] += aud;
        counts[b] += 1;
    }
    let n_defined: usize = counts.iter().sum();
    let mean = (n_defined > 0).then(|| sums.iter().sum::<f64>() / n_defined as f64);
    let batches = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    Ok(AudBatches {
        mean,
        n_defined,
        n_undefined,
        n_total,
        batches,
    })
}

/// Writes `j,tau,freshest_index,aud` with 1-based `j` and update index;
/// undefined decisions leave the last two fields empty.
pub fn write_decisions_csv<W: Write>(decisions: &[DecisionRecord], mut out: W) -> Result<()> {
    writeln!(out, "j,tau,freshest_index,aud")?;
    for (j, d) in decisions.iter().enumerate() {
        match (d.freshest_index, d.aud) {
            (Some(k), Some(aud)) => writeln!(out, "{},{:.15e},{},{:.15e}", j + 1, d.tau, k + 1, aud)?,
            _ => writeln!(out, "{},{:.15e},,", j + 1, d.tau)?,
        }
    }
    Ok(())
}

/// The age-of-information sawtooth from the first to the last departure.
///
/// Vertices alternate between the age just after a departure (the departing
/// update's system time) and the age just before the next departure. Age
/// grows with slope 1 between vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct AoiPath {
    vertices: Vec<(f64, f64)>,
}

impl AoiPath {
    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn start(&self) -> f64 {
        self.vertices[0].0
    }

    pub fn end(&self) -> f64 {
        self.vertices[self.vertices.len() - 1].0
    }

    /// Age at `t`, right-continuous at departures. `None` outside the support.
    pub fn age_at(&self, t: f64) -> Option<f64> {
        if t < self.start() || t > self.end() {
            return None;
        }
        let (epoch, age) = self.vertices[self.last_post_drop(t)];
        Some(age + (t - epoch))
    }

    /// Index of the post-drop vertex governing `t` (even indices).
    fn last_post_drop(&self, t: f64) -> usize {
        let n_post = self.vertices.len() / 2 + 1;
        // Post-drop vertices sit at even indices.
        let (mut lo, mut hi) = (0usize, n_post);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.vertices[2 * mid].0 <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        2 * lo
    }

    /// Exact integral of the age over `[from, to]`.
    fn integral(&self, from: f64, to: f64) -> f64 {
        let mut total = 0.0;
        let mut v = self.last_post_drop(from);
        let mut cur = from;
        while cur < to {
            let (epoch, age) = self.vertices[v];
            let seg_end = if v + 1 < self.vertices.len() {
                self.vertices[v + 1].0
            } else {
                to
            };
            let end = seg_end.min(to);
            if end > cur {
                let a0 = age + (cur - epoch);
                let a1 = age + (end - epoch);
                total += 0.5 * (a0 + a1) * (end - cur);
            }
            cur = end;
            v += 2;
            if v >= self.vertices.len() {
                break;
            }
        }
        total
    }
}

pub fn aoi_path(trace: &UpdateTrace) -> Result<AoiPath> {
    if trace.is_empty() {
        return Err(AudError::InsufficientData { needed: 1, got: 0 });
    }
    let d = trace.departures();
    let mut vertices = Vec::with_capacity(2 * trace.len() - 1);
    for i in 0..trace.len() {
        if i > 0 {
            vertices.push((d[i], trace.system_time(i - 1) + (d[i] - d[i - 1])));
        }
        vertices.push((d[i], trace.system_time(i)));
    }
    Ok(AoiPath { vertices })
}

/// Time average of the sawtooth over `[from, to]`.
pub fn time_average_aoi(path: &AoiPath, from: f64, to: f64) -> Result<f64> {
    if !(to > from) {
        return Err(AudError::EmptyWindow { from, to });
    }
    if from < path.start() || to > path.end() {
        return Err(AudError::Domain(format!(
            "window [{from}, {to}] outside path support [{}, {}]",
            path.start(),
            path.end()
        )));
    }
    Ok(path.integral(from, to) / (to - from))
}

/// Time averages over `n_batches` equal windows of `[from, to]`.
pub fn time_average_batches(path: &AoiPath, from: f64, to: f64, n_batches: usize) -> Result<Vec<f64>> {
    if n_batches == 0 {
        return Err(AudError::EmptyWindow { from, to });
    }
    let width = (to - from) / n_batches as f64;
    (0..n_batches)
        .map(|b| {
            let lo = from + b as f64 * width;
            let hi = if b + 1 == n_batches { to } else { lo + width };
            time_average_aoi(path, lo, hi)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::{simulate, SimOptions};

    fn trace(a: &[f64], d: &[f64]) -> UpdateTrace {
        let mut starts = Vec::new();
        let mut prev = 0.0f64;
        for (&ai, &di) in a.iter().zip(d) {
            starts.push(ai.max(prev));
            prev = di;
        }
        UpdateTrace::from_epochs(a.to_vec(), starts, d.to_vec()).unwrap()
    }

    fn dd1(n: usize) -> UpdateTrace {
        simulate(
            &DistributionSpec::deterministic(2.0).unwrap(),
            &DistributionSpec::deterministic(1.0).unwrap(),
            n,
            0,
            SimOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn decision_exactly_at_departure() {
        let t = trace(&[2.0], &[3.0]);
        let d = decisions_at(&t, &[3.0]).unwrap();
        assert_eq!(d[0].aud, Some(1.0));
        assert_eq!(d[0].freshest_index, Some(0));
    }

    #[test]
    fn decision_inside_third_interval() {
        // t'_2 = 5 with T_2 = 2; tau = 6 falls before t'_3 = 8.
        let t = trace(&[1.0, 3.0, 4.0], &[2.5, 5.0, 8.0]);
        let d = decisions_at(&t, &[6.0]).unwrap();
        assert_eq!(d[0].freshest_index, Some(1));
        assert_eq!(d[0].generation_time, Some(3.0));
        assert_eq!(d[0].aud, Some(3.0));
    }

    #[test]
    fn decision_before_first_departure_is_undefined() {
        let t = trace(&[2.0], &[3.0]);
        let d = decisions_at(&t, &[1.0, 3.0]).unwrap();
        assert!(!d[0].is_defined());
        let avg = average_aud(&d).unwrap();
        assert_eq!(avg.n_undefined, 1);
        assert_eq!(avg.n_defined, 1);
        assert_eq!(avg.mean, 1.0);
        assert!(matches!(average_aud(&d[..1]), Err(AudError::InsufficientData { .. })));
    }

    #[test]
    fn decisions_beyond_trace_rejected() {
        let t = trace(&[2.0], &[3.0]);
        assert!(matches!(decisions_at(&t, &[4.0]), Err(AudError::Truncation { .. })));
        let s = SeededStream::new(1, 2);
        assert!(matches!(generate_decisions(&t, 1.0, 3.5, s), Err(AudError::Truncation { .. })));
    }

    #[test]
    fn mean_of_two() {
        let recs = [1.0, 3.0].map(|aud| DecisionRecord {
            tau: 0.0,
            freshest_index: Some(0),
            generation_time: Some(0.0),
            aud: Some(aud),
        });
        assert_eq!(average_aud(&recs).unwrap().mean, 2.0);
    }

    #[test]
    fn single_update_path() {
        let t = trace(&[0.0], &[1.0]);
        let p = aoi_path(&t).unwrap();
        assert_eq!(p.vertices(), &[(1.0, 1.0)]);
        assert_eq!(p.age_at(1.0), Some(1.0));
    }

    #[test]
    fn deterministic_sawtooth() {
        let t = dd1(20);
        let p = aoi_path(&t).unwrap();
        for w in p.vertices().chunks(2) {
            assert_eq!(w[0].1, 1.0);
            if w.len() == 2 {
                assert_eq!(w[1].1, 3.0);
            }
        }
        // Whole periods starting at departures and mid-period alike.
        assert!((time_average_aoi(&p, 3.0, 9.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((time_average_aoi(&p, 4.0, 10.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((time_average_aoi(&p, 3.0, 4.0).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn triangle_mean() {
        // One linear ramp: age a at departure, window w inside the ramp.
        let t = trace(&[0.0, 1.0], &[1.5, 10.0]);
        let p = aoi_path(&t).unwrap();
        let (a, w) = (1.5, 4.0);
        assert!((time_average_aoi(&p, 1.5, 1.5 + w).unwrap() - (a + w / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn averaging_window_errors() {
        let p = aoi_path(&dd1(5)).unwrap();
        assert!(matches!(time_average_aoi(&p, 4.0, 4.0), Err(AudError::EmptyWindow { .. })));
        assert!(matches!(time_average_aoi(&p, 0.0, 4.0), Err(AudError::Domain(_))));
    }

    #[test]
    fn aud_matches_path_pointwise() {
        let rates = crate::queue::QueueRates::new(0.5, 1.0).unwrap();
        let t = crate::queue::simulate_mm1(rates, 5000, 9, SimOptions::default()).unwrap();
        let p = aoi_path(&t).unwrap();
        let horizon = t.last_departure().unwrap();
        let recs = generate_decisions(&t, 1.0, horizon, SeededStream::new(9, 77)).unwrap();
        for r in recs.iter().filter(|r| r.is_defined()) {
            let k = r.freshest_index.unwrap();
            let age = p.age_at(r.tau).unwrap();
            assert!((r.aud.unwrap() - age).abs() < 1e-9);
            assert!(r.aud.unwrap() >= t.system_time(k));
            let expected = t.system_time(k) + (r.tau - t.departures()[k]);
            assert!((r.aud.unwrap() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn periodic_decisions_evenly_spaced() {
        let t = dd1(100);
        let recs: Vec<_> = decisions(&t, DecisionProcess::Periodic { rate: 4.0 }, 50.0, SeededStream::new(0, 0))
            .unwrap()
            .collect();
        assert_eq!(recs.len(), 200);
        assert!((recs[3].tau - 1.0).abs() < 1e-12);
    }

    #[test]
    fn batches_split_by_time() {
        let t = dd1(100);
        let p = DecisionProcess::Periodic { rate: 2.0 };
        let b = aud_batches(decisions(&t, p, 199.0, SeededStream::new(0, 0)).unwrap(), 3.0, 103.0, 10).unwrap();
        assert_eq!(b.batch_means().len(), 10);
        assert!((b.mean.unwrap() - 1.75).abs() < 1e-9);
        assert_eq!(b.n_undefined, 5);
    }

    #[test]
    fn decision_csv_marks_undefined() {
        let t = trace(&[2.0], &[3.0]);
        let d = decisions_at(&t, &[1.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        write_decisions_csv(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "j,tau,freshest_index,aud");
        assert!(lines[1].ends_with(",,"));
        assert!(lines[2].starts_with("2,") && lines[2].contains(",1,"));
    }
}
