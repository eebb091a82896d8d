//! Single-server FCFS queue with an infinite buffer.
//!
//! The engine advances the work-conserving recursion
//! `start_k = max(t_k, t'_{k-1})`, `t'_k = start_k + S_k`, which is the event
//! order of a FCFS server: a job starts the moment it has arrived and its
//! predecessor has left. Traces are stored as three epoch columns; all
//! intervals (X, W, S, T, Y) are derived on demand.

use std::io::Write;

use crate::dist::{DistributionSpec, SeededStream, ARRIVAL_STREAM, SERVICE_STREAM};
use crate::error::{AudError, Result};

/// Utilizations at or above `1 - STABILITY_GUARD` count as unstable.
pub const STABILITY_GUARD: f64 = 1e-9;

/// Arrival and service rates of an M/M/1 queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueRates {
    pub lambda: f64,
    pub mu: f64,
}

impl QueueRates {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        check_rate("lambda", lambda)?;
        check_rate("mu", mu)?;
        Ok(QueueRates { lambda, mu })
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    pub fn is_stable(&self) -> bool {
        self.rho() < 1.0 - STABILITY_GUARD
    }

    pub fn ensure_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(AudError::Unstable { rho: self.rho() })
        }
    }

    /// Both rates multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        QueueRates::new(self.lambda * c, self.mu * c)
    }
}

/// Arrival rate, service rate and decision rate of an update-and-decide system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
}

impl SystemParams {
    pub fn new(lambda: f64, mu: f64, nu: f64) -> Result<Self> {
        check_rate("lambda", lambda)?;
        check_rate("mu", mu)?;
        check_rate("nu", nu)?;
        Ok(SystemParams { lambda, mu, nu })
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    pub fn queue(&self) -> QueueRates {
        QueueRates {
            lambda: self.lambda,
            mu: self.mu,
        }
    }
}

fn check_rate(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(AudError::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    /// Produce a trace even when the configured utilization is not below 1.
    /// Such traces are tagged non-stationary.
    pub allow_unstable: bool,
}

/// Per-update epochs of one simulation run, in update order.
///
/// Indices are 0-based; update `i` is the 1-based update `k = i + 1`.
/// The virtual update 0 arrives and departs at time 0, so `X_1 = t_1` and
/// `Y_1 = t'_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateTrace {
    arrivals: Vec<f64>,
    service_starts: Vec<f64>,
    departures: Vec<f64>,
    stationary: bool,
}

impl UpdateTrace {
    /// Builds a trace from explicit epochs, checking every trace invariant.
    pub fn from_epochs(
        arrivals: Vec<f64>,
        service_starts: Vec<f64>,
        departures: Vec<f64>,
    ) -> Result<Self> {
        let n = arrivals.len();
        if service_starts.len() != n || departures.len() != n {
            return Err(AudError::InvalidParameter("epoch columns differ in length".into()));
        }
        let trace = UpdateTrace {
            arrivals,
            service_starts,
            departures,
            stationary: true,
        };
        trace.check_invariants()?;
        Ok(trace)
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    /// False for traces produced under the unstable-run override.
    pub fn is_stationary(&self) -> bool {
        self.stationary
    }

    pub fn arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    pub fn service_starts(&self) -> &[f64] {
        &self.service_starts
    }

    pub fn departures(&self) -> &[f64] {
        &self.departures
    }

    pub fn last_departure(&self) -> Option<f64> {
        self.departures.last().copied()
    }

    /// `X`: time since the previous arrival.
    pub fn inter_arrival(&self, i: usize) -> f64 {
        self.arrivals[i] - if i == 0 { 0.0 } else { self.arrivals[i - 1] }
    }

    /// `W`: time spent waiting before service.
    pub fn waiting(&self, i: usize) -> f64 {
        self.service_starts[i] - self.arrivals[i]
    }

    /// `S`: service duration.
    pub fn service(&self, i: usize) -> f64 {
        self.departures[i] - self.service_starts[i]
    }

    /// `T`: system time, arrival to departure.
    pub fn system_time(&self, i: usize) -> f64 {
        self.departures[i] - self.arrivals[i]
    }

    /// `Y`: time since the previous departure.
    pub fn inter_departure(&self, i: usize) -> f64 {
        self.departures[i] - if i == 0 { 0.0 } else { self.departures[i - 1] }
    }

    pub fn system_times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.system_time(i))
    }

    pub fn inter_departures(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.inter_departure(i))
    }

    /// Total time the server is busy over the whole trace.
    pub fn busy_time(&self) -> f64 {
        let mut busy = 0.0;
        let mut period_start = f64::NAN;
        for i in 0..self.len() {
            if i == 0 || self.arrivals[i] > self.departures[i - 1] {
                if i > 0 {
                    busy += self.departures[i - 1] - period_start;
                }
                period_start = self.service_starts[i];
            }
        }
        if let Some(last) = self.last_departure() {
            busy += last - period_start;
        }
        busy
    }

    /// Checks epoch ordering, FCFS order and the work-conserving recursion.
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |i: usize, what: &str| {
            Err(AudError::InvalidParameter(format!("update {i}: {what}")))
        };
        let mut prev_arrival = 0.0;
        let mut prev_departure = 0.0;
        for i in 0..self.len() {
            let (a, s, d) = (self.arrivals[i], self.service_starts[i], self.departures[i]);
            if !(a.is_finite() && s.is_finite() && d.is_finite()) {
                return bad(i, "non-finite epoch");
            }
            if i > 0 && a <= prev_arrival {
                return bad(i, "arrivals not strictly increasing");
            }
            if i > 0 && d <= prev_departure {
                return bad(i, "departures not strictly increasing");
            }
            if s != a.max(prev_departure) {
                return bad(i, "service start violates max(arrival, previous departure)");
            }
            if d <= s {
                return bad(i, "non-positive service time");
            }
            prev_arrival = a;
            prev_departure = d;
        }
        Ok(())
    }

    /// Writes `k,t_arrival,t_service_start,t_depart` with 1-based `k`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,t_arrival,t_service_start,t_depart")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{:.15e},{:.15e},{:.15e}",
                i + 1,
                self.arrivals[i],
                self.service_starts[i],
                self.departures[i]
            )?;
        }
        Ok(())
    }
}

/// Number of leading updates discarded by steady-state estimators:
/// `max(1000, n / 100)`, capped at half the trace so short runs keep data.
pub fn default_warmup(n: usize) -> usize {
    (n / 100).max(1000).min(n / 2)
}

/// Epochs of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateEpochs {
    pub arrival: f64,
    pub service_start: f64,
    pub departure: f64,
}

impl UpdateEpochs {
    pub fn system_time(&self) -> f64 {
        self.departure - self.arrival
    }
}

/// Unbounded update stream of a FCFS queue, for runs too long to store.
///
/// Yields the same epochs, in the same order, as [`simulate`] with the same
/// distributions and seed.
#[derive(Debug, Clone)]
pub struct QueueRun {
    arrival: DistributionSpec,
    service: DistributionSpec,
    arrival_stream: SeededStream,
    service_stream: SeededStream,
    t_arrival: f64,
    t_depart: f64,
    stationary: bool,
}

impl QueueRun {
    /// Validates the distributions and applies the stability rule of [`simulate`].
    pub fn new(
        arrival: &DistributionSpec,
        service: &DistributionSpec,
        seed: u64,
        opts: SimOptions,
    ) -> Result<Self> {
        arrival.validate()?;
        service.validate()?;
        let rho = service.mean() / arrival.mean();
        let stationary = rho < 1.0 - STABILITY_GUARD;
        if !stationary
            && arrival.is_exponential()
            && service.is_exponential()
            && !opts.allow_unstable
        {
            return Err(AudError::Unstable { rho });
        }
        Ok(QueueRun {
            arrival: *arrival,
            service: *service,
            arrival_stream: SeededStream::new(seed, ARRIVAL_STREAM),
            service_stream: SeededStream::new(seed, SERVICE_STREAM),
            t_arrival: 0.0,
            t_depart: 0.0,
            stationary,
        })
    }

    pub fn mm1(rates: QueueRates, seed: u64, opts: SimOptions) -> Result<Self> {
        QueueRun::new(
            &DistributionSpec::exponential(rates.lambda)?,
            &DistributionSpec::exponential(rates.mu)?,
            seed,
            opts,
        )
    }

    pub fn is_stationary(&self) -> bool {
        self.stationary
    }
}

impl Iterator for QueueRun {
    type Item = UpdateEpochs;

    fn next(&mut self) -> Option<UpdateEpochs> {
        self.t_arrival += self.arrival.sample_valid(&mut self.arrival_stream);
        let service_start = self.t_arrival.max(self.t_depart);
        self.t_depart = service_start + self.service.sample_valid(&mut self.service_stream);
        Some(UpdateEpochs {
            arrival: self.t_arrival,
            service_start,
            departure: self.t_depart,
        })
    }
}

/// Simulates `n_updates` updates through a FCFS single-server queue.
///
/// Inter-arrival times come from stream [`ARRIVAL_STREAM`] and service times
/// from [`SERVICE_STREAM`] of `seed`. When both distributions are exponential
/// and the utilization is not below 1 the run is refused unless
/// `opts.allow_unstable` is set, in which case the trace is tagged
/// non-stationary.
pub fn simulate(
    arrival: &DistributionSpec,
    service: &DistributionSpec,
    n_updates: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<UpdateTrace> {
    if n_updates == 0 {
        return Err(AudError::InvalidParameter("n_updates must be at least 1".into()));
    }
    let run = QueueRun::new(arrival, service, seed, opts)?;
    let stationary = run.is_stationary();
    let mut arrivals = Vec::with_capacity(n_updates);
    let mut service_starts = Vec::with_capacity(n_updates);
    let mut departures = Vec::with_capacity(n_updates);
    for u in run.take(n_updates) {
        arrivals.push(u.arrival);
        service_starts.push(u.service_start);
        departures.push(u.departure);
    }
    Ok(UpdateTrace {
        arrivals,
        service_starts,
        departures,
        stationary,
    })
}

/// Spacing between system-time samples fed to the K-S test.
///
/// Consecutive system times are positively correlated; the correlation decays
/// over roughly `rho / (1 - sqrt(rho))^2` updates. Twice that keeps the
/// thinned sample effectively independent.
pub fn system_time_stride(rho: f64) -> usize {
    if !(rho > 0.0 && rho < 1.0) {
        return 1;
    }
    let relax = rho / (1.0 - rho.sqrt()).powi(2);
    (2.0 * relax).ceil().max(1.0) as usize
}

/// Exponential inter-arrivals at `lambda`, exponential service at `mu`.
pub fn simulate_mm1(
    rates: QueueRates,
    n_updates: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<UpdateTrace> {
    simulate(
        &DistributionSpec::exponential(rates.lambda)?,
        &DistributionSpec::exponential(rates.mu)?,
        n_updates,
        seed,
        opts,
    )
}

/// Number of updates in the system (waiting or in service) from `epoch` on,
/// until the next sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueLengthSample {
    pub epoch: f64,
    pub length: u32,
}

/// Piecewise-constant path of `L(t)`, starting with `(0, 0)`.
///
/// One sample per arrival (+1) and per departure (-1). At equal epochs the
/// departure is processed first.
pub fn queue_length_process(trace: &UpdateTrace) -> Vec<QueueLengthSample> {
    let a = trace.arrivals();
    let d = trace.departures();
    let mut out = Vec::with_capacity(2 * trace.len() + 1);
    out.push(QueueLengthSample {
        epoch: 0.0,
        length: 0,
    });
    let (mut i, mut j) = (0usize, 0usize);
    let mut length: u32 = 0;
    while j < d.len() {
        let epoch = if i < a.len() && a[i] < d[j] {
            i += 1;
            length += 1;
            a[i - 1]
        } else {
            j += 1;
            length -= 1;
            d[j - 1]
        };
        out.push(QueueLengthSample { epoch, length });
    }
    out
}

/// Fraction of `[from, to)` spent at each length `0..=max_len`.
pub fn occupancy_fractions(
    path: &[QueueLengthSample],
    from: f64,
    to: f64,
    max_len: usize,
) -> Result<Vec<f64>> {
    let batches = occupancy_batches(path, from, to, 1, max_len)?;
    Ok(batches.into_iter().next().unwrap_or_default())
}

/// Splits `[from, to)` into `n_batches` equal windows and returns the
/// occupancy fractions of each window.
pub fn occupancy_batches(
    path: &[QueueLengthSample],
    from: f64,
    to: f64,
    n_batches: usize,
    max_len: usize,
) -> Result<Vec<Vec<f64>>> {
    if !(to > from) || n_batches == 0 {
        return Err(AudError::EmptyWindow { from, to });
    }
    let width = (to - from) / n_batches as f64;
    let mut time = vec![vec![0.0; max_len + 1]; n_batches];
    for (s, next) in path.iter().zip(path.iter().skip(1).map(|n| n.epoch).chain([f64::INFINITY])) {
        let lo = s.epoch.max(from);
        let hi = next.min(to);
        if hi <= lo || s.length as usize > max_len {
            continue;
        }
        let len = s.length as usize;
        // Spread [lo, hi) over the windows it touches.
        let mut b = (((lo - from) / width) as usize).min(n_batches - 1);
        let mut cur = lo;
        while cur < hi {
            let edge = if b + 1 == n_batches {
                to
            } else {
                from + (b + 1) as f64 * width
            };
            let end = hi.min(edge);
            if end > cur {
                time[b][len] += end - cur;
            }
            cur = end;
            if b + 1 == n_batches {
                break;
            }
            b += 1;
        }
    }
    for row in &mut time {
        for v in row.iter_mut() {
            *v /= width;
        }
    }
    Ok(time)
}

/// Fraction of updates `k >= 2` that arrive while their predecessor is
/// still in the system (`X_k < T_{k-1}`).
pub fn empirical_prob_arrival_sees_busy(trace: &UpdateTrace) -> Result<f64> {
    if trace.len() < 2 {
        return Err(AudError::InsufficientData {
            needed: 2,
            got: trace.len(),
        });
    }
    let busy = busy_indicators(trace, 1).filter(|&b| b).count();
    Ok(busy as f64 / (trace.len() - 1) as f64)
}

/// `X_k < T_{k-1}` for every update index `i >= first.max(1)`.
pub fn busy_indicators(trace: &UpdateTrace, first: usize) -> impl Iterator<Item = bool> + '_ {
    (first.max(1)..trace.len()).map(|i| trace.inter_arrival(i) < trace.system_time(i - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dd1() -> UpdateTrace {
        simulate(
            &DistributionSpec::deterministic(2.0).unwrap(),
            &DistributionSpec::deterministic(1.0).unwrap(),
            50,
            1,
            SimOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn deterministic_queue_never_waits() {
        let t = dd1();
        assert_eq!(t.len(), 50);
        for i in 0..t.len() {
            assert_eq!(t.waiting(i), 0.0);
            assert_eq!(t.system_time(i), 1.0);
            if i > 0 {
                assert_eq!(t.inter_departure(i), 2.0);
            }
        }
        assert_eq!(empirical_prob_arrival_sees_busy(&t).unwrap(), 0.0);
    }

    #[test]
    fn deterministic_queue_length_alternates() {
        let t = dd1();
        let path = queue_length_process(&t);
        assert_eq!(path.len(), 101);
        for (k, s) in path.iter().enumerate() {
            assert_eq!(s.length as usize, k % 2);
        }
        let fr = occupancy_fractions(&path, 2.0, 100.0, 3).unwrap();
        assert!((fr[1] - 0.5).abs() < 1e-12);
        assert!((fr[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_update_pulse() {
        let t = UpdateTrace::from_epochs(vec![0.5], vec![0.5], vec![2.0]).unwrap();
        let path = queue_length_process(&t);
        let got: Vec<_> = path.iter().map(|s| (s.epoch, s.length)).collect();
        assert_eq!(got, vec![(0.0, 0), (0.5, 1), (2.0, 0)]);
        assert_eq!(t.system_time(0), 1.5);
    }

    #[test]
    fn departure_first_on_ties() {
        // Arrival of update 2 coincides with departure of update 1.
        let t = UpdateTrace::from_epochs(vec![1.0, 2.0], vec![1.0, 2.0], vec![2.0, 3.0]).unwrap();
        let lengths: Vec<_> = queue_length_process(&t).iter().map(|s| s.length).collect();
        assert_eq!(lengths, vec![0, 1, 0, 1, 0]);
    }

    #[test]
    fn trace_invariants_rejected() {
        assert!(UpdateTrace::from_epochs(vec![1.0, 1.0], vec![1.0, 2.0], vec![2.0, 3.0]).is_err());
        assert!(UpdateTrace::from_epochs(vec![1.0, 1.5], vec![1.0, 1.5], vec![2.0, 3.0]).is_err());
        assert!(UpdateTrace::from_epochs(vec![1.0], vec![1.0], vec![1.0]).is_err());
    }

    #[test]
    fn unstable_requires_override() {
        let rates = QueueRates::new(1.0, 1.0).unwrap();
        assert!(matches!(
            simulate_mm1(rates, 100, 3, SimOptions::default()),
            Err(AudError::Unstable { .. })
        ));
        let t = simulate_mm1(rates, 100, 3, SimOptions { allow_unstable: true }).unwrap();
        assert!(!t.is_stationary());
        assert_eq!(t.len(), 100);
    }

    #[test]
    fn zero_updates_rejected() {
        let rates = QueueRates::new(0.5, 1.0).unwrap();
        assert!(simulate_mm1(rates, 0, 3, SimOptions::default()).is_err());
    }

    #[test]
    fn short_trace_busy_probability_errors() {
        let t = UpdateTrace::from_epochs(vec![1.0], vec![1.0], vec![2.0]).unwrap();
        assert!(matches!(
            empirical_prob_arrival_sees_busy(&t),
            Err(AudError::InsufficientData { .. })
        ));
    }

    #[test]
    fn case_split_and_lindley_hold() {
        let rates = QueueRates::new(0.7, 1.0).unwrap();
        let t = simulate_mm1(rates, 20_000, 11, SimOptions::default()).unwrap();
        t.check_invariants().unwrap();
        for i in 1..t.len() {
            let (x, tp, s, y) = (t.inter_arrival(i), t.system_time(i - 1), t.service(i), t.inter_departure(i));
            let expected = if x < tp { s } else { x + s - tp };
            assert!((y - expected).abs() <= 1e-9 * t.departures()[i], "Y case split at {i}");
            let w = (tp - x).max(0.0);
            assert!((t.waiting(i) - w).abs() <= 1e-9 * t.departures()[i], "Lindley at {i}");
            assert!((t.system_time(i) - t.waiting(i) - t.service(i)).abs() <= 1e-9 * t.departures()[i]);
        }
    }

    #[test]
    fn busy_time_equals_total_service() {
        let rates = QueueRates::new(0.6, 1.0).unwrap();
        let t = simulate_mm1(rates, 10_000, 5, SimOptions::default()).unwrap();
        let total: f64 = (0..t.len()).map(|i| t.service(i)).sum();
        assert!((t.busy_time() - total).abs() < 1e-6 * total);
    }

    #[test]
    fn csv_header_and_precision() {
        let t = dd1();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "k,t_arrival,t_service_start,t_depart");
        let row: Vec<_> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "1");
        assert_eq!(row[1].parse::<f64>().unwrap(), 2.0);
        assert_eq!(row[3].parse::<f64>().unwrap(), 3.0);
        assert_eq!(text.lines().count(), 51);
    }

    #[test]
    fn stream_matches_stored_trace() {
        let rates = QueueRates::new(0.5, 1.0).unwrap();
        let t = simulate_mm1(rates, 1000, 8, SimOptions::default()).unwrap();
        let run = QueueRun::mm1(rates, 8, SimOptions::default()).unwrap();
        for (i, u) in run.take(1000).enumerate() {
            assert_eq!(u.arrival, t.arrivals()[i]);
            assert_eq!(u.departure, t.departures()[i]);
            assert_eq!(u.system_time(), t.system_time(i));
        }
    }

    #[test]
    fn stride_grows_with_load() {
        assert_eq!(system_time_stride(0.5), 12);
        assert_eq!(system_time_stride(0.8), 144);
        assert!(system_time_stride(0.2) < system_time_stride(0.5));
        assert_eq!(system_time_stride(1.5), 1);
    }

    #[test]
    fn warmup_rule() {
        assert_eq!(default_warmup(1_000_000), 10_000);
        assert_eq!(default_warmup(50_000), 1000);
        assert_eq!(default_warmup(100), 50);
    }
}
