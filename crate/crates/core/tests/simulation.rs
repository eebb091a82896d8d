//! Long M/M/1 runs checked against closed-form oracles.

use aud_lab::analytic::{avg_aud, cross_moment_ty, mean_system_time, prob_busy_on_arrival, system_time_rate};
use aud_lab::decision::{aoi_path, decisions, generate_decisions, time_average_aoi, DecisionProcess};
use aud_lab::dist::{decision_stream_id, SeededStream};
use aud_lab::experiment::measure::{cross_moment_estimate, occupancy_estimates, thinned_system_times, SteadyWindow};
use aud_lab::queue::{
    default_warmup, empirical_prob_arrival_sees_busy, simulate_mm1, system_time_stride, QueueRates, SimOptions,
    UpdateTrace,
};
use aud_lab::stats::{ks_exponential, ks_test, uniformity_offsets};

const N: usize = 1_000_000;

fn run(lambda: f64, mu: f64, seed: u64) -> UpdateTrace {
    simulate_mm1(QueueRates::new(lambda, mu).unwrap(), N, seed, SimOptions::default()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn system_and_interdeparture_means() {
    let t = run(0.5, 1.0, 101);
    let w = default_warmup(N);
    let mean_t = (w..N).map(|i| t.system_time(i)).sum::<f64>() / (N - w) as f64;
    let mean_y = (w..N).map(|i| t.inter_departure(i)).sum::<f64>() / (N - w) as f64;
    let rates = QueueRates::new(0.5, 1.0).unwrap();
    assert!(rel(mean_t, mean_system_time(rates).unwrap()) < 0.01, "E[T] = {mean_t}");
    assert!(rel(mean_y, 2.0) < 0.01, "E[Y] = {mean_y}");
}

#[test]
fn idle_fraction_matches_pi0() {
    let t = run(0.5, 1.0, 102);
    let w = SteadyWindow::new(&t, default_warmup(N)).unwrap();
    let occ = occupancy_estimates(&t, &w, 0, 100, 0.99).unwrap();
    assert!((occ[0].mean - 0.5).abs() < 0.005, "pi0 = {}", occ[0].mean);
    // Long-run busy fraction equals rho.
    let busy = t.busy_time() / t.last_departure().unwrap();
    assert!((busy - 0.5).abs() < 0.005, "busy = {busy}");
}

#[test]
fn busy_on_arrival_probability() {
    for (lambda, seed) in [(0.5, 103), (0.8, 104)] {
        let t = run(lambda, 1.0, seed);
        let p = empirical_prob_arrival_sees_busy(&t).unwrap();
        let rho = prob_busy_on_arrival(QueueRates::new(lambda, 1.0).unwrap()).unwrap();
        assert!((p - rho).abs() < 0.005, "lambda {lambda}: {p}");
    }
}

#[test]
fn cross_moment_within_two_percent() {
    let t = run(0.5, 1.0, 105);
    let est = cross_moment_estimate(&t, default_warmup(N), 100, 0.99).unwrap();
    let exact = cross_moment_ty(QueueRates::new(0.5, 1.0).unwrap()).unwrap();
    assert_eq!(exact, 3.0);
    assert!(rel(est.mean, exact) < 0.02, "E[TY] = {}", est.mean);
}

#[test]
fn system_time_is_exponential() {
    let rates = QueueRates::new(0.5, 1.0).unwrap();
    let t = run(0.5, 1.0, 106);
    let xs = thinned_system_times(&t, default_warmup(N), system_time_stride(rates.rho()));
    let ks = ks_exponential(&xs, system_time_rate(rates).unwrap()).unwrap();
    assert!(!ks.reject_at_001, "{ks:?}");
    // Doubling the oracle rate must be caught.
    let wrong = ks_exponential(&xs, 2.0 * system_time_rate(rates).unwrap()).unwrap();
    assert!(wrong.reject_at_001);
}

#[test]
fn poisson_decisions_count_and_gaps() {
    let t = run(0.5, 1.0, 107);
    let horizon = t.last_departure().unwrap();
    let recs = generate_decisions(&t, 1.0, horizon, SeededStream::new(107, decision_stream_id(1.0))).unwrap();
    let expected = horizon;
    assert!(rel(recs.len() as f64, expected) < 0.01, "{} decisions over {horizon}", recs.len());
    let gaps: Vec<f64> = recs.windows(2).take(200_000).map(|w| w[1].tau - w[0].tau).collect();
    assert!(!ks_exponential(&gaps, 1.0).unwrap().reject_at_001);
}

#[test]
fn decision_offsets_uniform_within_interval() {
    let t = run(0.5, 1.0, 108);
    let horizon = t.last_departure().unwrap();
    let recs = generate_decisions(&t, 1.0, horizon, SeededStream::new(108, decision_stream_id(1.0))).unwrap();
    let ks = uniformity_offsets(&recs, &t).unwrap();
    assert!(!ks.reject_at_001, "{ks:?}");
    assert!(ks.n > 1_900_000);
}

#[test]
fn aoi_time_average_matches_closed_form() {
    let t = run(0.5, 1.0, 109);
    let p = aoi_path(&t).unwrap();
    let from = t.departures()[default_warmup(N) - 1];
    let avg = time_average_aoi(&p, from, p.end()).unwrap();
    let exact = avg_aud(QueueRates::new(0.5, 1.0).unwrap()).unwrap();
    assert!(rel(avg, exact) < 0.01, "time-average AoI {avg}");
}

#[test]
fn aud_mean_matches_closed_form_at_each_rate() {
    let t = run(0.5, 1.0, 110);
    let from = t.departures()[default_warmup(N) - 1];
    let horizon = t.last_departure().unwrap();
    for nu in [0.1, 1.0, 10.0] {
        let process = DecisionProcess::Poisson { rate: nu };
        let (mut sum, mut n) = (0.0, 0usize);
        for d in decisions(&t, process, horizon, process.stream(110)).unwrap() {
            if d.tau >= from {
                sum += d.aud.unwrap();
                n += 1;
            }
        }
        assert!(rel(sum / n as f64, 3.5) < 0.01, "nu {nu}: {}", sum / n as f64);
    }
}

#[test]
fn interdeparture_ks_against_lambda() {
    let t = run(0.8, 1.0, 111);
    let w = default_warmup(N);
    let ys: Vec<f64> = (w..w + 100_000).map(|i| t.inter_departure(i)).collect();
    let ks = ks_test(&ys, |x| 1.0 - (-0.8 * x).exp()).unwrap();
    assert!(!ks.reject_at_001, "{ks:?}");
}
