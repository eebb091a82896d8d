use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use aud_lab::experiment::output::{create_csv, manifest_path, write_manifest};
use aud_lab::experiment::{run_nu_invariance, run_sweep, run_validation, ExperimentConfig};
use aud_lab::Result;

#[derive(Parser)]
#[command(name = "aud-lab", version, about = "Age upon decisions in FCFS update-and-decide queues")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep (lambda, mu) grids and write one CSV row per (lambda, mu, nu).
    Sweep(Flags),
    /// Compare decision rates on one shared trace.
    NuInvariance(Flags),
    /// Check a simulated trace against every closed form.
    Validate(Flags),
}

#[derive(Args)]
struct Flags {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Arrival rate: value, comma list or start:stop:step.
    #[arg(long)]
    lambda: Option<String>,
    /// Service rate: value, comma list or start:stop:step.
    #[arg(long)]
    mu: Option<String>,
    /// Decision rates, comma separated.
    #[arg(long)]
    nu: Option<String>,
    /// Updates simulated per grid point.
    #[arg(long)]
    updates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; the manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    confidence: Option<f64>,
    /// Simulate grid points with utilization at or above 1.
    #[arg(long)]
    allow_unstable: bool,
    /// Use evenly spaced decisions instead of Poisson ones.
    #[arg(long)]
    periodic_decisions: bool,
    /// Skip simulation and emit closed-form values only.
    #[arg(long)]
    analytic_only: bool,
}

impl Flags {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_text(&std::fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        let pairs = [
            ("lambda", self.lambda.clone()),
            ("mu", self.mu.clone()),
            ("nu", self.nu.clone()),
            ("updates", self.updates.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("confidence", self.confidence.map(|v| v.to_string())),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.output_path = Some(out.clone());
        }
        cfg.allow_unstable |= self.allow_unstable;
        cfg.periodic_decisions |= self.periodic_decisions;
        if self.analytic_only {
            cfg.simulate = false;
        }
        Ok(cfg)
    }
}

/// Writes CSV to the configured path (plus manifest) or to stdout.
fn emit(
    command: &str,
    cfg: &ExperimentConfig,
    summary: serde_json::Value,
    started: Instant,
    write_csv: impl Fn(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    match &cfg.output_path {
        Some(path) => {
            let mut file = create_csv(path)?;
            write_csv(&mut file)?;
            file.flush()?;
            write_manifest(&manifest_path(path), command, cfg, summary, started.elapsed())?;
            eprintln!("wrote {} and {}", path.display(), manifest_path(path).display());
        }
        None => write_csv(&mut io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let started = Instant::now();
    match cli.command {
        Command::Sweep(flags) => {
            let cfg = flags.config()?;
            if cfg.simulate && cfg.low_power() {
                eprintln!("warning: {} updates per point is below the steady-state minimum", cfg.n_updates);
            }
            let res = run_sweep(&cfg)?;
            let summary = json!({ "mode": cfg.sweep_mode(), "rows": res.rows.len() });
            emit("sweep", &cfg, summary, started, |w| res.write_csv(w))?;
            Ok(true)
        }
        Command::NuInvariance(flags) => {
            let cfg = flags.config()?;
            let res = run_nu_invariance(&cfg)?;
            let s = &res.summary;
            eprintln!(
                "lambda={} mu={} analytic={:?} max pairwise difference={:.6} all CIs overlap={}",
                s.lambda, s.mu, s.analytic_aud, s.max_pairwise_difference, s.all_overlap
            );
            let summary = serde_json::to_value(&res.summary)?;
            emit("nu-invariance", &cfg, summary, started, |w| res.sweep.write_csv(w))?;
            Ok(true)
        }
        Command::Validate(flags) => {
            let cfg = flags.config()?;
            let report = run_validation(&cfg)?;
            eprint!("{}", report.summary());
            let summary = json!({
                "passed": report.passed(),
                "low_power": report.low_power,
                "checks": report.checks.len(),
                "failed": report.failures().map(|c| c.name.clone()).collect::<Vec<_>>(),
            });
            emit("validate", &cfg, summary, started, |w| report.write_csv(w))?;
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
