use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "lambda,mu,nu,analytic_aud,empirical_aud,ci_half_width,n_decisions,n_undefined_decisions,ks_T_pvalue,ks_Y_pvalue,status";

fn aud_lab(args: &[&str], cfg: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_aud-lab"));
    cmd.args(args);
    if let Some(p) = cfg {
        cmd.arg("--config").arg(p);
    }
    cmd.output().unwrap()
}

#[test]
fn analytic_sweep_to_stdout() {
    let out = aud_lab(&["sweep", "--lambda", "0.5,1.5", "--mu", "1", "--nu", "1", "--analytic-only"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], HEADER);
    assert_eq!(lines[1], "0.5,1,1,3.5,,,,,,,ok");
    assert!(lines[2].starts_with("1.5,1,1,,"));
    assert!(lines[2].ends_with(",unstable"));
}

#[test]
fn simulated_sweep_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = aud_lab(
        &["sweep", "--lambda", "0.5", "--mu", "1", "--nu", "1", "--updates", "20000", "--out", csv.to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 11);
    let emp: f64 = row[4].parse().unwrap();
    assert!((emp - 3.5).abs() < 0.35, "{emp}");
    assert_eq!(row[10], "ok");
    let manifest = std::fs::read_to_string(dir.path().join("sweep.manifest.jsonl")).unwrap();
    let kinds: Vec<String> = manifest
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["kind"].as_str().unwrap().to_owned())
        .collect();
    assert_eq!(kinds, ["run", "config", "summary", "timing"]);
}

#[test]
fn periodic_decisions_flag_runs() {
    let out = aud_lab(
        &["sweep", "--lambda", "0.5", "--mu", "1", "--nu", "1", "--updates", "20000", "--periodic-decisions"],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("0.5,1,1,3.5,"));
}

#[test]
fn nu_invariance_reports_every_rate() {
    let out = aud_lab(&["nu-invariance", "--nu", "0.5,2", "--updates", "20000"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn validate_passes_on_a_correct_oracle() {
    let out = aud_lab(&["validate", "--updates", "200000"], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("check,value,expected,tolerance,outcome,low_power\n"));
    assert!(!text.contains(",fail,"));
}

#[test]
fn validate_catches_a_wrong_oracle_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "# doubled rate\noracle_rate_factor = 2\nupdates = 200000\n").unwrap();
    let out = aud_lab(&["validate"], Some(&cfg));
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("ks_system_time,")).unwrap();
    assert!(line.contains(",fail,"), "{line}");
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "no_such_key = 3\n").unwrap();
    assert_eq!(aud_lab(&["sweep"], Some(&cfg)).status.code(), Some(2));
    assert_eq!(aud_lab(&["sweep", "--mu", "-1", "--analytic-only"], None).status.code(), Some(2));
}
