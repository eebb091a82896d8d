//! Output files: CSV results next to a JSON-lines run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::json;

use super::config::ExperimentConfig;
use crate::error::Result;

/// `results.csv` -> `results.manifest.jsonl`.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("manifest.jsonl")
}

/// Writes the manifest: run identity, config echo, summary, then timings.
///
/// Everything except the final `timing` line is a pure function of the
/// config, so reruns produce identical lines apart from that one.
pub fn write_manifest(
    path: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    summary: serde_json::Value,
    elapsed: Duration,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let lines = [
        json!({
            "kind": "run",
            "command": command,
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
        }),
        json!({ "kind": "config", "config": cfg }),
        json!({ "kind": "summary", "summary": summary }),
        json!({ "kind": "timing", "elapsed_ms": elapsed.as_secs_f64() * 1e3 }),
    ];
    for line in &lines {
        serde_json::to_writer(&mut out, line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn create_csv(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}
