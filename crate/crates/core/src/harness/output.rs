//! CSV and manifest writers.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::scenario::ScenarioSpec;
use super::sweep::{SweepOutput, SweepResult};
use super::HarnessError;
use crate::algorithms::IterationTrace;

pub const SWEEP_HEADER: &str = "snr_db,algorithm,mean_sum_rate_bps_hz,std_err,convergence_fraction,\
mean_iterations,mean_effective_streams,trials,failures";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Sweep table; absent statistics are empty fields.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for c in &result.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            c.snr_db,
            c.algorithm,
            opt(c.mean_sum_rate),
            opt(c.std_err),
            c.convergence_fraction,
            opt(c.mean_iterations),
            opt(c.mean_effective_streams),
            c.trials,
            c.failures
        );
    }
    out
}

/// Per-iteration trace table with `mu_k`, `effective_streams_k` per user.
pub fn trace_csv(trace: &IterationTrace, users: usize) -> String {
    let mut out = String::from("iteration,sum_rate,mse_objective");
    for k in 0..users {
        let _ = write!(out, ",mu_{k}");
    }
    for k in 0..users {
        let _ = write!(out, ",effective_streams_{k}");
    }
    out.push('\n');
    for (i, r) in trace.records.iter().enumerate() {
        let _ = write!(out, "{},{},{}", i + 1, r.sum_rate, r.mse_objective);
        for mu in &r.mu {
            let _ = write!(out, ",{mu}");
        }
        for d in &r.effective_streams {
            let _ = write!(out, ",{d}");
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)
}

fn create_dir(path: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    jobs: Option<usize>,
    timestamp_unix: u64,
    scenario: &'a ScenarioSpec,
    failure_threshold_exceeded: bool,
    files: &'a [String],
}

/// Run metadata written next to the data files.
pub struct RunInfo<'a> {
    pub command: &'a str,
    pub jobs: Option<usize>,
}

fn write_manifest(
    out_dir: &Path,
    spec: &ScenarioSpec,
    info: &RunInfo<'_>,
    threshold_exceeded: bool,
    files: &[String],
) -> Result<PathBuf, HarnessError> {
    let timestamp_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: info.command,
        seed: spec.seed,
        jobs: info.jobs,
        timestamp_unix,
        scenario: spec,
        failure_threshold_exceeded: threshold_exceeded,
        files,
    };
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&path, &(text + "\n"))?;
    Ok(path)
}

/// Writes `sweep.csv`, `traces/*.csv` for every kept trace, and
/// `manifest.json` into `out_dir`. Returns the paths written.
pub fn emit_results(
    output: &SweepOutput,
    spec: &ScenarioSpec,
    out_dir: &Path,
    info: &RunInfo<'_>,
) -> Result<Vec<PathBuf>, HarnessError> {
    create_dir(out_dir)?;
    let mut written = Vec::new();
    let sweep_path = out_dir.join("sweep.csv");
    write_file(&sweep_path, &sweep_csv(&output.result))?;
    written.push(sweep_path);

    let mut trace_dir_made = false;
    for trial in &output.trials {
        for entry in &trial.entries {
            let Some(trace) = entry.outcome.as_ref().ok().and_then(|r| r.trace.as_ref()) else {
                continue;
            };
            let dir = out_dir.join("traces");
            if !trace_dir_made {
                create_dir(&dir)?;
                trace_dir_made = true;
            }
            let path = dir.join(format!(
                "{}_snr{}_trial{}.csv",
                entry.variant, trial.snr_index, trial.trial_index
            ));
            write_file(&path, &trace_csv(trace, spec.users))?;
            written.push(path);
        }
    }
    let names: Vec<String> = written
        .iter()
        .filter_map(|p| p.strip_prefix(out_dir).ok())
        .map(|p| p.display().to_string())
        .collect();
    written.push(write_manifest(
        out_dir,
        spec,
        info,
        output.result.failure_threshold_exceeded(),
        &names,
    )?);
    Ok(written)
}
