use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reconf_precoding::harness::{
    self, emit_results, parse_scenario, run_trial, selftest::run_selftest, trace_csv, RunInfo,
    SweepOutput,
};
use reconf_precoding::Variant;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

/// Precoder design simulations for K-user MIMO interference networks.
#[derive(Debug, Parser)]
#[command(name = "reconf-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ergodic sum-rate sweep over the scenario's SNR grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write per-trial iteration traces.
        #[arg(long)]
        traces: bool,
    },
    /// Per-iteration traces for one channel realization at one grid SNR.
    Trace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// SNR in dB; must be a point of the scenario grid.
        #[arg(long, allow_hyphen_values = true)]
        snr: f64,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict to these algorithms (repeatable).
        #[arg(long = "algorithm")]
        algorithms: Vec<Variant>,
    },
    /// Runs the built-in oracle checks.
    Selftest,
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn print_summary(output: &SweepOutput) {
    for c in &output.result.cells {
        let rate = c
            .mean_sum_rate
            .map(|r| format!("{r:.3}"))
            .unwrap_or_else(|| "n/a".into());
        eprintln!(
            "{:>6} dB  {:<15} {:>9} bps/Hz  converged {:>5.1}%  failures {}",
            c.snr_db,
            c.algorithm.name(),
            rate,
            100.0 * c.convergence_fraction,
            c.failures
        );
    }
}

fn sweep(config: PathBuf, out: PathBuf, seed: Option<u64>, jobs: Option<usize>, traces: bool) -> ExitCode {
    let mut spec = match parse_scenario(&config) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let output = match harness::ergodic_sweep(&spec, jobs, traces) {
        Ok(o) => o,
        Err(e @ harness::HarnessError::InvalidArgument(_)) => return fail(EXIT_USAGE, e),
        Err(e) => return fail(EXIT_NUMERICAL, e),
    };
    let info = RunInfo { command: "sweep", jobs };
    if let Err(e) = emit_results(&output, &spec, &out, &info) {
        return fail(EXIT_USAGE, e);
    }
    print_summary(&output);
    if output.result.failure_threshold_exceeded() {
        return fail(EXIT_NUMERICAL, "more than half of the trials failed in at least one cell");
    }
    ExitCode::SUCCESS
}

fn trace(
    config: PathBuf,
    out: PathBuf,
    snr: f64,
    trial: usize,
    seed: Option<u64>,
    algorithms: Vec<Variant>,
) -> ExitCode {
    let mut spec = match parse_scenario(&config) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    if !algorithms.is_empty() {
        spec.algorithms = algorithms;
    }
    let Some(snr_index) = spec.snr_index(snr) else {
        return fail(EXIT_USAGE, format!("{snr} dB is not on the scenario grid {:?}", spec.snr_grid_db));
    };
    let result = match run_trial(&spec, snr_index, trial, true) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    if let Err(e) = std::fs::create_dir_all(&out) {
        return fail(EXIT_USAGE, format!("{}: {e}", out.display()));
    }
    let mut failed = 0;
    for entry in &result.entries {
        match &entry.outcome {
            Ok(run) => {
                let path = out.join(format!("trace_{}.csv", entry.variant));
                let csv = trace_csv(run.trace.as_ref().expect("traces kept"), spec.users);
                if let Err(e) = std::fs::write(&path, csv) {
                    return fail(EXIT_USAGE, format!("{}: {e}", path.display()));
                }
                eprintln!(
                    "{:<15} {:.4} bps/Hz after {} iterations ({})",
                    entry.variant.name(),
                    run.sum_rate,
                    run.iterations,
                    if run.converged { "converged" } else { "iteration cap" }
                );
            }
            Err(e) => {
                failed += 1;
                eprintln!("{:<15} failed: {e}", entry.variant.name());
            }
        }
    }
    if 2 * failed > result.entries.len() {
        return fail(EXIT_NUMERICAL, "more than half of the algorithms failed");
    }
    ExitCode::SUCCESS
}

fn selftest() -> ExitCode {
    let results = run_selftest();
    for r in &results {
        println!("{} {} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    if results.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NUMERICAL)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Sweep {
            config,
            out,
            seed,
            jobs,
            traces,
        } => sweep(config, out, seed, jobs, traces),
        Command::Trace {
            config,
            out,
            snr,
            trial,
            seed,
            algorithms,
        } => trace(config, out, snr, trial, seed, algorithms),
        Command::Selftest => selftest(),
    }
}
