//! Scenario parsing, seeded Monte Carlo sweeps, slope fits, file output and
//! the built-in self test. Everything here is concrete `f64`.

pub mod output;
pub mod scenario;
pub mod selftest;
pub mod slope;
pub mod sweep;

use std::path::PathBuf;

use thiserror::Error;

pub use output::{emit_results, sweep_csv, trace_csv, RunInfo, SWEEP_HEADER};
pub use scenario::{parse_scenario, parse_scenario_str, ScenarioError, ScenarioSpec};
pub use slope::{estimate_multiplexing_gain, least_squares_slope, log2_snr};
pub use sweep::{
    aggregate, derive_seed, ergodic_sweep, run_trial, summarize, trial_seed, AlgorithmRun, CellSummary,
    SweepOutput, SweepResult, TrialEntry, TrialResult,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
