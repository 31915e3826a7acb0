//! Iterative precoder/receiver designs over forward and reciprocal network
//! passes.
//!
//! * [`Variant::Reconfigurable`]: MMSE receive filters, MMSE-derived
//!   transmit subspaces in the reciprocal network, then a prewhitened SVD
//!   and waterfilling against the current interference-plus-noise
//!   covariance.
//! * [`Variant::Myopic`]: the same loop with the interference covariance
//!   replaced by the noise covariance in the waterfilling step.
//! * [`Variant::MaxSinr`] / [`Variant::MaxSinrGenie`]: per-stream SINR
//!   maximization with equal power, at an IA-feasible or at the full stream
//!   count.

mod max_sinr;
mod reconfigurable;

pub use max_sinr::{ia_feasible_streams, max_sinr_streams, run_max_sinr};
pub use reconfigurable::{
    forward_update, reverse_mmse_update, run_reconfigurable, wf_step, ReverseOutcome,
};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{draw_scattered, ChannelSet};
use crate::network::{NetworkConfig, NetworkError, RxState, TxState};
use crate::numerics::{frobenius, normalize_columns, ComplexMatrix, NumericsError};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Reconfigurable,
    Myopic,
    MaxSinr,
    MaxSinrGenie,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Reconfigurable,
        Variant::Myopic,
        Variant::MaxSinr,
        Variant::MaxSinrGenie,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Reconfigurable => "reconfigurable",
            Variant::Myopic => "myopic",
            Variant::MaxSinr => "max_sinr",
            Variant::MaxSinrGenie => "max_sinr_genie",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmSettings {
    pub variant: Variant,
    pub max_iterations: usize,
    /// Stop once the objective changes by less than this between iterations.
    pub convergence_tol: f64,
    /// Relative bracket width at which the μ bisection stops.
    pub bisection_tol: f64,
}

impl Default for AlgorithmSettings {
    fn default() -> Self {
        Self {
            variant: Variant::Reconfigurable,
            max_iterations: 1000,
            convergence_tol: 1e-4,
            bisection_tol: 1e-6,
        }
    }
}

impl AlgorithmSettings {
    pub fn with_variant(self, variant: Variant) -> Self {
        Self { variant, ..self }
    }

    pub fn validate(&self) -> Result<(), AlgorithmError> {
        if self.max_iterations == 0 {
            return Err(AlgorithmError::InvalidSettings("max_iterations must be >= 1".into()));
        }
        for (name, v) in [
            ("convergence_tol", self.convergence_tol),
            ("bisection_tol", self.bisection_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(AlgorithmError::InvalidSettings(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgorithmError {
    #[error("stream {stream} of user {user} has a zero filter direction")]
    DegenerateStream { user: usize, stream: usize },
    #[error("power-constraint bisection for user {user} failed to bracket at iteration {iteration}")]
    BisectionFailed { user: usize, iteration: usize },
    #[error("non-finite sum rate at iteration {0}")]
    NonFinite(usize),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("variant {0} is not handled by this routine")]
    WrongVariant(Variant),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub sum_rate: f64,
    /// Quantity the stopping rule watches: the sum rate for the
    /// reconfigurable variants, the summed per-stream SINR for Max-SINR.
    pub objective: f64,
    pub mse_objective: f64,
    /// Reciprocal-network Lagrange multipliers (zero for Max-SINR).
    pub mu: Vec<f64>,
    pub effective_streams: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    pub variant: Variant,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations_used: usize,
    /// Filter columns that collapsed to zero and were re-drawn at random.
    pub degenerate_streams: usize,
}

impl IterationTrace {
    fn new(variant: Variant) -> Self {
        Self {
            variant,
            records: Vec::new(),
            converged: false,
            iterations_used: 0,
            degenerate_streams: 0,
        }
    }

    pub fn final_sum_rate(&self) -> Option<f64> {
        self.records.last().map(|r| r.sum_rate)
    }

    pub fn final_effective_streams(&self) -> Option<&[usize]> {
        self.records.last().map(|r| r.effective_streams.as_slice())
    }

    /// Checks the stopping-rule invariants against the recorded objective.
    pub fn is_consistent(&self, settings: &AlgorithmSettings) -> bool {
        if self.iterations_used != self.records.len() || self.iterations_used > settings.max_iterations {
            return false;
        }
        let deltas: Vec<f64> = self
            .records
            .windows(2)
            .map(|w| (w[1].objective - w[0].objective).abs())
            .collect();
        if self.converged {
            // last delta below tolerance, every earlier one at or above it
            match deltas.split_last() {
                Some((last, rest)) => {
                    *last < settings.convergence_tol && rest.iter().all(|&d| d >= settings.convergence_tol)
                }
                None => false,
            }
        } else {
            deltas.iter().all(|&d| d >= settings.convergence_tol)
                && self.iterations_used == settings.max_iterations
        }
    }

    /// Whether the objective sequence should stop after the latest record.
    fn check_converged(&mut self, tol: f64) -> bool {
        let n = self.records.len();
        if n >= 2 && (self.records[n - 1].objective - self.records[n - 2].objective).abs() < tol {
            self.converged = true;
        }
        self.converged
    }
}

/// Final transmitter and receiver states with the iteration history.
#[derive(Debug, Clone)]
pub struct RunOutput<T: Real> {
    pub tx: Vec<TxState<T>>,
    pub rx: Vec<RxState<T>>,
    pub trace: IterationTrace,
}

/// Replacement policy for filter columns that collapse to zero.
///
/// Without a `Repair`, a degenerate column is an error.
pub struct Repair<'a> {
    pub rng: &'a mut dyn RngCore,
    pub replaced: usize,
}

impl<'a> Repair<'a> {
    pub fn new(rng: &'a mut dyn RngCore) -> Self {
        Self { rng, replaced: 0 }
    }
}

/// `n × d` matrix with i.i.d. complex Gaussian entries and unit-norm columns.
pub fn random_unit_columns<T: Real, R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> ComplexMatrix<T> {
    loop {
        let mut m: ComplexMatrix<T> = draw_scattered(n, d, rng);
        if normalize_columns(&mut m).is_empty() {
            return m;
        }
    }
}

/// A column direction `x = H v` is degenerate when it is zero up to
/// rounding relative to the channel scale.
fn is_degenerate<T: Real>(direction_norm: T, channel: &ComplexMatrix<T>) -> bool {
    let scale = frobenius(channel);
    !(direction_norm > T::lit(1e3) * T::eps() * scale) || !direction_norm.is_finite()
}

/// Normalizes the columns of `x`, treating the columns flagged in
/// `degenerate` (and any that fail to normalize) per the repair policy.
fn finish_columns<T: Real>(
    mut x: ComplexMatrix<T>,
    degenerate: &[bool],
    user: usize,
    repair: &mut Option<&mut Repair<'_>>,
) -> Result<ComplexMatrix<T>, AlgorithmError> {
    let failed = normalize_columns(&mut x);
    for stream in 0..x.ncols() {
        if degenerate[stream] || failed.contains(&stream) {
            match repair {
                Some(r) => {
                    let fresh: ComplexMatrix<T> = random_unit_columns(x.nrows(), 1, &mut *r.rng);
                    x.set_column(stream, &fresh.column(0));
                    r.replaced += 1;
                }
                None => return Err(AlgorithmError::DegenerateStream { user, stream }),
            }
        }
    }
    Ok(x)
}

/// Runs the variant named in `settings`.
pub fn run<T: Real, R: Rng>(
    channels: &ChannelSet<T>,
    config: &NetworkConfig<T>,
    settings: &AlgorithmSettings,
    rng: &mut R,
) -> Result<RunOutput<T>, AlgorithmError> {
    match settings.variant {
        Variant::Reconfigurable | Variant::Myopic => run_reconfigurable(channels, config, settings, rng),
        Variant::MaxSinr | Variant::MaxSinrGenie => run_max_sinr(channels, config, settings, rng),
    }
}
