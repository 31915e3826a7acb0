//! Seeded Monte Carlo execution and per-cell aggregation.
//!
//! Seeds: `trial = mix(mix(master, snr_index), trial_index)`, the channel
//! draw uses `mix(trial, 0)` and every algorithm's initialization uses
//! `mix(trial, 1)`, with `mix(a, b) = splitmix64(a ^ splitmix64(b))`.
//! ChaCha8 is the generator throughout. Trials are independent of each
//! other and of the execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::scenario::ScenarioSpec;
use super::HarnessError;
use crate::algorithms::{self, IterationTrace, Variant};
use crate::channel::draw_channel_set;
use crate::network::interference_leakage_fraction;

/// One step of the splitmix64 generator, used as a 64-bit mixing function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index))
}

pub fn trial_seed(master: u64, snr_index: usize, trial_index: usize) -> u64 {
    derive_seed(derive_seed(master, snr_index as u64), trial_index as u64)
}

/// Outcome of one algorithm on one channel realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmRun {
    pub sum_rate: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Final per-user count of streams with positive power.
    pub effective_streams: Vec<usize>,
    pub degenerate_streams: usize,
    /// Interference-to-signal power ratio after the final receive filters.
    pub leakage: f64,
    #[serde(skip)]
    pub trace: Option<IterationTrace>,
}

impl AlgorithmRun {
    pub fn mean_effective_streams(&self) -> f64 {
        let n = self.effective_streams.len().max(1);
        self.effective_streams.iter().sum::<usize>() as f64 / n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialEntry {
    pub variant: Variant,
    /// `Err` holds the numerical failure message.
    pub outcome: Result<AlgorithmRun, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub snr_index: usize,
    pub trial_index: usize,
    pub seed: u64,
    pub entries: Vec<TrialEntry>,
}

impl TrialResult {
    pub fn get(&self, variant: Variant) -> Option<&Result<AlgorithmRun, String>> {
        self.entries.iter().find(|e| e.variant == variant).map(|e| &e.outcome)
    }
}

/// Runs every requested algorithm on one shared channel draw.
pub fn run_trial(
    spec: &ScenarioSpec,
    snr_index: usize,
    trial_index: usize,
    keep_traces: bool,
) -> Result<TrialResult, HarnessError> {
    let snr_db = *spec
        .snr_grid_db
        .get(snr_index)
        .ok_or_else(|| HarnessError::InvalidArgument(format!("snr index {snr_index} out of range")))?;
    let seed = trial_seed(spec.seed, snr_index, trial_index);
    let config = spec.network_at(snr_db)?;
    let params = spec.channel_params()?;
    let channels = draw_channel_set(&config, &params, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 0)))?;
    let init_seed = derive_seed(seed, 1);

    let entries = spec
        .algorithms
        .iter()
        .map(|&variant| {
            let settings = spec.settings.with_variant(variant);
            let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
            let outcome = algorithms::run(&channels, &config, &settings, &mut rng)
                .and_then(|out| {
                    let leakage = interference_leakage_fraction(&channels, &out.tx, &out.rx, &config)?;
                    Ok(AlgorithmRun {
                        sum_rate: out.trace.final_sum_rate().unwrap_or(0.0),
                        converged: out.trace.converged,
                        iterations: out.trace.iterations_used,
                        effective_streams: out.tx.iter().map(|t| t.effective_streams()).collect(),
                        degenerate_streams: out.trace.degenerate_streams,
                        leakage,
                        trace: keep_traces.then_some(out.trace),
                    })
                })
                .map_err(|e| e.to_string());
            TrialEntry { variant, outcome }
        })
        .collect();
    Ok(TrialResult {
        snr_index,
        trial_index,
        seed,
        entries,
    })
}

/// Aggregates for one (SNR, algorithm) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub snr_db: f64,
    pub algorithm: Variant,
    /// Absent when every trial failed.
    pub mean_sum_rate: Option<f64>,
    pub std_err: Option<f64>,
    pub convergence_fraction: f64,
    pub mean_iterations: Option<f64>,
    pub mean_effective_streams: Option<f64>,
    pub trials: usize,
    pub failures: usize,
    /// Trials that ran to the iteration cap without converging.
    pub nonconverged: usize,
}

impl CellSummary {
    pub fn failure_fraction(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }

    pub fn nonconverged_fraction(&self) -> f64 {
        self.nonconverged as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    /// Ordered by SNR, then by the scenario's algorithm order.
    pub cells: Vec<CellSummary>,
}

impl SweepResult {
    pub fn cell(&self, snr_db: f64, variant: Variant) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.algorithm == variant && (c.snr_db - snr_db).abs() < 1e-9)
    }

    /// True when more than half the trials failed in some cell.
    pub fn failure_threshold_exceeded(&self) -> bool {
        self.cells.iter().any(|c| 2 * c.failures > c.trials)
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub result: SweepResult,
    /// Per-trial results ordered by (snr index, trial index).
    pub trials: Vec<TrialResult>,
}

impl SweepOutput {
    /// Successful runs of `variant` at grid index `snr_index`.
    pub fn runs(&self, snr_index: usize, variant: Variant) -> impl Iterator<Item = &AlgorithmRun> {
        self.trials
            .iter()
            .filter(move |t| t.snr_index == snr_index)
            .filter_map(move |t| t.get(variant).and_then(|r| r.as_ref().ok()))
    }
}

/// Sample mean and standard error `s/√n`; the error is 0 for a single value.
pub fn summarize(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((mean, (var / n as f64).sqrt()))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-cell summaries of a set of trial results.
pub fn aggregate(spec: &ScenarioSpec, trials: &[TrialResult]) -> SweepResult {
    let mut cells = Vec::with_capacity(spec.snr_grid_db.len() * spec.algorithms.len());
    for (snr_index, &snr_db) in spec.snr_grid_db.iter().enumerate() {
        for &variant in &spec.algorithms {
            let outcomes: Vec<&Result<AlgorithmRun, String>> = trials
                .iter()
                .filter(|t| t.snr_index == snr_index)
                .filter_map(|t| t.get(variant))
                .collect();
            let ok: Vec<&AlgorithmRun> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
            let rates: Vec<f64> = ok.iter().map(|r| r.sum_rate).collect();
            let stats = summarize(&rates);
            let converged = ok.iter().filter(|r| r.converged).count();
            cells.push(CellSummary {
                snr_db,
                algorithm: variant,
                mean_sum_rate: stats.map(|s| s.0),
                std_err: stats.map(|s| s.1),
                convergence_fraction: converged as f64 / outcomes.len().max(1) as f64,
                mean_iterations: mean(ok.iter().map(|r| r.iterations as f64)),
                mean_effective_streams: mean(ok.iter().map(|r| r.mean_effective_streams())),
                trials: outcomes.len(),
                failures: outcomes.len() - ok.len(),
                nonconverged: ok.len() - converged,
            });
        }
    }
    SweepResult { cells }
}

/// Runs the full grid on `jobs` worker threads (`None`: rayon's default).
pub fn ergodic_sweep(spec: &ScenarioSpec, jobs: Option<usize>, keep_traces: bool) -> Result<SweepOutput, HarnessError> {
    spec.validate()?;
    let work: Vec<(usize, usize)> = (0..spec.snr_grid_db.len())
        .flat_map(|s| (0..spec.trials).map(move |t| (s, t)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(HarnessError::InvalidArgument("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    // indexed collect keeps (snr, trial) order whatever the scheduling
    let trials: Vec<TrialResult> = pool.install(|| {
        work.par_iter()
            .map(|&(s, t)| run_trial(spec, s, t, keep_traces))
            .collect::<Result<_, _>>()
    })?;
    let result = aggregate(spec, &trials);
    Ok(SweepOutput { result, trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ScenarioSpec {
        ScenarioSpec {
            snr_grid_db: vec![0.0, 20.0],
            trials: 3,
            seed: 42,
            ..ScenarioSpec::symmetric(2, 2, 2)
        }
    }

    fn run_with_rate(rate: f64) -> Result<AlgorithmRun, String> {
        Ok(AlgorithmRun {
            sum_rate: rate,
            converged: true,
            iterations: 3,
            effective_streams: vec![1, 2],
            degenerate_streams: 0,
            leakage: 0.0,
            trace: None,
        })
    }

    #[test]
    fn splitmix_reference_values() {
        // first outputs of the reference splitmix64 generator seeded with 0
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
        assert_ne!(trial_seed(1, 0, 1), trial_seed(1, 1, 0));
    }

    #[test]
    fn summarize_examples() {
        assert_eq!(summarize(&[4.0, 6.0]), Some((5.0, 1.0)));
        assert_eq!(summarize(&[3.5]), Some((3.5, 0.0)));
        assert_eq!(summarize(&[]), None);
    }

    #[test]
    fn trial_is_deterministic() {
        let spec = tiny_spec();
        let a = run_trial(&spec, 1, 2, true).unwrap();
        let b = run_trial(&spec, 1, 2, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.entries.len(), 4);
    }

    #[test]
    fn single_algorithm_single_entry() {
        let spec = ScenarioSpec {
            algorithms: vec![Variant::Reconfigurable],
            ..tiny_spec()
        };
        let t = run_trial(&spec, 0, 0, false).unwrap();
        assert_eq!(t.entries.len(), 1);
        assert_eq!(t.entries[0].variant, Variant::Reconfigurable);
    }

    #[test]
    fn zero_alpha_myopic_matches() {
        let spec = ScenarioSpec {
            alpha: 0.0,
            algorithms: vec![Variant::Reconfigurable, Variant::Myopic],
            ..tiny_spec()
        };
        for trial in 0..3 {
            let t = run_trial(&spec, 1, trial, true).unwrap();
            let a = t.get(Variant::Reconfigurable).unwrap().as_ref().unwrap();
            let b = t.get(Variant::Myopic).unwrap().as_ref().unwrap();
            assert_eq!(a.trace.as_ref().unwrap().records, b.trace.as_ref().unwrap().records);
        }
    }

    #[test]
    fn sweep_independent_of_jobs() {
        let spec = tiny_spec();
        let one = ergodic_sweep(&spec, Some(1), false).unwrap();
        let two = ergodic_sweep(&spec, Some(2), false).unwrap();
        assert_eq!(one.result, two.result);
        assert_eq!(one.result.cells.len(), 8);
        for c in &one.result.cells {
            let total = c.convergence_fraction + c.failure_fraction() + c.nonconverged_fraction();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(c.mean_sum_rate.unwrap() >= 0.0);
        }
        assert!(ergodic_sweep(&spec, Some(0), false).is_err());
    }

    #[test]
    fn aggregate_counts_failures() {
        let spec = ScenarioSpec {
            snr_grid_db: vec![10.0],
            algorithms: vec![Variant::Myopic],
            ..tiny_spec()
        };
        let trial = |i, outcome| TrialResult {
            snr_index: 0,
            trial_index: i,
            seed: 0,
            entries: vec![TrialEntry {
                variant: Variant::Myopic,
                outcome,
            }],
        };
        let trials = vec![
            trial(0, run_with_rate(4.0)),
            trial(1, Err("boom".into())),
            trial(2, run_with_rate(6.0)),
        ];
        let result = aggregate(&spec, &trials);
        let c = &result.cells[0];
        assert_eq!((c.trials, c.failures), (3, 1));
        assert_eq!(c.mean_sum_rate, Some(5.0));
        assert_eq!(c.std_err, Some(1.0));
        assert_eq!(c.mean_effective_streams, Some(1.5));
        assert!((c.convergence_fraction - 2.0 / 3.0).abs() < 1e-15);
        assert!(!result.failure_threshold_exceeded());

        let all_failed = vec![trial(0, Err("a".into())), trial(1, Err("b".into()))];
        let result = aggregate(&spec, &all_failed);
        assert_eq!(result.cells[0].mean_sum_rate, None);
        assert!(result.failure_threshold_exceeded());
    }
}
