//! Oracle checks runnable from the binary without the test harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::ScenarioSpec;
use super::sweep::ergodic_sweep;
use crate::algorithms::{random_unit_columns, run, AlgorithmSettings, Variant};
use crate::channel::{draw_channel_set, draw_scattered, ChannelParams};
use crate::network::NetworkConfig;
use crate::numerics::{
    frobenius, hermitian_inv_sqrt, svd_thin, water_fill, waterfill_objective, ComplexMatrix,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

/// Best objective over all allocations on a grid of `steps` per unit budget,
/// for two or three gains.
fn grid_best(gains: &[f64], budget: f64, steps: usize) -> f64 {
    let h = budget / steps as f64;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=steps {
        let p0 = i as f64 * h;
        if gains.len() == 2 {
            best = best.max(waterfill_objective(gains, &[p0, budget - p0]));
            continue;
        }
        for j in 0..=(steps - i) {
            let p1 = j as f64 * h;
            best = best.max(waterfill_objective(gains, &[p0, p1, (budget - p0 - p1).max(0.0)]));
        }
    }
    best
}

fn waterfill_oracle(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst = 0.0f64;
    for case in 0..40 {
        let len = 2 + case % 2;
        let gains: Vec<f64> = (0..len).map(|_| rng.random_range(0.01..10.0)).collect();
        let budget = rng.random_range(0.1..10.0);
        let wf = water_fill(&gains, budget).expect("valid input");
        let gap = grid_best(&gains, budget, 200) - waterfill_objective(&gains, &wf.powers);
        worst = worst.max(gap);
    }
    check("water_fill vs grid search", worst <= 1e-9, format!("largest grid advantage {worst:.2e}"))
}

fn inv_sqrt_identity(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a: ComplexMatrix<f64> = draw_scattered(4, 4, rng);
        let m = &a * a.adjoint() + ComplexMatrix::identity(4, 4);
        let r = hermitian_inv_sqrt(&m).expect("positive definite");
        worst = worst.max(frobenius(&(&r * &m * &r - ComplexMatrix::identity(4, 4))));
    }
    check("R M R = I", worst <= 1e-9, format!("max residual {worst:.2e}"))
}

fn single_user_capacity(rng: &mut ChaCha8Rng) -> CheckResult {
    let config = NetworkConfig::symmetric(1, 4, 4, 10.0).expect("valid");
    let mut worst = 0.0f64;
    for trial in 0..5 {
        let params = ChannelParams::with_default_angles(1.0, if trial % 2 == 0 { 0.0 } else { 10.0 }).expect("valid");
        let channels = draw_channel_set(&config, &params, rng).expect("valid");
        let gains: Vec<f64> = svd_thin(channels.get(0, 0))
            .expect("finite")
            .singular_values
            .iter()
            .map(|s| s * s)
            .collect();
        let wf = water_fill(&gains, config.power).expect("valid");
        let capacity = waterfill_objective(&gains, &wf.powers);
        let out = run(&channels, &config, &AlgorithmSettings::default(), rng);
        let gap = match out {
            Ok(o) => (o.trace.final_sum_rate().unwrap_or(0.0) - capacity).abs(),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(gap);
    }
    check("single-user capacity", worst <= 1e-6, format!("max gap {worst:.2e} bits"))
}

fn zero_alpha_parity(rng: &mut ChaCha8Rng) -> CheckResult {
    let config = NetworkConfig::symmetric(3, 4, 4, 100.0).expect("valid");
    let params = ChannelParams::with_default_angles(0.0, 0.0).expect("valid");
    let channels = draw_channel_set(&config, &params, rng).expect("valid");
    let seed: u64 = rng.random();
    let base = AlgorithmSettings::default();
    let a = run(&channels, &config, &base, &mut ChaCha8Rng::seed_from_u64(seed));
    let b = run(&channels, &config, &base.with_variant(Variant::Myopic), &mut ChaCha8Rng::seed_from_u64(seed));
    let same = matches!((&a, &b), (Ok(x), Ok(y)) if x.trace.records == y.trace.records);
    check("myopic = reconfigurable at alpha 0", same, String::new())
}

fn unit_columns(rng: &mut ChaCha8Rng) -> CheckResult {
    let m: ComplexMatrix<f64> = random_unit_columns(4, 3, rng);
    let worst = crate::numerics::column_norms(&m)
        .iter()
        .map(|n| (n - 1.0).abs())
        .fold(0.0, f64::max);
    check("random unit columns", worst <= 1e-12, format!("max deviation {worst:.2e}"))
}

fn sweep_determinism() -> CheckResult {
    let spec = ScenarioSpec {
        snr_grid_db: vec![0.0, 20.0],
        trials: 4,
        ..ScenarioSpec::symmetric(2, 2, 2)
    };
    let same = match (ergodic_sweep(&spec, Some(1), false), ergodic_sweep(&spec, Some(2), false)) {
        (Ok(a), Ok(b)) => a.result == b.result,
        _ => false,
    };
    check("sweep independent of jobs", same, String::new())
}

/// Runs every check with a fixed seed.
pub fn run_selftest() -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f_7e57);
    vec![
        waterfill_oracle(&mut rng),
        inv_sqrt_identity(&mut rng),
        unit_columns(&mut rng),
        single_user_capacity(&mut rng),
        zero_alpha_parity(&mut rng),
        sweep_determinism(),
    ]
}
