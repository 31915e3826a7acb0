use super::sweep::SweepResult;
use super::HarnessError;
use crate::algorithms::Variant;

/// `log2` of the linear power ratio for an SNR in dB.
pub fn log2_snr(snr_db: f64) -> f64 {
    snr_db / 10.0 * std::f64::consts::LOG2_10
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<f64, HarnessError> {
    if xs.len() != ys.len() {
        return Err(HarnessError::InvalidArgument("slope fit needs paired samples".into()));
    }
    if xs.len() < 2 {
        return Err(HarnessError::InvalidArgument(format!(
            "slope fit needs at least 2 points, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(HarnessError::InvalidArgument("slope fit needs distinct abscissae".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Sum-rate slope in bits/s/Hz per doubling of SNR over the cells of
/// `variant` whose SNR lies in `[lo, hi]` dB (absent cells are skipped).
pub fn estimate_multiplexing_gain(
    sweep: &SweepResult,
    variant: Variant,
    window_db: (f64, f64),
) -> Result<f64, HarnessError> {
    let (lo, hi) = window_db;
    let (xs, ys): (Vec<f64>, Vec<f64>) = sweep
        .cells
        .iter()
        .filter(|c| c.algorithm == variant && c.snr_db >= lo - 1e-9 && c.snr_db <= hi + 1e-9)
        .filter_map(|c| c.mean_sum_rate.map(|r| (log2_snr(c.snr_db), r)))
        .unzip();
    least_squares_slope(&xs, &ys)
}
