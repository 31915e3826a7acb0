use rand::Rng;

use super::{
    finish_columns, is_degenerate, random_unit_columns, AlgorithmError, AlgorithmSettings,
    IterationRecord, IterationTrace, Repair, RunOutput, Variant,
};
use crate::channel::ChannelSet;
use crate::network::{
    interference_noise_covariance, signal_covariance, sum_rate, system_mse, NetworkConfig,
    NetworkError, RxState, TxState,
};
use crate::numerics::{creal, solve_hpd, ComplexMatrix, NumericsError};
use crate::scalar::Real;

/// Largest per-user stream count satisfying the symmetric IA feasibility
/// bound `d ≤ (n_t + n_r) / (K + 1)`, clamped to `[1, min(n_t, n_r)]`.
/// Gives 2 for the 3-user 4×4 network.
pub fn ia_feasible_streams<T: Real>(config: &NetworkConfig<T>, k: usize) -> usize {
    let bound = (config.n_t[k] + config.n_r[k]) / (config.users() + 1);
    bound.clamp(1, config.max_streams(k))
}

/// Stream count used by a Max-SINR variant for user `k`.
pub fn max_sinr_streams<T: Real>(config: &NetworkConfig<T>, k: usize, variant: Variant) -> usize {
    match variant {
        Variant::MaxSinrGenie => config.max_streams(k),
        _ => ia_feasible_streams(config, k),
    }
}

fn equal_powers<T: Real>(config: &NetworkConfig<T>, d: usize) -> Vec<T> {
    vec![config.power / T::from_count(d); d]
}

/// Per-stream SINR-maximizing filters
/// `x⁽ⁿ⁾ ∝ (Σ_ℓ H_ℓ S_ℓ H_ℓᴴ + σ² I − p_n h_n h_nᴴ)⁻¹ h_n`, `h_n = H_direct t_n`.
///
/// `links[ℓ]` is the channel from source `ℓ` to this node, `sources[ℓ]` the
/// beamformers and powers used there. Returns unit-norm filters and the
/// per-stream SINRs those filters achieve.
fn max_sinr_filters<T: Real>(
    links: &[&ComplexMatrix<T>],
    sources: &[(&ComplexMatrix<T>, &[T])],
    own: usize,
    noise: T,
    user: usize,
    repair: &mut Option<&mut Repair<'_>>,
) -> Result<(ComplexMatrix<T>, Vec<T>), AlgorithmError> {
    let n = links[own].nrows();
    let mut total = ComplexMatrix::<T>::identity(n, n) * creal(noise);
    for (h, (beams, powers)) in links.iter().zip(sources) {
        total += signal_covariance(h, beams, powers);
    }
    let (beams, powers) = sources[own];
    let directions = links[own] * beams;
    let mut filters = ComplexMatrix::<T>::zeros(n, beams.ncols());
    let mut sinrs = Vec::with_capacity(beams.ncols());
    let mut degenerate = vec![false; beams.ncols()];
    for s in 0..beams.ncols() {
        let h = directions.column(s).into_owned();
        let h_norm = h.norm();
        degenerate[s] = is_degenerate(h_norm, links[own]);
        let b = &total - &h * h.adjoint() * creal(powers[s]);
        let h_mat = ComplexMatrix::from_column_slice(n, 1, h.as_slice());
        let x = solve_hpd(&b, &h_mat).ok_or(NumericsError::NotPositiveDefinite(0.0))?;
        let sinr = (h.adjoint() * &x)[(0, 0)].re * powers[s];
        sinrs.push(if sinr > T::zero() { sinr } else { T::zero() });
        filters.set_column(s, &x.column(0));
    }
    let filters = finish_columns(filters, &degenerate, user, repair)?;
    Ok((filters, sinrs))
}

fn forward_filters<T: Real>(
    channels: &ChannelSet<T>,
    tx: &[TxState<T>],
    config: &NetworkConfig<T>,
    repair: &mut Option<&mut Repair<'_>>,
) -> Result<(Vec<ComplexMatrix<T>>, T), AlgorithmError> {
    let users = config.users();
    let mut filters = Vec::with_capacity(users);
    let mut objective = T::zero();
    for k in 0..users {
        let links: Vec<&ComplexMatrix<T>> = (0..users).map(|l| channels.get(k, l)).collect();
        let sources: Vec<(&ComplexMatrix<T>, &[T])> =
            tx.iter().map(|t| (&t.precoder, t.powers.as_slice())).collect();
        let (u, sinrs) = max_sinr_filters(&links, &sources, k, config.noise_var[k], k, repair)?;
        objective += sinrs.iter().fold(T::zero(), |a, &s| a + s);
        filters.push(u);
    }
    Ok((filters, objective))
}

fn reverse_filters<T: Real>(
    channels: &ChannelSet<T>,
    receive: &[ComplexMatrix<T>],
    tx: &[TxState<T>],
    config: &NetworkConfig<T>,
    repair: &mut Option<&mut Repair<'_>>,
) -> Result<Vec<ComplexMatrix<T>>, AlgorithmError> {
    let users = config.users();
    let reversed: Vec<Vec<ComplexMatrix<T>>> = (0..users)
        .map(|k| (0..users).map(|l| channels.get(l, k).adjoint()).collect())
        .collect();
    let mut out = Vec::with_capacity(users);
    for k in 0..users {
        let links: Vec<&ComplexMatrix<T>> = reversed[k].iter().collect();
        let sources: Vec<(&ComplexMatrix<T>, &[T])> = receive
            .iter()
            .zip(tx)
            .map(|(u, t)| (u, t.powers.as_slice()))
            .collect();
        let (v, _) = max_sinr_filters(&links, &sources, k, config.noise_var[k], k, repair)?;
        out.push(v);
    }
    Ok(out)
}

/// Distributed per-stream SINR maximization with equal power `P/d_k`.
///
/// Alternates max-SINR receive filters in the forward network and max-SINR
/// transmit filters in the reciprocal network. The stopping rule watches the
/// summed per-stream SINR of the forward network.
pub fn run_max_sinr<T: Real, R: Rng>(
    channels: &ChannelSet<T>,
    config: &NetworkConfig<T>,
    settings: &AlgorithmSettings,
    rng: &mut R,
) -> Result<RunOutput<T>, AlgorithmError> {
    settings.validate()?;
    let variant = settings.variant;
    if !matches!(variant, Variant::MaxSinr | Variant::MaxSinrGenie) {
        return Err(AlgorithmError::WrongVariant(variant));
    }
    if !channels.matches(config) {
        return Err(NetworkError::DimensionMismatch(
            "channel set does not match the network configuration".into(),
        )
        .into());
    }
    let users = config.users();
    let mut tx: Vec<TxState<T>> = (0..users)
        .map(|k| {
            let d = max_sinr_streams(config, k, variant);
            TxState::from_precoder(random_unit_columns(config.n_t[k], d, rng), equal_powers(config, d))
        })
        .collect();

    let mut trace = IterationTrace::new(variant);
    let mut repair = Repair::new(rng);
    let mut slot = Some(&mut repair);
    for iteration in 1..=settings.max_iterations {
        let (receive, _) = forward_filters(channels, &tx, config, &mut slot)?;
        let transmit = reverse_filters(channels, &receive, &tx, config, &mut slot)?;
        let rx_prev: Vec<RxState<T>> = receive
            .into_iter()
            .enumerate()
            .map(|(k, filter)| -> Result<_, AlgorithmError> {
                Ok(RxState {
                    filter,
                    covariance: interference_noise_covariance(k, channels, &tx, config)?,
                })
            })
            .collect::<Result<_, _>>()?;
        let mse = system_mse(channels, &tx, &rx_prev, config)?.as_f64();

        let next: Vec<TxState<T>> = transmit
            .into_iter()
            .zip(&tx)
            .map(|(v, t)| TxState::from_precoder(v, t.powers.clone()))
            .collect();
        let rate = sum_rate(channels, &next, config)?.as_f64();
        if !rate.is_finite() {
            return Err(AlgorithmError::NonFinite(iteration));
        }
        let (_, objective) = forward_filters(channels, &next, config, &mut slot)?;
        trace.records.push(IterationRecord {
            sum_rate: rate,
            objective: objective.as_f64(),
            mse_objective: mse,
            mu: vec![0.0; users],
            effective_streams: next.iter().map(TxState::effective_streams).collect(),
        });
        trace.iterations_used = iteration;
        tx = next;
        if trace.check_converged(settings.convergence_tol) {
            break;
        }
    }
    let (receive, _) = forward_filters(channels, &tx, config, &mut slot)?;
    let rx = receive
        .into_iter()
        .enumerate()
        .map(|(k, filter)| -> Result<_, AlgorithmError> {
            Ok(RxState {
                filter,
                covariance: interference_noise_covariance(k, channels, &tx, config)?,
            })
        })
        .collect::<Result<_, _>>()?;
    trace.degenerate_streams = repair.replaced;
    Ok(RunOutput { tx, rx, trace })
}
