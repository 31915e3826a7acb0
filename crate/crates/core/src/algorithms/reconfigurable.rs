use rand::Rng;

use super::{
    finish_columns, is_degenerate, random_unit_columns, AlgorithmError, AlgorithmSettings,
    IterationRecord, IterationTrace, Repair, RunOutput, Variant,
};
use crate::channel::ChannelSet;
use crate::network::{
    interference_noise_covariance, received_covariance, sum_rate, system_mse, NetworkConfig,
    RxState, TxState,
};
use crate::numerics::{
    column_norms, creal, frobenius, scale_columns, hermitian_eigen, hermitian_inv_sqrt, polar_orthonormalize,
    solve_hpd, svd_thin, water_fill, ComplexMatrix, NumericsError, EIGEN_CLAMP_RATIO,
};
use crate::scalar::Real;

/// Bracket doublings allowed before the μ search gives up.
const MAX_DOUBLINGS: usize = 200;

fn select_columns<T: Real>(m: &ComplexMatrix<T>, cols: &[usize]) -> ComplexMatrix<T> {
    ComplexMatrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

/// Indices of streams carrying power; all streams when none do.
fn active_streams<T: Real>(tx: &TxState<T>) -> Vec<usize> {
    let active: Vec<usize> = (0..tx.streams()).filter(|&n| tx.powers[n] > T::zero()).collect();
    if active.is_empty() {
        (0..tx.streams()).collect()
    } else {
        active
    }
}

/// Reverse-network covariance `A_k = Σ_ℓ H_{ℓ,k}ᴴ U_ℓ diag(w_ℓ) U_ℓᴴ H_{ℓ,k} + σ²_k I`
/// and the right-hand side `H_{k,k}ᴴ U_k`.
fn reverse_system<T: Real>(
    channels: &ChannelSet<T>,
    rx: &[RxState<T>],
    weights: &[Vec<T>],
    config: &NetworkConfig<T>,
    k: usize,
) -> (ComplexMatrix<T>, ComplexMatrix<T>) {
    let n_t = config.n_t[k];
    let mut a = ComplexMatrix::<T>::identity(n_t, n_t) * creal(config.noise_var[k]);
    for l in 0..config.users() {
        let roots: Vec<T> = weights[l].iter().map(|&w| w.sqrt()).collect();
        let x = scale_columns(&(channels.get(l, k).adjoint() * &rx[l].filter), &roots);
        a += &x * x.adjoint();
    }
    let rhs = channels.get(k, k).adjoint() * &rx[k].filter;
    (a, rhs)
}

/// `(A + μ I)⁻¹` applied through one eigendecomposition of `A`, so each
/// bisection step costs a weighted sum instead of a solve.
///
/// Eigenvalues below `EIGEN_CLAMP_RATIO · λ_max` count as zero; at `μ = 0`
/// null-space components the right-hand side has no weight on are dropped
/// (the `μ → 0⁺` limit).
struct ShiftedSolver<T: Real> {
    values: Vec<T>,
    vectors: ComplexMatrix<T>,
}

impl<T: Real> ShiftedSolver<T> {
    fn new(a: &ComplexMatrix<T>) -> Result<Self, NumericsError> {
        let (mut values, vectors) = hermitian_eigen(a)?;
        let floor = values.first().copied().unwrap_or_else(T::zero) * T::lit(EIGEN_CLAMP_RATIO);
        for v in values.iter_mut() {
            if *v <= floor {
                *v = T::zero();
            }
        }
        Ok(Self { values, vectors })
    }

    /// Squared norm of the projection of `rhs` onto each eigenvector.
    fn weights(&self, rhs: &ComplexMatrix<T>) -> Vec<T> {
        let proj = self.vectors.adjoint() * rhs;
        let total = frobenius(rhs) * frobenius(rhs);
        let negligible = total * T::lit(1e-20);
        (0..proj.nrows())
            .map(|i| {
                let w = proj.row(i).iter().fold(T::zero(), |s, z| s + z.norm_sqr());
                if self.values[i] == T::zero() && w <= negligible {
                    T::zero()
                } else {
                    w
                }
            })
            .collect()
    }

    /// `tr(Eᴴ E)` for `E = (A + μ I)⁻¹ rhs`, given `weights(rhs)`.
    fn power(&self, weights: &[T], mu: T) -> T {
        let mut total = T::zero();
        for (&w, &lambda) in weights.iter().zip(&self.values) {
            if w == T::zero() {
                continue;
            }
            let denom = lambda + mu;
            if denom <= T::zero() {
                return T::max_value().unwrap_or_else(|| T::lit(f64::MAX));
            }
            total += w / (denom * denom);
        }
        total
    }

    /// Pseudo-inverse solve: null-space components map to zero.
    fn solve(&self, rhs: &ComplexMatrix<T>, mu: T) -> ComplexMatrix<T> {
        let mut proj = self.vectors.adjoint() * rhs;
        for i in 0..proj.nrows() {
            let denom = self.values[i] + mu;
            let scale = if denom > T::zero() { T::one() / denom } else { T::zero() };
            proj.row_mut(i).scale_mut(scale);
        }
        &self.vectors * proj
    }
}

/// Forward network: per-stream MMSE receive filters
/// `U_k⁽ⁿ⁾ ∝ B_k⁻¹ H_{k,k} V_k⁽ⁿ⁾`, normalized to unit norm.
///
/// The returned states carry `Q_k` for the given transmit states.
pub fn forward_update<T: Real>(
    channels: &ChannelSet<T>,
    tx: &[TxState<T>],
    config: &NetworkConfig<T>,
    mut repair: Option<&mut Repair<'_>>,
) -> Result<Vec<RxState<T>>, AlgorithmError> {
    let mut out = Vec::with_capacity(config.users());
    for k in 0..config.users() {
        let b = received_covariance(k, channels, tx, config)?;
        let h = channels.get(k, k);
        let hv = h * &tx[k].precoder;
        let degenerate: Vec<bool> = column_norms(&hv).into_iter().map(|n| is_degenerate(n, h)).collect();
        let x = solve_hpd(&b, &hv).ok_or(NumericsError::NotPositiveDefinite(0.0))?;
        let filter = finish_columns(x, &degenerate, k, &mut repair)?;
        out.push(RxState {
            filter,
            covariance: interference_noise_covariance(k, channels, tx, config)?,
        });
    }
    Ok(out)
}

/// Result of the reciprocal-network MMSE step.
#[derive(Debug, Clone)]
pub struct ReverseOutcome<T: Real> {
    /// `G_k` with unit-norm columns.
    pub subspaces: Vec<ComplexMatrix<T>>,
    /// Power-constraint multipliers `μ_k ≥ 0`.
    pub mu: Vec<T>,
}

/// Reciprocal network, step I.
///
/// Each receiver transmits back along its filter columns with the current
/// forward stream powers `p_ℓ` and Tx `k` sees noise `σ²_k`. Tx `k` forms
/// `B̃_k = Σ_ℓ H_{ℓ,k}ᴴ U_ℓ diag(p_ℓ) U_ℓᴴ H_{ℓ,k} + (σ²_k + μ_k) I` and
/// `E_k = B̃_k⁻¹ H_{k,k}ᴴ U_k`, with `μ_k` the smallest nonnegative value
/// for which the active columns satisfy `tr(E_kᴴ E_k) ≤ P`.
pub fn reverse_mmse_update<T: Real>(
    channels: &ChannelSet<T>,
    rx: &[RxState<T>],
    tx: &[TxState<T>],
    config: &NetworkConfig<T>,
    settings: &AlgorithmSettings,
    iteration: usize,
    mut repair: Option<&mut Repair<'_>>,
) -> Result<ReverseOutcome<T>, AlgorithmError> {
    let users = config.users();
    let budget = config.power;
    let active: Vec<Vec<usize>> = tx.iter().map(active_streams).collect();
    // reciprocal streams carry the forward stream powers
    let weights: Vec<Vec<T>> = tx.iter().map(|t| t.powers.clone()).collect();

    let mut subspaces = Vec::with_capacity(users);
    let mut mus = Vec::with_capacity(users);
    for k in 0..users {
        let (a, rhs) = reverse_system(channels, rx, &weights, config, k);
        let solver = ShiftedSolver::new(&a)?;
        let weights = solver.weights(&select_columns(&rhs, &active[k]));
        let power_at = |mu: T| solver.power(&weights, mu);

        let mu = if power_at(T::zero()) <= budget {
            T::zero()
        } else {
            let mut lo = T::zero();
            let mut hi = T::one();
            let mut doublings = 0;
            while power_at(hi) > budget {
                lo = hi;
                hi += hi;
                doublings += 1;
                if doublings > MAX_DOUBLINGS {
                    return Err(AlgorithmError::BisectionFailed { user: k, iteration });
                }
            }
            let tol = T::lit(settings.bisection_tol);
            while hi - lo > tol * hi {
                let mid = (lo + hi) * T::lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                if power_at(mid) > budget {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };

        let e = solver.solve(&rhs, mu);
        let h = channels.get(k, k);
        let degenerate: Vec<bool> = column_norms(&rhs).into_iter().map(|n| is_degenerate(n, h)).collect();
        subspaces.push(finish_columns(e, &degenerate, k, &mut repair)?);
        mus.push(mu);
    }
    Ok(ReverseOutcome { subspaces, mu: mus })
}

/// Reciprocal network, step II: per-user rate maximization over the span of
/// the active columns of `G_k`.
///
/// The active columns are orthonormalized (polar factor), the effective
/// channel `Q_k^{-1/2} H_{k,k} G_k` is decomposed as `W Λ Fᴴ`, `V_k = G_k F`
/// and the stream powers come from waterfilling on `λ²`. For
/// [`Variant::Myopic`], `Q_k` is replaced by `σ²_k I`. Streams that were
/// inactive keep their `G_k` column and zero power.
pub fn wf_step<T: Real>(
    channels: &ChannelSet<T>,
    subspaces: &[ComplexMatrix<T>],
    tx_prev: &[TxState<T>],
    config: &NetworkConfig<T>,
    variant: Variant,
) -> Result<Vec<TxState<T>>, AlgorithmError> {
    let users = config.users();
    let mut out = Vec::with_capacity(users);
    for k in 0..users {
        let g = &subspaces[k];
        let d = g.ncols();
        let active = active_streams(&tx_prev[k]);
        let inactive: Vec<usize> = (0..d).filter(|n| !active.contains(n)).collect();

        let q = match variant {
            Variant::Reconfigurable => interference_noise_covariance(k, channels, tx_prev, config)?,
            Variant::Myopic => {
                let n = config.n_r[k];
                ComplexMatrix::identity(n, n) * creal(config.noise_var[k])
            }
            other => return Err(AlgorithmError::WrongVariant(other)),
        };
        let whitener = hermitian_inv_sqrt(&q)?;

        let (basis, root) = polar_orthonormalize(&select_columns(g, &active))?;
        let effective = &whitener * channels.get(k, k) * &basis;
        let svd = svd_thin(&effective)?;
        let gains: Vec<T> = svd.singular_values.iter().map(|&s| s * s).collect();
        let wf = water_fill(&gains, config.power)?;

        let d_a = active.len();
        let rotation = &svd.right; // d_a × min(n_r, d_a)
        let used = rotation.ncols();
        let mut precoder = ComplexMatrix::<T>::zeros(g.nrows(), d);
        let mut inner = ComplexMatrix::<T>::zeros(d, d);
        let mut powers = vec![T::zero(); d];
        let shaped = &basis * rotation;
        let coeffs = &root * rotation;
        for c in 0..used {
            precoder.set_column(c, &shaped.column(c));
            powers[c] = wf.powers[c];
            for (i, &src) in active.iter().enumerate() {
                inner[(src, c)] = coeffs[(i, c)];
            }
        }
        // active directions beyond the channel rank get no power
        let mut slot = used;
        for &src in active.iter().skip(used) {
            precoder.set_column(slot, &g.column(src));
            inner[(src, slot)] = creal(T::one());
            slot += 1;
        }
        debug_assert!(slot == d_a);
        for &src in &inactive {
            precoder.set_column(slot, &g.column(src));
            inner[(src, slot)] = creal(T::one());
            slot += 1;
        }
        out.push(TxState {
            precoder,
            subspace: g.clone(),
            inner,
            powers,
        });
    }
    Ok(out)
}

/// Reconfigurable precoding (or its myopic variant, per `settings.variant`).
///
/// Starts from `d_k = min(n_t, n_r)` random unit-norm streams with equal
/// power and repeats forward update, reciprocal MMSE update and
/// waterfilling until the sum rate changes by less than the convergence
/// tolerance or the iteration cap is reached.
pub fn run_reconfigurable<T: Real, R: Rng>(
    channels: &ChannelSet<T>,
    config: &NetworkConfig<T>,
    settings: &AlgorithmSettings,
    rng: &mut R,
) -> Result<RunOutput<T>, AlgorithmError> {
    settings.validate()?;
    let variant = settings.variant;
    if !matches!(variant, Variant::Reconfigurable | Variant::Myopic) {
        return Err(AlgorithmError::WrongVariant(variant));
    }
    if !channels.matches(config) {
        return Err(crate::network::NetworkError::DimensionMismatch(
            "channel set does not match the network configuration".into(),
        )
        .into());
    }

    let mut tx: Vec<TxState<T>> = (0..config.users())
        .map(|k| {
            let d = config.max_streams(k);
            let v = random_unit_columns(config.n_t[k], d, rng);
            TxState::from_precoder(v, vec![config.power / T::from_count(d); d])
        })
        .collect();

    let mut trace = IterationTrace::new(variant);
    let mut repair = Repair::new(rng);
    for iteration in 1..=settings.max_iterations {
        let rx = forward_update(channels, &tx, config, Some(&mut repair))?;
        let reverse = reverse_mmse_update(channels, &rx, &tx, config, settings, iteration, Some(&mut repair))?;
        let next = wf_step(channels, &reverse.subspaces, &tx, config, variant)?;

        let rate = sum_rate(channels, &next, config)?.as_f64();
        if !rate.is_finite() {
            return Err(AlgorithmError::NonFinite(iteration));
        }
        let mse = system_mse(channels, &tx, &rx, config)?.as_f64();
        trace.records.push(IterationRecord {
            sum_rate: rate,
            objective: rate,
            mse_objective: mse,
            mu: reverse.mu.iter().map(|m| m.as_f64()).collect(),
            effective_streams: next.iter().map(TxState::effective_streams).collect(),
        });
        trace.iterations_used = iteration;
        tx = next;
        if trace.check_converged(settings.convergence_tol) {
            break;
        }
    }
    let rx = forward_update(channels, &tx, config, Some(&mut repair))?;
    trace.degenerate_streams = repair.replaced;
    Ok(RunOutput { tx, rx, trace })
}
