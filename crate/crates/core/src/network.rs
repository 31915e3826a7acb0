//! Network state and the closed-form metrics computed from it.
//!
//! The received signal at Rx `k` is
//! `y_k = Σ_ℓ H_{k,ℓ} V_ℓ P_ℓ^{1/2} s_ℓ + n_k` with `E{s sᴴ} = I` and noise
//! covariance `σ²_k I`. No symbols are ever sampled: rates and MSE are
//! deterministic functions of channels, filters and powers.

use thiserror::Error;

use crate::channel::ChannelSet;
use crate::numerics::{
    self, column_norms, creal, log2_det_whitened, scale_columns, ComplexMatrix, NumericsError,
};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig<T> {
    pub n_t: Vec<usize>,
    pub n_r: Vec<usize>,
    /// Total transmit power per Tx. With unit noise this is the transmit SNR.
    pub power: T,
    pub noise_var: Vec<T>,
}

impl<T: Real> NetworkConfig<T> {
    /// Unit noise variance at every receiver.
    pub fn new(n_t: Vec<usize>, n_r: Vec<usize>, power: T) -> Result<Self, NetworkError> {
        let noise_var = vec![T::one(); n_t.len()];
        Self::with_noise(n_t, n_r, power, noise_var)
    }

    pub fn with_noise(
        n_t: Vec<usize>,
        n_r: Vec<usize>,
        power: T,
        noise_var: Vec<T>,
    ) -> Result<Self, NetworkError> {
        let c = Self {
            n_t,
            n_r,
            power,
            noise_var,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn symmetric(users: usize, n_t: usize, n_r: usize, power: T) -> Result<Self, NetworkError> {
        Self::new(vec![n_t; users], vec![n_r; users], power)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let k = self.n_t.len();
        if k == 0 {
            return Err(NetworkError::InvalidConfig("need at least one user pair".into()));
        }
        if self.n_r.len() != k || self.noise_var.len() != k {
            return Err(NetworkError::InvalidConfig(
                "n_t, n_r and noise_var must have one entry per user".into(),
            ));
        }
        if self.n_t.iter().chain(&self.n_r).any(|&n| n == 0) {
            return Err(NetworkError::InvalidConfig("antenna counts must be >= 1".into()));
        }
        if !(self.power > T::zero()) || !self.power.is_finite() {
            return Err(NetworkError::InvalidConfig(format!(
                "power budget must be positive, got {}",
                self.power
            )));
        }
        if self.noise_var.iter().any(|&s| !(s > T::zero()) || !s.is_finite()) {
            return Err(NetworkError::InvalidConfig("noise variances must be positive".into()));
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.n_t.len()
    }

    /// `min(n_t, n_r)` for user `k`.
    pub fn max_streams(&self, k: usize) -> usize {
        self.n_t[k].min(self.n_r[k])
    }

    /// Same network at a different power budget.
    pub fn at_power(&self, power: T) -> Result<Self, NetworkError> {
        let mut c = self.clone();
        c.power = power;
        c.validate()?;
        Ok(c)
    }
}

/// Transmitter state: `V = G F` with per-stream powers `P = diag(powers)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TxState<T: Real> {
    /// `V_k`, `n_t × d`.
    pub precoder: ComplexMatrix<T>,
    /// `G_k`, `n_t × d`, unit-norm columns from the reciprocal MMSE step.
    pub subspace: ComplexMatrix<T>,
    /// `F_k`, `d × d`, with `V = G F`.
    pub inner: ComplexMatrix<T>,
    pub powers: Vec<T>,
}

impl<T: Real> TxState<T> {
    /// State with `G = V`, `F = I`.
    pub fn from_precoder(precoder: ComplexMatrix<T>, powers: Vec<T>) -> Self {
        let d = precoder.ncols();
        Self {
            subspace: precoder.clone(),
            inner: ComplexMatrix::identity(d, d),
            precoder,
            powers,
        }
    }

    pub fn streams(&self) -> usize {
        self.powers.len()
    }

    /// Number of strictly positive stream powers.
    pub fn effective_streams(&self) -> usize {
        self.powers.iter().filter(|&&p| p > T::zero()).count()
    }

    pub fn total_power(&self) -> T {
        self.powers.iter().fold(T::zero(), |a, &p| a + p)
    }

    /// `tr(V P Vᴴ)`, the power actually radiated.
    pub fn radiated_power(&self) -> T {
        column_norms(&self.precoder)
            .iter()
            .zip(&self.powers)
            .fold(T::zero(), |a, (&n, &p)| a + n * n * p)
    }
}

/// Receiver state: filter `U_k` and interference-plus-noise covariance `Q_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RxState<T: Real> {
    pub filter: ComplexMatrix<T>,
    pub covariance: ComplexMatrix<T>,
}

fn check_dims<T: Real>(
    channels: &ChannelSet<T>,
    tx: &[TxState<T>],
    config: &NetworkConfig<T>,
) -> Result<(), NetworkError> {
    let k = config.users();
    if channels.users() != k || tx.len() != k {
        return Err(NetworkError::DimensionMismatch(format!(
            "{} users in config, {} in channel set, {} tx states",
            k,
            channels.users(),
            tx.len()
        )));
    }
    for (l, t) in tx.iter().enumerate() {
        if t.precoder.nrows() != config.n_t[l] || t.precoder.ncols() != t.powers.len() {
            return Err(NetworkError::DimensionMismatch(format!(
                "tx {l}: precoder is {}x{} with {} powers, expected {} rows",
                t.precoder.nrows(),
                t.precoder.ncols(),
                t.powers.len(),
                config.n_t[l]
            )));
        }
    }
    for r in 0..k {
        for l in 0..k {
            let h = channels.get(r, l);
            if h.nrows() != config.n_r[r] || h.ncols() != config.n_t[l] {
                return Err(NetworkError::DimensionMismatch(format!(
                    "H[{r},{l}] is {}x{}, expected {}x{}",
                    h.nrows(),
                    h.ncols(),
                    config.n_r[r],
                    config.n_t[l]
                )));
            }
        }
    }
    Ok(())
}

/// `H V P Vᴴ Hᴴ`, formed as `A Aᴴ` with `A = H V P^{1/2}`.
pub fn signal_covariance<T: Real>(
    h: &ComplexMatrix<T>,
    precoder: &ComplexMatrix<T>,
    powers: &[T],
) -> ComplexMatrix<T> {
    let roots: Vec<T> = powers.iter().map(|&p| p.sqrt()).collect();
    let a = scale_columns(&(h * precoder), &roots);
    &a * a.adjoint()
}

fn noise_matrix<T: Real>(config: &NetworkConfig<T>, k: usize) -> ComplexMatrix<T> {
    let n = config.n_r[k];
    ComplexMatrix::identity(n, n) * creal(config.noise_var[k])
}

/// `B_k = Σ_ℓ H_{k,ℓ} V_ℓ P_ℓ V_ℓᴴ H_{k,ℓ}ᴴ + σ²_k I`, all users included.
pub fn received_covariance<T: Real>(
    k: usize,
    channels: &ChannelSet<T>,
    tx: &[TxState<T>],
    config: &NetworkConfig<T>,
) -> Result<ComplexMatrix<T>, NetworkError> {
    check_dims(channels, tx, config)?;
    let mut b = noise_matrix(config, k);
    for (l, t) in tx.iter().enumerate() {
        b += signal_covariance(channels.get(k, l), &t.precoder, &t.powers);
    }
    Ok(b)
}

/// `Q_k`: like [`received_covariance`] but without the desired user.
pub fn interference_noise_covariance<T: Real>(
    k: usize,
    channels: &ChannelSet<T>,
    tx: &[TxState<T>],
    config: &NetworkConfig<T>,
) -> Result<ComplexMatrix<T>, NetworkError> {
    check_dims(channels, tx, config)?;
    let mut q = noise_matrix(config, k);
    for (l, t) in tx.iter().enumerate() {
        if l != k {
            q += signal_covariance(channels.get(k, l), &t.precoder, &t.powers);
        }
    }
    Ok(q)
}

/// `R_k = log2 det(I + H_{k,k} V_k P_k V_kᴴ H_{k,k}ᴴ Q_k⁻¹)` in bits/s/Hz.
pub fn user_rate<T: Real>(
    k: usize,
    channels: &ChannelSet<T>,
    tx: &[TxState<T>],
    config: &NetworkConfig<T>,
) -> Result<T, NetworkError> {
    let q = interference_noise_covariance(k, channels, tx, config)?;
    let s = signal_covariance(channels.get(k, k), &tx[k].precoder, &tx[k].powers);
    let r = log2_det_whitened(&s, &q)?;
    if !r.is_finite() {
        return Err(NumericsError::NonFinite.into());
    }
    Ok(if r > T::zero() { r } else { T::zero() })
}

pub fn sum_rate<T: Real>(
    channels: &ChannelSet<T>,
    tx: &[TxState<T>],
    config: &NetworkConfig<T>,
) -> Result<T, NetworkError> {
    let mut total = T::zero();
    for k in 0..config.users() {
        total += user_rate(k, channels, tx, config)?;
    }
    Ok(total)
}

/// `Σ_k E‖U_kᴴ y_k − s_k‖²` in closed form:
/// `tr(U_kᴴ B_k U_k) − 2 Re tr(U_kᴴ H_{k,k} V_k P_k^{1/2}) + d_k`.
pub fn system_mse<T: Real>(
    channels: &ChannelSet<T>,
    tx: &[TxState<T>],
    rx: &[RxState<T>],
    config: &NetworkConfig<T>,
) -> Result<T, NetworkError> {
    check_dims(channels, tx, config)?;
    if rx.len() != config.users() {
        return Err(NetworkError::DimensionMismatch(format!(
            "{} rx states for {} users",
            rx.len(),
            config.users()
        )));
    }
    let mut total = T::zero();
    for k in 0..config.users() {
        let u = &rx[k].filter;
        let d = tx[k].streams();
        if u.nrows() != config.n_r[k] || u.ncols() != d {
            return Err(NetworkError::DimensionMismatch(format!(
                "rx {k}: filter is {}x{}, expected {}x{}",
                u.nrows(),
                u.ncols(),
                config.n_r[k],
                d
            )));
        }
        let b = received_covariance(k, channels, tx, config)?;
        let quad = (u.adjoint() * &b * u).trace().re;
        let roots: Vec<T> = tx[k].powers.iter().map(|&p| p.sqrt()).collect();
        let cross = (u.adjoint() * scale_columns(&(channels.get(k, k) * &tx[k].precoder), &roots))
            .trace()
            .re;
        let mse = quad - (cross + cross) + T::from_count(d);
        total += if mse > T::zero() { mse } else { T::zero() };
    }
    Ok(total)
}

/// Interference leaking through the receive filters relative to the
/// desired signal power:
/// `Σ_k Σ_{ℓ≠k} ‖U_kᴴ H_{k,ℓ} V_ℓ P_ℓ^{1/2}‖² / Σ_k ‖U_kᴴ H_{k,k} V_k P_k^{1/2}‖²`.
pub fn interference_leakage_fraction<T: Real>(
    channels: &ChannelSet<T>,
    tx: &[TxState<T>],
    rx: &[RxState<T>],
    config: &NetworkConfig<T>,
) -> Result<T, NetworkError> {
    check_dims(channels, tx, config)?;
    let mut desired = T::zero();
    let mut leaked = T::zero();
    for k in 0..config.users() {
        for (l, t) in tx.iter().enumerate() {
            let roots: Vec<T> = t.powers.iter().map(|&p| p.sqrt()).collect();
            let x = rx[k].filter.adjoint() * scale_columns(&(channels.get(k, l) * &t.precoder), &roots);
            let e = numerics::frobenius(&x);
            if l == k {
                desired += e * e;
            } else {
                leaked += e * e;
            }
        }
    }
    Ok(if desired > T::zero() { leaked / desired } else { T::zero() })
}
