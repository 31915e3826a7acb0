//! α-scaled Ricean channel realizations.
//!
//! `H̄ = √(κ/(κ+1)) a_r(θ_r) a_t(θ_t)^H + √(1/(κ+1)) H_sc` with a
//! half-wavelength uniform linear array, and `H_{k,ℓ} = α H̄_{k,ℓ}` on the
//! cross links. Direct links are never scaled.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::network::NetworkConfig;
use crate::numerics::{ComplexMatrix, ComplexVector};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("antenna count must be at least 1")]
    ZeroAntennas,
    #[error("invalid channel parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams<T> {
    /// Cross-link amplitude scale, in `[0, 1]`.
    pub alpha: T,
    /// Ricean κ-factor; 0 is Rayleigh fading.
    pub kappa: T,
    /// Angle of departure (radians).
    pub theta_t: T,
    /// Angle of arrival (radians).
    pub theta_r: T,
}

impl<T: Real> ChannelParams<T> {
    pub fn new(alpha: T, kappa: T, theta_t: T, theta_r: T) -> Result<Self, ChannelError> {
        let p = Self {
            alpha,
            kappa,
            theta_t,
            theta_r,
        };
        p.validate()?;
        Ok(p)
    }

    /// Same params with default angles `θ_t = θ_r = π/6`.
    pub fn with_default_angles(alpha: T, kappa: T) -> Result<Self, ChannelError> {
        let angle = T::pi() / T::lit(6.0);
        Self::new(alpha, kappa, angle, angle)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(ChannelError::InvalidParameter {
                name: "alpha",
                value: self.alpha.as_f64(),
            });
        }
        if !(self.kappa >= T::zero()) || !self.kappa.is_finite() {
            return Err(ChannelError::InvalidParameter {
                name: "kappa",
                value: self.kappa.as_f64(),
            });
        }
        for (name, v) in [("theta_t", self.theta_t), ("theta_r", self.theta_r)] {
            if !v.is_finite() {
                return Err(ChannelError::InvalidParameter { name, value: v.as_f64() });
            }
        }
        Ok(())
    }
}

impl<T: Real> Default for ChannelParams<T> {
    fn default() -> Self {
        Self::with_default_angles(T::one(), T::zero()).expect("valid defaults")
    }
}

/// The K×K family of channel matrices for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T: Real> {
    users: usize,
    // row-major over (receiver k, transmitter ℓ)
    matrices: Vec<ComplexMatrix<T>>,
}

impl<T: Real> ChannelSet<T> {
    /// Builds a set from `matrices[k][ℓ] = H_{k,ℓ}`.
    ///
    /// Panics if the grid is not square.
    pub fn from_grid(grid: Vec<Vec<ComplexMatrix<T>>>) -> Self {
        let users = grid.len();
        assert!(grid.iter().all(|row| row.len() == users), "channel grid must be K x K");
        Self {
            users,
            matrices: grid.into_iter().flatten().collect(),
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// `H_{k,ℓ}`: from transmitter `l` to receiver `k`.
    pub fn get(&self, k: usize, l: usize) -> &ComplexMatrix<T> {
        &self.matrices[k * self.users + l]
    }

    pub fn get_mut(&mut self, k: usize, l: usize) -> &mut ComplexMatrix<T> {
        &mut self.matrices[k * self.users + l]
    }

    /// True when every `H_{k,ℓ}` is `n_r[k] × n_t[ℓ]` and finite.
    pub fn matches(&self, config: &NetworkConfig<T>) -> bool {
        self.users == config.users()
            && (0..self.users).all(|k| {
                (0..self.users).all(|l| {
                    let h = self.get(k, l);
                    h.nrows() == config.n_r[k]
                        && h.ncols() == config.n_t[l]
                        && crate::numerics::is_finite(h)
                })
            })
    }
}

/// Half-wavelength ULA response: entry `i` is `exp(−jπ i sin θ)`.
pub fn steering_vector<T: Real>(n: usize, theta: T) -> Result<ComplexVector<T>, ChannelError> {
    if n == 0 {
        return Err(ChannelError::ZeroAntennas);
    }
    let step = T::pi() * theta.sin();
    Ok(ComplexVector::from_fn(n, |i, _| {
        let phase = -(step * T::from_count(i));
        Complex::new(phase.cos(), phase.sin())
    }))
}

/// `n_r × n_t` matrix of i.i.d. `CN(0, 1)` entries, drawn row by row.
pub fn draw_scattered<T: Real, R: Rng + ?Sized>(
    n_r: usize,
    n_t: usize,
    rng: &mut R,
) -> ComplexMatrix<T> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut entries = Vec::with_capacity(n_r * n_t);
    for _ in 0..n_r * n_t {
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        entries.push(Complex::new(T::lit(x * scale), T::lit(y * scale)));
    }
    ComplexMatrix::from_row_slice(n_r, n_t, &entries)
}

/// One Ricean draw `H̄` (unit average power per entry).
pub fn draw_ricean<T: Real, R: Rng + ?Sized>(
    n_r: usize,
    n_t: usize,
    params: &ChannelParams<T>,
    rng: &mut R,
) -> Result<ComplexMatrix<T>, ChannelError> {
    let scattered = draw_scattered::<T, R>(n_r, n_t, rng);
    let a_r = steering_vector(n_r, params.theta_r)?;
    let a_t = steering_vector(n_t, params.theta_t)?;
    let kp1 = params.kappa + T::one();
    let los_w = (params.kappa / kp1).sqrt();
    let nlos_w = (T::one() / kp1).sqrt();
    let los = &a_r * a_t.adjoint();
    Ok(ComplexMatrix::from_fn(n_r, n_t, |i, j| {
        los[(i, j)] * Complex::new(los_w, T::zero()) + scattered[(i, j)] * Complex::new(nlos_w, T::zero())
    }))
}

/// Draws every link of the network; cross links are scaled by `α`.
///
/// Links are drawn in row-major `(k, ℓ)` order so that the direct links
/// consume the same random numbers regardless of `α`.
pub fn draw_channel_set<T: Real, R: Rng + ?Sized>(
    config: &NetworkConfig<T>,
    params: &ChannelParams<T>,
    rng: &mut R,
) -> Result<ChannelSet<T>, ChannelError> {
    params.validate()?;
    let users = config.users();
    let mut matrices = Vec::with_capacity(users * users);
    for k in 0..users {
        for l in 0..users {
            let h = draw_ricean(config.n_r[k], config.n_t[l], params, rng)?;
            if k == l {
                matrices.push(h);
            } else {
                matrices.push(h * Complex::new(params.alpha, T::zero()));
            }
        }
    }
    Ok(ChannelSet { users, matrices })
}
