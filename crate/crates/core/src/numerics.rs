//! Dense complex linear-algebra kernels and the waterfilling solver.
//!
//! Everything here is a pure function of its inputs. Decompositions are
//! delegated to `nalgebra`; this module adds the conventions the
//! algorithms rely on (eigenvalue clamping, sorted and phase-fixed singular
//! vectors, Cholesky-based log-determinants).

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;

pub type ComplexMatrix<T> = DMatrix<Complex<T>>;
pub type ComplexVector<T> = DVector<Complex<T>>;

/// Relative floor applied to eigenvalues before inversion.
pub const EIGEN_CLAMP_RATIO: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max |M - M^H| = {0:e})")]
    NotHermitian(f64),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not positive definite (largest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("gain {index} is invalid ({value}); gains must be nonnegative")]
    InvalidGain { index: usize, value: f64 },
    #[error("power budget must be positive and finite, got {0}")]
    InvalidBudget(f64),
    #[error("empty input")]
    Empty,
}

pub fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

pub fn creal<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub fn abs2<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

pub fn is_finite<T: Real>(m: &ComplexMatrix<T>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Hermitian tolerance used by input validation: 1e-9 for `f64`, looser
/// for `f32` where 1e-9 is below machine precision.
fn hermitian_tol<T: Real>() -> T {
    let floor = T::lit(1e-9);
    let machine = T::eps() * T::lit(1e4);
    if machine > floor {
        machine
    } else {
        floor
    }
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermitian_defect<T: Real>(m: &ComplexMatrix<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in i..n {
            let d = abs2(m[(i, j)] - m[(j, i)].conj()).sqrt();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// `(M + M^H) / 2`.
pub fn hermitian_part<T: Real>(m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let half = creal(T::lit(0.5));
    (m + m.adjoint()) * half
}

fn check_hermitian<T: Real>(m: &ComplexMatrix<T>) -> Result<(), NumericsError> {
    if m.nrows() != m.ncols() {
        return Err(NumericsError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(NumericsError::Empty);
    }
    if !is_finite(m) {
        return Err(NumericsError::NonFinite);
    }
    let scale = m.iter().fold(T::one(), |acc, z| {
        let a = abs2(*z).sqrt();
        if a > acc {
            a
        } else {
            acc
        }
    });
    let defect = hermitian_defect(m);
    if defect > hermitian_tol::<T>() * scale {
        return Err(NumericsError::NotHermitian(defect.as_f64()));
    }
    Ok(())
}

fn is_exactly_diagonal<T: Real>(m: &ComplexMatrix<T>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == czero()))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
pub fn hermitian_eigen<T: Real>(
    m: &ComplexMatrix<T>,
) -> Result<(Vec<T>, ComplexMatrix<T>), NumericsError> {
    check_hermitian(m)?;
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Inverse square root `M^{-1/2}` of a Hermitian positive-definite matrix.
///
/// Eigenvalues below `EIGEN_CLAMP_RATIO * λ_max` are raised to that floor
/// instead of failing. Exactly diagonal inputs take an analytic path, so
/// `σ²I` maps to `σ^{-1} I` with no rounding beyond the scalar sqrt.
pub fn hermitian_inv_sqrt<T: Real>(m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>, NumericsError> {
    check_hermitian(m)?;
    let n = m.nrows();
    let ratio = T::lit(EIGEN_CLAMP_RATIO);

    if is_exactly_diagonal(m) {
        let diag: Vec<T> = (0..n).map(|i| m[(i, i)].re).collect();
        let top = diag.iter().copied().fold(diag[0], |a, b| if b > a { b } else { a });
        if top <= T::zero() {
            return Err(NumericsError::NotPositiveDefinite(top.as_f64()));
        }
        let floor = top * ratio;
        return Ok(ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                let d = if diag[i] < floor { floor } else { diag[i] };
                creal(T::one() / d.sqrt())
            } else {
                czero()
            }
        }));
    }

    let (values, vectors) = hermitian_eigen(m)?;
    let top = values[0];
    if top <= T::zero() {
        return Err(NumericsError::NotPositiveDefinite(top.as_f64()));
    }
    let floor = top * ratio;
    let mut scaled = vectors.clone();
    for (c, &lambda) in values.iter().enumerate() {
        let lambda = if lambda < floor { floor } else { lambda };
        let s = creal(T::one() / lambda.sqrt());
        for r in 0..n {
            scaled[(r, c)] *= s;
        }
    }
    Ok(hermitian_part(&(scaled * vectors.adjoint())))
}

/// Singular value decomposition `A = left · diag(σ) · right^H`.
///
/// Thin form: `left` is `m×r`, `right` is `n×r` with `r = min(m, n)`, both
/// with orthonormal columns (square and unitary when `m = n`).
#[derive(Debug, Clone)]
pub struct SvdResult<T: Real> {
    pub left: ComplexMatrix<T>,
    pub singular_values: Vec<T>,
    pub right: ComplexMatrix<T>,
}

impl<T: Real> SvdResult<T> {
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        let mut scaled = self.left.clone();
        for (c, &s) in self.singular_values.iter().enumerate() {
            for r in 0..scaled.nrows() {
                scaled[(r, c)] *= creal(s);
            }
        }
        scaled * self.right.adjoint()
    }
}

/// Singular values sorted descending; each left singular vector is rotated
/// so its largest-magnitude entry is real and nonnegative (the matching
/// right vector gets the same rotation).
pub fn svd_thin<T: Real>(a: &ComplexMatrix<T>) -> Result<SvdResult<T>, NumericsError> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(NumericsError::Empty);
    }
    if !is_finite(a) {
        return Err(NumericsError::NonFinite);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let v = svd.v_t.expect("right vectors requested").adjoint();
    let r = svd.singular_values.len();

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| {
        svd.singular_values[y]
            .partial_cmp(&svd.singular_values[x])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut left = ComplexMatrix::zeros(a.nrows(), r);
    let mut right = ComplexMatrix::zeros(a.ncols(), r);
    let mut singular_values = Vec::with_capacity(r);
    for (c, &src) in order.iter().enumerate() {
        let mut pivot = 0;
        let mut best = T::zero();
        for i in 0..u.nrows() {
            let m = abs2(u[(i, src)]);
            if m > best {
                best = m;
                pivot = i;
            }
        }
        let p = u[(pivot, src)];
        let mag = abs2(p).sqrt();
        let phase = if mag > T::zero() {
            Complex::new(p.re / mag, -p.im / mag)
        } else {
            creal(T::one())
        };
        for i in 0..u.nrows() {
            left[(i, c)] = u[(i, src)] * phase;
        }
        for i in 0..v.nrows() {
            right[(i, c)] = v[(i, src)] * phase;
        }
        singular_values.push(svd.singular_values[src]);
    }
    Ok(SvdResult {
        left,
        singular_values,
        right,
    })
}

/// Power allocation maximizing `Σ log2(1 + g_n p_n)` under `Σ p_n ≤ budget`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillResult<T> {
    pub powers: Vec<T>,
    pub water_level: T,
    pub active_count: usize,
}

/// Waterfilling over parallel channels with the given gains.
///
/// Candidate active sets are the prefixes of the gains sorted descending,
/// tried from the largest; the first one whose weakest member still gets
/// positive power is the optimum. Equal gains always receive equal power.
pub fn water_fill<T: Real>(gains: &[T], budget: T) -> Result<WaterfillResult<T>, NumericsError> {
    if !(budget > T::zero()) || !budget.is_finite() {
        return Err(NumericsError::InvalidBudget(budget.as_f64()));
    }
    for (index, &g) in gains.iter().enumerate() {
        if !(g >= T::zero()) {
            return Err(NumericsError::InvalidGain {
                index,
                value: g.as_f64(),
            });
        }
    }

    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > T::zero()).collect();
    order.sort_by(|&a, &b| gains[b].partial_cmp(&gains[a]).unwrap_or(std::cmp::Ordering::Equal));

    let mut powers = vec![T::zero(); gains.len()];
    let inv: Vec<T> = order.iter().map(|&i| T::one() / gains[i]).collect();
    let mut prefix_inv = inv.iter().fold(T::zero(), |a, &b| a + b);
    for m in (1..=order.len()).rev() {
        let level = (budget + prefix_inv) / T::from_count(m);
        if level - inv[m - 1] > T::zero() {
            for (pos, &i) in order[..m].iter().enumerate() {
                powers[i] = level - inv[pos];
            }
            return Ok(WaterfillResult {
                powers,
                water_level: level,
                active_count: m,
            });
        }
        prefix_inv -= inv[m - 1];
    }
    Ok(WaterfillResult {
        powers,
        water_level: T::zero(),
        active_count: 0,
    })
}

/// `Σ log2(1 + g_n p_n)`.
pub fn waterfill_objective<T: Real>(gains: &[T], powers: &[T]) -> T {
    gains
        .iter()
        .zip(powers)
        .fold(T::zero(), |acc, (&g, &p)| acc + (T::one() + g * p).log2())
}

/// Solves `A X = B` for Hermitian positive-definite `A`, falling back to LU
/// when the Cholesky factorization breaks down numerically.
pub fn solve_hpd<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Option<ComplexMatrix<T>> {
    if let Some(chol) = Cholesky::new(hermitian_part(a)) {
        let x = chol.solve(b);
        if is_finite(&x) {
            return Some(x);
        }
    }
    a.clone().lu().solve(b).filter(is_finite)
}

/// `log2 det(I + L^{-1} S L^{-H})` where `L L^H = Q`, i.e.
/// `log2 det(I + S Q^{-1})` for Hermitian PSD `S` and Hermitian PD `Q`.
///
/// Falls back to the clamped `Q^{-1/2}` whitening when `Q` is numerically
/// indefinite.
pub fn log2_det_whitened<T: Real>(
    signal: &ComplexMatrix<T>,
    noise: &ComplexMatrix<T>,
) -> Result<T, NumericsError> {
    let n = noise.nrows();
    let whitened = match Cholesky::new(hermitian_part(noise)) {
        Some(chol) => {
            let l = chol.l();
            let y = l
                .solve_lower_triangular(signal)
                .ok_or(NumericsError::NotPositiveDefinite(0.0))?;
            let x = l
                .solve_lower_triangular(&y.adjoint())
                .ok_or(NumericsError::NotPositiveDefinite(0.0))?;
            x.adjoint()
        }
        None => {
            let r = hermitian_inv_sqrt(noise)?;
            &r * signal * &r
        }
    };
    let m = hermitian_part(&(ComplexMatrix::<T>::identity(n, n) + whitened));
    log2_det_hpd(&m)
}

/// `log2 det(M)` for Hermitian positive-definite `M` via Cholesky, with an
/// eigenvalue fallback.
pub fn log2_det_hpd<T: Real>(m: &ComplexMatrix<T>) -> Result<T, NumericsError> {
    if let Some(chol) = Cholesky::new(m.clone()) {
        let l = chol.l();
        let mut acc = T::zero();
        for i in 0..m.nrows() {
            acc += l[(i, i)].re.log2();
        }
        return Ok(acc + acc);
    }
    let (values, _) = hermitian_eigen(m)?;
    let floor = values[0] * T::lit(EIGEN_CLAMP_RATIO);
    if values[0] <= T::zero() {
        return Err(NumericsError::NotPositiveDefinite(values[0].as_f64()));
    }
    Ok(values
        .iter()
        .fold(T::zero(), |acc, &v| acc + if v < floor { floor } else { v }.log2()))
}

/// Euclidean norm of each column.
pub fn column_norms<T: Real>(m: &ComplexMatrix<T>) -> Vec<T> {
    (0..m.ncols())
        .map(|c| m.column(c).iter().fold(T::zero(), |a, z| a + abs2(*z)).sqrt())
        .collect()
}

/// Scales every column to unit norm. Columns with zero or non-finite norm
/// are left untouched and their indices returned.
pub fn normalize_columns<T: Real>(m: &mut ComplexMatrix<T>) -> Vec<usize> {
    let mut bad = Vec::new();
    for (c, norm) in column_norms(m).into_iter().enumerate() {
        if norm > T::zero() && norm.is_finite() {
            let s = creal(T::one() / norm);
            for r in 0..m.nrows() {
                m[(r, c)] *= s;
            }
        } else {
            bad.push(c);
        }
    }
    bad
}

/// Orthonormal basis of `span(G)` closest to `G`: the polar factor
/// `G (G^H G)^{-1/2}`. Also returns `(G^H G)^{-1/2}`.
pub fn polar_orthonormalize<T: Real>(
    g: &ComplexMatrix<T>,
) -> Result<(ComplexMatrix<T>, ComplexMatrix<T>), NumericsError> {
    let gram = hermitian_part(&(g.adjoint() * g));
    let root = hermitian_inv_sqrt(&gram)?;
    Ok((g * &root, root))
}

/// `M · diag(d)` without forming the diagonal.
pub fn scale_columns<T: Real>(m: &ComplexMatrix<T>, d: &[T]) -> ComplexMatrix<T> {
    let mut out = m.clone();
    for (c, &s) in d.iter().enumerate() {
        for r in 0..out.nrows() {
            out[(r, c)] *= creal(s);
        }
    }
    out
}

/// `‖A‖_F`.
pub fn frobenius<T: Real>(m: &ComplexMatrix<T>) -> T {
    m.iter().fold(T::zero(), |a, z| a + abs2(*z)).sqrt()
}

/// `‖A^H A − I‖_F`.
pub fn unitarity_defect<T: Real>(m: &ComplexMatrix<T>) -> T {
    let n = m.ncols();
    frobenius(&(m.adjoint() * m - ComplexMatrix::<T>::identity(n, n)))
}
