//! The standard Gaussian measure on `ℝⁿ` and its linear symmetries.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{
    log_abs_det, norm_sq, row_times, svd, DenseMatrix, RngStream, INVERTIBILITY_THRESHOLD,
};

/// `(ℝⁿ, μ_n)` with `μ_n` the standard Gaussian product measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussianSpace {
    n: usize,
}

impl GaussianSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "dimension must be at least 1".into(),
            ));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `count` independent draws from `μ_n`.
    pub fn sample(&self, count: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..self.n).map(|_| rng.standard_normal()).collect())
            .collect()
    }
}

/// Invertible `A` acting on row vectors by `x ↦ xA`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSymmetry {
    a: DenseMatrix,
    log_abs_det: f64,
}

impl LinearSymmetry {
    pub fn new(a: DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        let s = svd(&a)?;
        if s.sigma_min() <= INVERTIBILITY_THRESHOLD * s.sigma_max() {
            return Err(Error::SingularMatrix {
                sigma_min: s.sigma_min(),
                sigma_max: s.sigma_max(),
            });
        }
        let log_abs_det = log_abs_det(&a)?;
        Ok(Self { a, log_abs_det })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    /// `AB`, which acts as "first `A`, then `B`" on row vectors.
    pub fn then(&self, other: &LinearSymmetry) -> Result<LinearSymmetry> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: other.n(),
            });
        }
        LinearSymmetry::new(DenseMatrix::new(self.a.inner() * other.a.inner())?)
    }
}

/// `xA`.
pub fn act(x: &[f64], a: &LinearSymmetry) -> Result<Vec<f64>> {
    if x.len() != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: x.len(),
        });
    }
    Ok(row_times(x, a.a.inner()))
}

/// `ln dμ(xA)/dμ(x) = ln|det A| − ½|xA|² + ½|x|²`.
pub fn radon_nikodym(a: &LinearSymmetry, x: &[f64]) -> Result<f64> {
    let xa = act(x, a)?;
    Ok(a.log_abs_det - 0.5 * norm_sq(&xa) + 0.5 * norm_sq(x))
}

/// Same derivative for `A = diag(1 + t)`:
/// `Σ_j ln(1 + t_j) − (2t_j + t_j²) x_j² / 2`.
pub fn radon_nikodym_diagonal(t: &[f64], x: &[f64]) -> Result<f64> {
    if t.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            got: x.len(),
        });
    }
    if let Some(bad) = t.iter().find(|&&tj| !(tj > -1.0)) {
        return Err(Error::InvalidParameter(format!(
            "t_j = {bad} must exceed -1"
        )));
    }
    Ok(t.iter()
        .zip(x)
        .map(|(tj, xj)| tj.ln_1p() - 0.5 * (2.0 * tj + tj * tj) * xj * xj)
        .sum())
}

pub(crate) fn warn_outside_strip(lambda: Complex64) {
    if !(0.0..=1.0).contains(&lambda.re) {
        log::warn!("λ = {lambda} lies outside the strip 0 ≤ Re λ ≤ 1");
    }
}

/// `(T_λ(A) f)(x) = f(xA)·exp(λ·rn(A, x))`.
pub fn apply_t_lambda<F>(
    a: &LinearSymmetry,
    lambda: Complex64,
    f: F,
    x: &[f64],
) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64,
{
    warn_outside_strip(lambda);
    let xa = act(x, a)?;
    let rn = radon_nikodym(a, x)?;
    Ok(f(&xa) * (lambda * rn).exp())
}

/// `|rn(AB, x) − rn(A, x) − rn(B, xA)|`.
pub fn rn_cocycle_check(a: &LinearSymmetry, b: &LinearSymmetry, x: &[f64]) -> Result<f64> {
    let ab = a.then(b)?;
    let xa = act(x, a)?;
    Ok((radon_nikodym(&ab, x)? - radon_nikodym(a, x)? - radon_nikodym(b, &xa)?).abs())
}
