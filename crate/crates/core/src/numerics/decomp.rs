use nalgebra::{DMatrix, SVD};

use super::matrix::DenseMatrix;
use super::rng::RngStream;
use crate::error::{Error, Result};

/// Relative singular-value floor below which a matrix counts as singular.
pub const INVERTIBILITY_THRESHOLD: f64 = 1e-12;

/// Thin singular value decomposition `A = U · diag(s) · Vᵗ`, with `s`
/// sorted in descending order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let s =
            DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.singular_values));
        &self.u * s * self.v.transpose()
    }
}

pub fn svd(a: &DenseMatrix) -> Result<Svd> {
    svd_raw(a.inner())
}

pub(crate) fn svd_raw(a: &DMatrix<f64>) -> Result<Svd> {
    let k = a.nrows().min(a.ncols());
    if k == 0 {
        return Ok(Svd {
            u: DMatrix::zeros(a.nrows(), 0),
            singular_values: Vec::new(),
            v: DMatrix::zeros(a.ncols(), 0),
        });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let max_iter = 200 * (a.nrows() + a.ncols());
    let dec = SVD::try_new(a.clone(), true, true, f64::EPSILON, max_iter)
        .ok_or_else(|| Error::InvalidMatrix("SVD did not converge".into()))?;
    let u = dec.u.expect("U requested");
    let v_t = dec.v_t.expect("Vᵗ requested");
    Ok(Svd {
        u,
        singular_values: dec.singular_values.iter().copied().collect(),
        v: v_t.transpose(),
    })
}

/// Extends a matrix with orthonormal columns to a square orthogonal matrix.
pub(crate) fn complete_orthonormal(thin: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, k) = thin.shape();
    if k == m {
        return thin.clone();
    }
    if k == 0 {
        return DMatrix::identity(m, m);
    }
    let qr = thin.clone().qr();
    let mut qt = DMatrix::identity(m, m);
    qr.q_tr_mul(&mut qt);
    let q = qt.transpose();
    let mut full = DMatrix::zeros(m, m);
    full.columns_mut(0, k).copy_from(thin);
    full.columns_mut(k, m - k).copy_from(&q.columns(k, m - k));
    full
}

/// Full SVD: `U` is `rows×rows`, `V` is `cols×cols`, both orthogonal.
pub(crate) fn svd_full(a: &DMatrix<f64>) -> Result<Svd> {
    let thin = svd_raw(a)?;
    Ok(Svd {
        u: complete_orthonormal(&thin.u),
        singular_values: thin.singular_values,
        v: complete_orthonormal(&thin.v),
    })
}

/// Polar decomposition `A = S·U` with `S` symmetric positive definite and
/// `U` orthogonal.
pub fn polar_decompose(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let dec = svd(a)?;
    if dec.sigma_min() <= INVERTIBILITY_THRESHOLD * dec.sigma_max() {
        return Err(Error::SingularMatrix {
            sigma_min: dec.sigma_min(),
            sigma_max: dec.sigma_max(),
        });
    }
    let s_diag =
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&dec.singular_values));
    let s = &dec.u * s_diag * dec.u.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let u = &dec.u * dec.v.transpose();
    Ok((DenseMatrix::new(s)?, DenseMatrix::new(u)?))
}

/// `ln|det A|`; an exactly singular matrix yields `f64::NEG_INFINITY`.
pub fn log_abs_det(a: &DenseMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    Ok(log_abs_det_raw(a.inner()))
}

pub(crate) fn log_abs_det_raw(a: &DMatrix<f64>) -> f64 {
    debug_assert!(a.is_square());
    if a.nrows() == 0 {
        return 0.0;
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let mut acc = 0.0;
    for i in 0..u.nrows() {
        let d = u[(i, i)].abs();
        if d == 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += d.ln();
    }
    acc
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `diag(R)` folded into `Q`.
pub fn haar_orthogonal(dim: usize, rng: &mut RngStream) -> DenseMatrix {
    assert!(dim >= 1, "haar_orthogonal needs dim >= 1");
    DenseMatrix::new(haar_raw(dim, rng)).expect("QR of a finite Gaussian matrix is finite")
}

pub(crate) fn haar_raw(dim: usize, rng: &mut RngStream) -> DMatrix<f64> {
    if dim == 0 {
        return DMatrix::zeros(0, 0);
    }
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.standard_normal());
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}
