use std::ops::Deref;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A finite, non-empty real matrix.
///
/// Thin validated wrapper over [`DMatrix<f64>`]; read access goes through
/// `Deref`, so every nalgebra method is available on a `&DenseMatrix`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidMatrix(format!(
                "empty {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        if let Some(bad) = m.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!("non-finite entry {bad}")));
        }
        Ok(Self(m))
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "identity of size zero");
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(
            &nalgebra::DVector::from_column_slice(d),
        ))
    }

    pub fn inner(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.0.len());
        for i in 0..self.0.nrows() {
            out.extend(self.0.row(i).iter());
        }
        out
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &DenseMatrix) -> f64 {
        (&self.0 - &other.0).norm()
    }

    /// Largest entry of `|QᵗQ − I|`.
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.0.ncols();
        let gram = self.0.transpose() * &self.0;
        (gram - DMatrix::<f64>::identity(n, n)).amax()
    }
}

impl Deref for DenseMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl TryFrom<DMatrix<f64>> for DenseMatrix {
    type Error = Error;

    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m)
    }
}

/// Block-diagonal `diag(I_n, u)`.
pub(crate) fn embed_lower(n: usize, u: &DMatrix<f64>) -> DMatrix<f64> {
    let m = u.nrows();
    let mut out = DMatrix::identity(n + m, n + m);
    out.view_mut((n, n), (m, m)).copy_from(u);
    out
}

/// Squared Euclidean norm of a row vector stored as a slice.
pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Row vector times matrix: `x · A`.
pub(crate) fn row_times(x: &[f64], a: &DMatrix<f64>) -> Vec<f64> {
    debug_assert_eq!(x.len(), a.nrows());
    (0..a.ncols())
        .map(|j| x.iter().enumerate().map(|(i, xi)| xi * a[(i, j)]).sum())
        .collect()
}
