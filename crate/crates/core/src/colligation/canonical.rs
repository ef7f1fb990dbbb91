use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Colligation;
use crate::error::{Error, Result};
use crate::numerics::{embed_lower, log_abs_det_raw, svd_full, svd_raw, DenseMatrix};

/// Relative floor for the rank of the lower-left block and for `c`.
pub const GENERICITY_THRESHOLD: f64 = 1e-10;

/// Reduced representative
///
/// ```text
/// ( a  b1  b2 )
/// ( c  d1  d2 )
/// ( 0  0   h  )
/// ```
///
/// with `h` a positive diagonal of length `m − n`, sorted descending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CanonicalDoc", into = "CanonicalDoc")]
pub struct CanonicalForm {
    pub n: usize,
    pub m: usize,
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    pub h: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CanonicalDoc {
    n: usize,
    m: usize,
    a: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
    c: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    h: Vec<f64>,
}

fn row_major(a: &DMatrix<f64>) -> Vec<f64> {
    a.transpose().as_slice().to_vec()
}

fn block(rows: usize, cols: usize, data: &[f64], name: &str) -> Result<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(Error::InvalidMatrix(format!(
            "block {name}: {} entries for {rows}x{cols}",
            data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

impl TryFrom<CanonicalDoc> for CanonicalForm {
    type Error = Error;

    fn try_from(doc: CanonicalDoc) -> Result<Self> {
        let (n, m) = (doc.n, doc.m);
        let k = m
            .checked_sub(n)
            .ok_or_else(|| Error::InvalidParameter("m < n".into()))?;
        CanonicalForm::new(
            block(n, n, &doc.a, "a")?,
            block(n, n, &doc.b1, "b1")?,
            block(n, k, &doc.b2, "b2")?,
            block(n, n, &doc.c, "c")?,
            block(n, n, &doc.d1, "d1")?,
            block(n, k, &doc.d2, "d2")?,
            doc.h,
        )
    }
}

impl From<CanonicalForm> for CanonicalDoc {
    fn from(cf: CanonicalForm) -> Self {
        CanonicalDoc {
            n: cf.n,
            m: cf.m,
            a: row_major(&cf.a),
            b1: row_major(&cf.b1),
            b2: row_major(&cf.b2),
            c: row_major(&cf.c),
            d1: row_major(&cf.d1),
            d2: row_major(&cf.d2),
            h: cf.h,
        }
    }
}

impl CanonicalForm {
    /// Builds a canonical form from explicit blocks. `h` is sorted
    /// descending; blocks `b2`, `d2` are permuted to match.
    pub fn new(
        a: DMatrix<f64>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
        c: DMatrix<f64>,
        d1: DMatrix<f64>,
        d2: DMatrix<f64>,
        h: Vec<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        let k = h.len();
        let shapes = [
            (&a, (n, n), "a"),
            (&b1, (n, n), "b1"),
            (&b2, (n, k), "b2"),
            (&c, (n, n), "c"),
            (&d1, (n, n), "d1"),
            (&d2, (n, k), "d2"),
        ];
        for (blk, shape, name) in shapes {
            if blk.shape() != shape {
                return Err(Error::InvalidMatrix(format!(
                    "block {name} is {:?}, expected {shape:?}",
                    blk.shape()
                )));
            }
            if blk.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMatrix(format!(
                    "block {name} has a non-finite entry"
                )));
            }
        }
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if let Some(bad) = h.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "h entry {bad} is not positive"
            )));
        }
        let sc = svd_raw(&c)?;
        if sc.sigma_min() <= GENERICITY_THRESHOLD * sc.sigma_max().max(1.0) {
            return Err(Error::NonGenericColligation(format!(
                "c is singular (smallest singular value {:e})",
                sc.sigma_min()
            )));
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| h[j].total_cmp(&h[i]));
        let permute = |x: &DMatrix<f64>| DMatrix::from_fn(n, k, |r, j| x[(r, order[j])]);
        let cf = Self {
            n,
            m: n + k,
            b2: permute(&b2),
            d2: permute(&d2),
            h: order.iter().map(|&j| h[j]).collect(),
            a,
            b1,
            c,
            d1,
        };
        let g = cf.assemble();
        if log_abs_det_raw(&g) == f64::NEG_INFINITY {
            return Err(Error::SingularMatrix {
                sigma_min: 0.0,
                sigma_max: g.amax(),
            });
        }
        Ok(cf)
    }

    /// The full `(n+m)×(n+m)` matrix with exact zeros in the third block row.
    pub fn assemble(&self) -> DMatrix<f64> {
        let (n, m) = (self.n, self.m);
        let k = m - n;
        let mut g = DMatrix::zeros(n + m, n + m);
        g.view_mut((0, 0), (n, n)).copy_from(&self.a);
        g.view_mut((0, n), (n, n)).copy_from(&self.b1);
        g.view_mut((0, 2 * n), (n, k)).copy_from(&self.b2);
        g.view_mut((n, 0), (n, n)).copy_from(&self.c);
        g.view_mut((n, n), (n, n)).copy_from(&self.d1);
        g.view_mut((n, 2 * n), (n, k)).copy_from(&self.d2);
        for (j, &hj) in self.h.iter().enumerate() {
            g[(2 * n + j, 2 * n + j)] = hj;
        }
        g
    }

    pub fn to_colligation(&self) -> Result<Colligation> {
        Colligation::new(self.n, DenseMatrix::new(self.assemble())?)
    }

    /// Same blocks with `h` replaced; used to pin entries to the seam `h = 1`.
    pub fn with_h(&self, h: Vec<f64>) -> Result<Self> {
        if h.len() != self.h.len() {
            return Err(Error::DimensionMismatch {
                expected: self.h.len(),
                got: h.len(),
            });
        }
        Self::new(
            self.a.clone(),
            self.b1.clone(),
            self.b2.clone(),
            self.c.clone(),
            self.d1.clone(),
            self.d2.clone(),
            h,
        )
    }
}

/// Reduces `g` to canonical form by orthogonal transformations of the
/// auxiliary block.
pub fn canonical_form(g: &Colligation) -> Result<CanonicalForm> {
    let (n, m) = (g.n(), g.m());
    if m < n {
        return Err(Error::NonGenericColligation(format!(
            "auxiliary dimension {m} is smaller than {n}"
        )));
    }
    let k = m - n;
    let rep = g.rep().inner();
    let scale = svd_raw(rep)?.sigma_max();

    // compress the lower-left block into its top n rows
    let lower_left = rep.view((n, 0), (m, n)).into_owned();
    let s21 = svd_full(&lower_left)?;
    if s21.sigma_min() <= GENERICITY_THRESHOLD * scale {
        return Err(Error::NonGenericColligation(format!(
            "lower-left block has rank below {n} (smallest singular value {:e})",
            s21.sigma_min()
        )));
    }
    let left = s21.u.transpose();
    let mut work = embed_lower(n, &left) * rep;

    // two-sided reduction of the remaining (m−n)×m strip to (0 h)
    let mut h = Vec::new();
    if k > 0 {
        let strip = work.view((2 * n, n), (k, m)).into_owned();
        let sh = svd_full(&strip)?;
        h = sh.singular_values.clone();
        let mut rot = DMatrix::identity(n + m, n + m);
        rot.view_mut((2 * n, 2 * n), (k, k))
            .copy_from(&sh.u.transpose());
        work = rot * work;
        let mut v = DMatrix::zeros(m, m);
        v.columns_mut(0, n).copy_from(&sh.v.columns(k, n));
        v.columns_mut(n, k).copy_from(&sh.v.columns(0, k));
        work *= embed_lower(n, &v);
    }
    if let Some(&hmin) = h.last() {
        if hmin <= GENERICITY_THRESHOLD * scale {
            return Err(Error::NonGenericColligation(format!(
                "reduced block has a zero singular value ({hmin:e})"
            )));
        }
    }

    // the reduction must have produced the zero pattern
    let mut pattern = 0.0f64;
    for i in 0..k {
        for j in 0..(n + m) {
            let expected = if j == 2 * n + i { h[i] } else { 0.0 };
            pattern = pattern.max((work[(2 * n + i, j)] - expected).abs());
        }
    }
    if pattern > 1e-8 * scale.max(1.0) {
        return Err(Error::InternalInconsistency(format!(
            "canonical zero pattern violated by {pattern:e}"
        )));
    }
    let blk =
        |r: usize, c: usize, rows: usize, cols: usize| work.view((r, c), (rows, cols)).into_owned();
    CanonicalForm::new(
        blk(0, 0, n, n),
        blk(0, n, n, n),
        blk(0, 2 * n, n, k),
        blk(n, 0, n, n),
        blk(n, n, n, n),
        blk(n, 2 * n, n, k),
        h,
    )
}

/// `ln|det G|`, cross-checked against `ln|det P1| + Σ ln h − ln|det T|`.
pub fn abs_det(cf: &CanonicalForm) -> Result<f64> {
    let direct = log_abs_det_raw(&cf.assemble());
    let pc = super::potapov(cf)?;
    let factored = pc.log_abs_det_p1 + pc.sum_log_h - pc.log_abs_det_t;
    let gap = (direct - factored).abs();
    if !(gap <= 1e-6 * (1.0 + direct.abs())) {
        return Err(Error::InternalInconsistency(format!(
            "ln|det G| is {direct} directly but {factored} through Potapov blocks"
        )));
    }
    if gap > 1e-9 * (1.0 + direct.abs()) {
        log::warn!("determinant routes differ by {gap:e}");
    }
    Ok(direct)
}
