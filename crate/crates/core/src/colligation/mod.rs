//! Finite truncations of colligations: block product, double-coset action,
//! canonical form and Potapov coordinates.

mod canonical;
mod potapov;

pub use canonical::{abs_det, canonical_form, CanonicalForm};
pub use potapov::{potapov, PotapovCoords};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    embed_lower, haar_raw, svd_raw, DenseMatrix, RngStream, INVERTIBILITY_THRESHOLD,
};

/// Residual above which a matrix handed to [`coset_act`] is rejected.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-8;

/// Attempts made by [`random_colligation`] and [`perturb_until_generic`].
pub const RETRY_BUDGET: usize = 100;

/// Representative of an element of `Coll(n)`: an invertible `(n+m)×(n+m)`
/// matrix whose first `n` coordinates are visible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ColligationDoc", into = "ColligationDoc")]
pub struct Colligation {
    n: usize,
    m: usize,
    rep: DenseMatrix,
}

#[derive(Serialize, Deserialize)]
struct ColligationDoc {
    n: usize,
    m: usize,
    rep: Vec<f64>,
}

impl TryFrom<ColligationDoc> for Colligation {
    type Error = Error;

    fn try_from(doc: ColligationDoc) -> Result<Self> {
        let size = doc.n + doc.m;
        Colligation::new(doc.n, DenseMatrix::from_row_slice(size, size, &doc.rep)?)
    }
}

impl From<Colligation> for ColligationDoc {
    fn from(g: Colligation) -> Self {
        ColligationDoc {
            n: g.n,
            m: g.m,
            rep: g.rep.to_row_major(),
        }
    }
}

impl Colligation {
    /// Wraps `rep` with visible dimension `n`; `rep` must be square and
    /// invertible.
    pub fn new(n: usize, rep: DenseMatrix) -> Result<Self> {
        if !rep.is_square() {
            return Err(Error::DimensionMismatch {
                expected: rep.nrows(),
                got: rep.ncols(),
            });
        }
        if n == 0 || n > rep.nrows() {
            return Err(Error::InvalidParameter(format!(
                "visible dimension {n} for a {}x{} matrix",
                rep.nrows(),
                rep.ncols()
            )));
        }
        let s = svd_raw(rep.inner())?;
        if s.sigma_min() <= INVERTIBILITY_THRESHOLD * s.sigma_max() {
            return Err(Error::SingularMatrix {
                sigma_min: s.sigma_min(),
                sigma_max: s.sigma_max(),
            });
        }
        let m = rep.nrows() - n;
        Ok(Self { n, m, rep })
    }

    /// The unit of the semigroup, `m = 0`.
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            m: 0,
            rep: DenseMatrix::identity(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rep(&self) -> &DenseMatrix {
        &self.rep
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Block product `a ∘ b`; the auxiliary space of the result is the
/// auxiliary space of `a` followed by that of `b`.
pub fn product(a: &Colligation, b: &Colligation) -> Result<Colligation> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            got: b.n,
        });
    }
    let (n, ma, mb) = (a.n, a.m, b.m);
    let size = n + ma + mb;
    let mut left = DMatrix::identity(size, size);
    left.view_mut((0, 0), (n + ma, n + ma))
        .copy_from(a.rep.inner());
    let mut right = DMatrix::identity(size, size);
    let br = b.rep.inner();
    right
        .view_mut((0, 0), (n, n))
        .copy_from(&br.view((0, 0), (n, n)));
    right
        .view_mut((0, n + ma), (n, mb))
        .copy_from(&br.view((0, n), (n, mb)));
    right
        .view_mut((n + ma, 0), (mb, n))
        .copy_from(&br.view((n, 0), (mb, n)));
    right
        .view_mut((n + ma, n + ma), (mb, mb))
        .copy_from(&br.view((n, n), (mb, mb)));
    Colligation::new(n, DenseMatrix::new(left * right)?)
}

/// `diag(I_n, u) · g · diag(I_n, v)`.
pub fn coset_act(g: &Colligation, u: &DenseMatrix, v: &DenseMatrix) -> Result<Colligation> {
    for w in [u, v] {
        if w.nrows() != g.m || w.ncols() != g.m {
            return Err(Error::DimensionMismatch {
                expected: g.m,
                got: w.nrows(),
            });
        }
        let resid = w.orthogonality_residual();
        if resid > ORTHOGONALITY_TOLERANCE {
            return Err(Error::NotOrthogonal(resid));
        }
    }
    let rep = embed_lower(g.n, u.inner()) * g.rep.inner() * embed_lower(g.n, v.inner());
    Ok(Colligation {
        n: g.n,
        m: g.m,
        rep: DenseMatrix::new(rep)?,
    })
}

/// Upper-left `(n+k)×(n+k)` corner of the representative.
pub fn truncate(g: &Colligation, k: usize) -> Result<Colligation> {
    if k > g.m {
        return Err(Error::InvalidTruncation { k, m: g.m });
    }
    let size = g.n + k;
    let corner = g.rep.view((0, 0), (size, size)).into_owned();
    Colligation::new(g.n, DenseMatrix::new(corner)?)
}

/// `(I + E)·diag(I_n, Q)` with `Q` Haar and `E` symmetric,
/// `E_ij = decay^{i+j}·U[−1, 1]` (indices from 1). Redrawn until the
/// canonical reduction succeeds.
pub fn random_colligation(
    n: usize,
    m: usize,
    decay: f64,
    rng: &mut RngStream,
) -> Result<Colligation> {
    if n == 0 || m < n {
        return Err(Error::InvalidParameter(format!(
            "need m >= n >= 1, got n={n}, m={m}"
        )));
    }
    if !(decay > 0.0 && decay < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "decay {decay} outside (0, 1)"
        )));
    }
    let size = n + m;
    for _ in 0..RETRY_BUDGET {
        let mut e = DMatrix::zeros(size, size);
        for i in 0..size {
            for j in i..size {
                let v = decay.powi((i + j + 2) as i32) * rng.uniform_in(-1.0, 1.0);
                e[(i, j)] = v;
                e[(j, i)] = v;
            }
        }
        let q = haar_raw(m, rng);
        let rep = (DMatrix::identity(size, size) + e) * embed_lower(n, &q);
        let Ok(rep) = DenseMatrix::new(rep) else {
            continue;
        };
        let Ok(g) = Colligation::new(n, rep) else {
            continue;
        };
        if canonical_form(&g).is_ok() {
            return Ok(g);
        }
    }
    Err(Error::GenerationFailed(RETRY_BUDGET))
}

/// Adds entrywise noise of size `1e−8` until the canonical reduction
/// succeeds. For exploration only; verification code never calls this.
pub fn perturb_until_generic(
    g: &Colligation,
    rng: &mut RngStream,
) -> Result<(Colligation, CanonicalForm)> {
    if let Ok(cf) = canonical_form(g) {
        return Ok((g.clone(), cf));
    }
    const MAGNITUDE: f64 = 1e-8;
    let size = g.n + g.m;
    for _ in 0..RETRY_BUDGET {
        let noise = DMatrix::from_fn(size, size, |_, _| MAGNITUDE * rng.uniform_in(-1.0, 1.0));
        let Ok(rep) = DenseMatrix::new(g.rep.inner() + noise) else {
            continue;
        };
        let Ok(candidate) = Colligation::new(g.n, rep) else {
            continue;
        };
        if let Ok(cf) = canonical_form(&candidate) {
            return Ok((candidate, cf));
        }
    }
    Err(Error::GenerationFailed(RETRY_BUDGET))
}
