use nalgebra::DMatrix;

use super::canonical::{CanonicalForm, GENERICITY_THRESHOLD};
use crate::error::{Error, Result};
use crate::numerics::{log_abs_det_raw, svd_raw};

/// Potapov coordinates of a canonical form:
/// `T = c⁻¹`, `Q = −aT`, `P = b + Qd`, `R = Td`, split as `P = (P1 P2)`,
/// `R = (R1 R2)` along the `(n, m−n)` column blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct PotapovCoords {
    pub p1: DMatrix<f64>,
    pub p2: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r1: DMatrix<f64>,
    pub r2: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub log_abs_det_t: f64,
    pub log_abs_det_p1: f64,
    pub sum_log_h: f64,
}

pub fn potapov(cf: &CanonicalForm) -> Result<PotapovCoords> {
    let sc = svd_raw(&cf.c)?;
    if sc.sigma_min() <= GENERICITY_THRESHOLD * sc.sigma_max().max(1.0) {
        return Err(Error::NonGenericColligation("c is not invertible".into()));
    }
    let t =
        cf.c.clone()
            .try_inverse()
            .ok_or_else(|| Error::NonGenericColligation("c is not invertible".into()))?;
    let q = -&cf.a * &t;
    let p1 = &cf.b1 + &q * &cf.d1;
    let p2 = &cf.b2 + &q * &cf.d2;
    let r1 = &t * &cf.d1;
    let r2 = &t * &cf.d2;
    Ok(PotapovCoords {
        log_abs_det_t: log_abs_det_raw(&t),
        log_abs_det_p1: log_abs_det_raw(&p1),
        sum_log_h: cf.h.iter().map(|v| v.ln()).sum(),
        p1,
        p2,
        q,
        r1,
        r2,
        t,
    })
}

impl PotapovCoords {
    pub fn n(&self) -> usize {
        self.t.nrows()
    }

    /// Inverse coordinate map, returning `(a, b1, b2, c, d1, d2)`.
    #[allow(clippy::type_complexity)]
    pub fn to_blocks(
        &self,
    ) -> Result<(
        DMatrix<f64>,
        DMatrix<f64>,
        DMatrix<f64>,
        DMatrix<f64>,
        DMatrix<f64>,
        DMatrix<f64>,
    )> {
        let c = self
            .t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NonGenericColligation("T is not invertible".into()))?;
        let a = -&self.q * &c;
        let d1 = &c * &self.r1;
        let d2 = &c * &self.r2;
        let b1 = &self.p1 - &self.q * &c * &self.r1;
        let b2 = &self.p2 - &self.q * &c * &self.r2;
        Ok((a, b1, b2, c, d1, d2))
    }

    /// Rebuilds the canonical form given its `h`.
    pub fn to_canonical(&self, h: Vec<f64>) -> Result<CanonicalForm> {
        let (a, b1, b2, c, d1, d2) = self.to_blocks()?;
        CanonicalForm::new(a, b1, b2, c, d1, d2, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colligation::{canonical_form, random_colligation};
    use crate::numerics::RngStream;

    #[test]
    fn direct_substitution_with_a_zero_c_identity() {
        let b1 = DMatrix::from_row_slice(1, 1, &[2.0]);
        let b2 = DMatrix::from_row_slice(1, 1, &[0.5]);
        let d1 = DMatrix::from_row_slice(1, 1, &[0.7]);
        let d2 = DMatrix::from_row_slice(1, 1, &[-0.2]);
        let cf = CanonicalForm::new(
            DMatrix::zeros(1, 1),
            b1.clone(),
            b2.clone(),
            DMatrix::identity(1, 1),
            d1.clone(),
            d2.clone(),
            vec![1.1],
        )
        .unwrap();
        let pc = potapov(&cf).unwrap();
        assert_eq!(pc.p1, b1);
        assert_eq!(pc.p2, b2);
        assert_eq!(pc.q, DMatrix::zeros(1, 1));
        assert_eq!(pc.r1, d1);
        assert_eq!(pc.r2, d2);
        assert_eq!(pc.t, DMatrix::identity(1, 1));
    }

    #[test]
    fn round_trip_and_cached_determinants() {
        for seed in 0..20 {
            let g = random_colligation(2, 4, 0.6, &mut RngStream::new(seed, 0)).unwrap();
            let cf = canonical_form(&g).unwrap();
            let pc = potapov(&cf).unwrap();
            let back = pc.to_canonical(cf.h.clone()).unwrap();
            let resid = [
                (&back.a - &cf.a).amax(),
                (&back.b1 - &cf.b1).amax(),
                (&back.b2 - &cf.b2).amax(),
                (&back.c - &cf.c).amax(),
                (&back.d1 - &cf.d1).amax(),
                (&back.d2 - &cf.d2).amax(),
            ];
            assert!(resid.iter().all(|&r| r < 1e-10), "{resid:?}");
            assert!((pc.log_abs_det_t + log_abs_det_raw(&cf.c)).abs() < 1e-12);
            assert!((&pc.t * &cf.c - DMatrix::<f64>::identity(2, 2)).amax() < 1e-10);
        }
    }
}
