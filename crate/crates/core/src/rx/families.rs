use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::law::QuadraticNormalLaw;
use super::{convolve, RxMeasure};
use crate::colligation::PotapovCoords;
use crate::error::{Error, Result};
use crate::numerics::{norm_sq, row_times};

/// Width of the band around `h = 1` where `(h² − 1)⁻¹` forms are refused.
pub const H_SEAM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiParams {
    pub b: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiParams {
    pub h: f64,
    pub psi: f64,
}

/// `Φ[b, M]` as the law of `t = exp(−(b/2)(N + √(2M))²)` with mass `e^M`.
pub fn phi_law(p: PhiParams) -> Result<QuadraticNormalLaw> {
    if !(p.m >= 0.0) || !p.m.is_finite() || !p.b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Φ needs M ≥ 0 and finite b, got b={}, M={}",
            p.b, p.m
        )));
    }
    Ok(QuadraticNormalLaw {
        log_mass: p.m,
        c0: -p.b * p.m,
        c1: -p.b * (2.0 * p.m).sqrt(),
        c2: -0.5 * p.b,
    })
}

/// `Ξ[h, ψ]` as the law of `t = h·exp(−ψ²/2 − hψN − (h² − 1)N²/2)`.
///
/// The same expression covers `h = 1`, where it is the log-normal limit.
pub fn xi_law(p: XiParams) -> Result<QuadraticNormalLaw> {
    if !(p.h > 0.0) || !p.h.is_finite() || !p.psi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Ξ needs h > 0, got h={}, ψ={}",
            p.h, p.psi
        )));
    }
    let psi = p.psi.abs();
    Ok(QuadraticNormalLaw {
        log_mass: 0.0,
        c0: p.h.ln() - 0.5 * psi * psi,
        c1: -p.h * psi,
        c2: -0.5 * (p.h * p.h - 1.0),
    })
}

/// `Φ[b, M]`, with Mellin transform `(1 + bλ)^{−1/2} exp(M/(1 + bλ))`.
pub fn phi_measure(p: PhiParams) -> Result<RxMeasure> {
    RxMeasure::from_law(phi_law(p)?)
}

/// The probability measure `Ξ[h, ψ]`, with Mellin transform
/// `h^λ (1 + λ(h² − 1))^{−1/2} exp(λ²h²ψ²/(2(1 + λ(h² − 1))) − λψ²/2)`.
pub fn xi_measure(p: XiParams) -> Result<RxMeasure> {
    RxMeasure::from_law(xi_law(p)?)
}

/// The vectors `y = xQ + uT`, `ξ = xP1 + uR1`, `ψ = xP2 + uR2` that all
/// kernel formulas are written in.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelCoordinates {
    pub y: Vec<f64>,
    pub xi: Vec<f64>,
    pub psi: Vec<f64>,
    pub x_sq: f64,
    pub u_sq: f64,
}

impl KernelCoordinates {
    pub fn new(pc: &PotapovCoords, x: &[f64], u: &[f64]) -> Result<Self> {
        let n = pc.n();
        for v in [x, u] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        let add =
            |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(p, q)| p + q).collect::<Vec<f64>>();
        Ok(Self {
            y: add(row_times(x, &pc.q), row_times(u, &pc.t)),
            xi: add(row_times(x, &pc.p1), row_times(u, &pc.r1)),
            psi: add(row_times(x, &pc.p2), row_times(u, &pc.r2)),
            x_sq: norm_sq(x),
            u_sq: norm_sq(u),
        })
    }

    /// `½(|y|² + |x|² − |u|² − |ξ|²)`.
    pub fn b_circ_exponent(&self) -> f64 {
        0.5 * (norm_sq(&self.y) + self.x_sq - self.u_sq - norm_sq(&self.xi))
    }
}

/// The atom `A°(x,u)·δ(t − B°(x,u))` with `A° = |det T|·e^{−|y|²/2}` and
/// `B° = (|det P1|/|det T|)·exp(½(|y|² + |x|² − |u|² − |ξ|²))`.
pub fn delta_n_circ(pc: &PotapovCoords, x: &[f64], u: &[f64]) -> Result<RxMeasure> {
    let kc = KernelCoordinates::new(pc, x, u)?;
    let log_mass = pc.log_abs_det_t - 0.5 * norm_sq(&kc.y);
    let log_location = pc.log_abs_det_p1 - pc.log_abs_det_t + kc.b_circ_exponent();
    Ok(RxMeasure::atom_log(log_location, log_mass))
}

/// The atom `A(x,u)·δ(t − B(x,u))` that pairs with the `Φ[h_j² − 1, M_j]`
/// factors, `M_j = h_j²ψ_j²/(2(h_j² − 1)²)`:
/// `A = A°·e^{−Σ M_j}`, `B = B°·Π h_j·exp(Σ ψ_j²/(2(h_j² − 1)))`.
pub fn delta_n(pc: &PotapovCoords, h: &[f64], x: &[f64], u: &[f64]) -> Result<RxMeasure> {
    let kc = KernelCoordinates::new(pc, x, u)?;
    if h.len() != kc.psi.len() {
        return Err(Error::DimensionMismatch {
            expected: kc.psi.len(),
            got: h.len(),
        });
    }
    let mut sum_m = 0.0;
    let mut shift = 0.0;
    for (&hj, &pj) in h.iter().zip(&kc.psi) {
        if (hj - 1.0).abs() <= H_SEAM_TOLERANCE {
            return Err(Error::SingularH(hj));
        }
        let k = hj * hj - 1.0;
        sum_m += hj * hj * pj * pj / (2.0 * k * k);
        shift += hj.ln() + pj * pj / (2.0 * k);
    }
    let log_mass = pc.log_abs_det_t - 0.5 * norm_sq(&kc.y) - sum_m;
    let log_location = pc.log_abs_det_p1 - pc.log_abs_det_t + kc.b_circ_exponent() + shift;
    Ok(RxMeasure::atom_log(log_location, log_mass))
}

/// Result of [`infinite_convolution`].
#[derive(Clone, Debug)]
pub struct TruncatedConvolution {
    pub measure: RxMeasure,
    pub factors_used: usize,
    /// `max_λ Σ_{j ≥ factors_used} |ln Ξ̂_j(λ)|` over `λ ∈ {0, ½, 1}`.
    pub tail_bound: f64,
}

fn xi_log_mellin_abs(p: XiParams, lambda: f64) -> Result<f64> {
    Ok(xi_law(p)?.log_mellin(Complex64::new(lambda, 0.0))?.norm())
}

/// Convolves `Ξ[h_j, ψ_j]` in order, stopping once the closed-form bound on
/// the remaining tail is below `tol`. If even the last factor is above
/// `tol` the list is too short to certify convergence and the full
/// convolution comes back inside [`Error::ToleranceNotMet`].
pub fn infinite_convolution(factors: &[XiParams], tol: f64) -> Result<TruncatedConvolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let len = factors.len();
    // tails[j] = max over λ of Σ_{i ≥ j} |ln Ξ̂_i(λ)|
    let mut tails = vec![0.0; len + 1];
    let mut acc = [0.0f64; 3];
    for j in (0..len).rev() {
        for (slot, lam) in acc.iter_mut().zip([0.0, 0.5, 1.0]) {
            *slot += xi_log_mellin_abs(factors[j], lam)?;
        }
        tails[j] = acc.iter().cloned().fold(0.0, f64::max);
    }
    let used = (0..=len).find(|&j| tails[j] < tol).unwrap_or(len);
    let mut measure = RxMeasure::atom_log(0.0, 0.0);
    for &p in &factors[..used] {
        measure = convolve(&measure, &xi_measure(p)?)?;
    }
    if used == len && len > 0 {
        return Err(Error::ToleranceNotMet {
            achieved: tails[len - 1],
            tol,
            partial: Box::new(measure),
        });
    }
    Ok(TruncatedConvolution {
        measure,
        factors_used: used,
        tail_bound: tails[used],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rx::mellin;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phi_with_b_zero_is_an_atom() {
        let phi = phi_measure(PhiParams { b: 0.0, m: 0.3 }).unwrap();
        let atoms = phi.atoms();
        assert_eq!(atoms.len(), 1);
        assert!((atoms[0].0 - 1.0).abs() < 1e-15);
        assert!((atoms[0].1 - 0.3f64.exp()).abs() < 1e-14);
        for lam in [c(0.0, 0.0), c(0.7, 0.3)] {
            assert!((mellin(&phi, lam).unwrap() - 0.3f64.exp()).norm() < 1e-14);
        }
    }

    #[test]
    fn phi_mellin_matches_closed_form() {
        let phi = phi_measure(PhiParams { b: 2.0, m: 0.0 }).unwrap();
        let v = phi.mellin_numeric(c(0.5, 0.0));
        assert!((v.re - 0.5f64.sqrt()).abs() < 1e-6);
        let phi = phi_measure(PhiParams { b: 2.0, m: 0.3 }).unwrap();
        let v = phi.mellin_numeric(c(0.5, 0.0));
        assert!((v.re - 0.5f64.sqrt() * 0.15f64.exp()).abs() < 1e-6);
        let lam = c(0.5, 0.3);
        let exact = (1.0 + 2.0 * lam).powf(-0.5) * (0.3 / (1.0 + 2.0 * lam)).exp();
        assert!((phi.mellin_numeric(lam) - exact).norm() < 1e-6 * exact.norm());
    }

    #[test]
    fn phi_support_sides() {
        let pos = phi_measure(PhiParams { b: 0.5, m: 0.3 }).unwrap();
        assert!(pos
            .density()
            .iter()
            .all(|&(s, d)| s <= LOG_STEP_SLACK || d == 0.0));
        let neg = phi_measure(PhiParams { b: -0.5, m: 0.3 }).unwrap();
        assert!(neg
            .density()
            .iter()
            .all(|&(s, d)| s >= -LOG_STEP_SLACK || d == 0.0));
    }

    const LOG_STEP_SLACK: f64 = 2.0 * crate::rx::LOG_GRID_STEP;

    #[test]
    fn phi_rejects_negative_m_and_reports_branch_cut() {
        assert!(phi_measure(PhiParams { b: 1.0, m: -0.1 }).is_err());
        let phi = phi_measure(PhiParams { b: -0.5, m: 0.3 }).unwrap();
        assert!(matches!(
            mellin(&phi, c(2.5, 0.0)),
            Err(Error::BranchCut(_))
        ));
    }

    #[test]
    fn xi_at_seam_is_unit_atom() {
        let xi = xi_measure(XiParams { h: 1.0, psi: 0.0 }).unwrap();
        assert_eq!(xi.atoms(), vec![(1.0, 1.0)]);
        assert!((mellin(&xi, c(0.3, 0.5)).unwrap() - 1.0).norm() < 1e-15);
    }

    #[test]
    fn xi_is_probability_and_matches_closed_form() {
        let p = XiParams { h: 1.3, psi: 0.7 };
        let xi = xi_measure(p).unwrap();
        assert!((xi.total_mass() - 1.0).abs() < 1e-8);
        let lam = c(0.5, 0.0);
        let k: f64 = 1.3 * 1.3 - 1.0;
        let exact = 1.3f64.powf(0.5)
            * (1.0 + 0.5 * k).powf(-0.5)
            * (0.25 * 1.69 * 0.49 / (2.0 * (1.0 + 0.5 * k)) - 0.5 * 0.49 / 2.0).exp();
        assert!((xi.mellin_numeric(lam).re - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn xi_rejects_non_positive_h() {
        assert!(xi_measure(XiParams { h: 0.0, psi: 0.1 }).is_err());
        assert!(xi_measure(XiParams { h: -1.0, psi: 0.1 }).is_err());
    }

    #[test]
    fn xi_equals_atom_times_phi() {
        for (h, psi) in [(1.3, 0.7), (0.6, 0.4), (1.8, 0.0)] {
            let k: f64 = h * h - 1.0;
            let m = h * h * psi * psi / (2.0 * k * k);
            let atom = RxMeasure::atom_log(h.ln() + psi * psi / (2.0 * k), -m);
            let phi = phi_measure(PhiParams { b: k, m }).unwrap();
            let prod = convolve(&atom, &phi).unwrap();
            let xi = xi_measure(XiParams { h, psi }).unwrap();
            for lam in [c(0.0, 0.0), c(0.5, 0.3), c(1.0, 0.0)] {
                let a = prod.mellin_numeric(lam);
                let b = xi.mellin_numeric(lam);
                assert!((a - b).norm() < 1e-8 * b.norm(), "h={h} ψ={psi} λ={lam}");
            }
        }
    }

    #[test]
    fn infinite_convolution_of_trivial_factors() {
        let trivial = vec![XiParams { h: 1.0, psi: 0.0 }; 5];
        let out = infinite_convolution(&trivial, 1e-6).unwrap();
        assert_eq!(out.factors_used, 0);
        assert_eq!(out.measure.atoms(), vec![(1.0, 1.0)]);
    }

    #[test]
    fn infinite_convolution_converges() {
        let factors: Vec<XiParams> = (1..=40)
            .map(|j| {
                let e = 0.5f64.powi(j);
                XiParams { h: 1.0 + e, psi: e }
            })
            .collect();
        let out = infinite_convolution(&factors, 1e-6).unwrap();
        assert!(out.factors_used < 40);
        assert!(out.tail_bound < 1e-6);
        let lam = c(0.5, 0.0);
        let product: Complex64 = factors
            .iter()
            .map(|&p| xi_law(p).unwrap().mellin(lam).unwrap())
            .product();
        assert!((out.measure.mellin_numeric(lam) - product).norm() < 1e-5);
        // a short list cannot certify the tail
        let err = infinite_convolution(&factors[..3], 1e-6).unwrap_err();
        assert!(matches!(err, Error::ToleranceNotMet { .. }));
    }
}
