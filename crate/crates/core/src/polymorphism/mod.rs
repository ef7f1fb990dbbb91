//! The polymorphism attached to a colligation: its Mellin kernel
//! `K_λ(x, u)`, a brute-force quadrature oracle, the induced operators and
//! the fiber measures whose Mellin transforms are the kernel.

mod basis;
mod fiber;
mod operator;
mod oracle;

pub use basis::{test_basis, TestFunction};
pub use fiber::{polymorphism_measure, polymorphism_measure_via, FiberRoute, PolymorphismSample};
pub use operator::{
    apply_operator, compose_check, markov_conditions, markov_conditions_fiber, norm_estimate,
    write_kernel_csv, MarkovResiduals,
};
pub use oracle::{oracle_kernel, oracle_pushforward, oracle_t_lambda, ORACLE_MAX_DIM};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::colligation::{canonical_form, potapov, CanonicalForm, Colligation, PotapovCoords};
use crate::error::{Error, Result};
use crate::numerics::{gauss_hermite, log_abs_det_raw, norm_sq, GaussianCubature};
use crate::rx::{KernelCoordinates, H_SEAM_TOLERANCE};

/// Distance from a zero of `1 + λ(h_j² − 1)` below which evaluation stops.
pub const BRANCH_POINT_TOLERANCE: f64 = 1e-8;

/// A colligation prepared for kernel evaluation.
#[derive(Clone, Debug)]
pub struct KernelEvaluator {
    cf: CanonicalForm,
    pc: PotapovCoords,
    log_abs_det_g: f64,
    log_normalization: f64,
    seam: Vec<bool>,
}

/// `ln K_λ(x, u) = constant + w Ω wᵗ` with `w = (x, u)`.
#[derive(Clone, Debug)]
pub struct KernelQuadratic {
    pub constant: Complex64,
    pub omega: DMatrix<Complex64>,
}

impl KernelEvaluator {
    pub fn new(g: &Colligation) -> Result<Self> {
        Self::from_canonical(canonical_form(g)?)
    }

    pub fn from_canonical(cf: CanonicalForm) -> Result<Self> {
        let pc = potapov(&cf)?;
        let direct = log_abs_det_raw(&cf.assemble());
        let factored = pc.log_abs_det_p1 + pc.sum_log_h - pc.log_abs_det_t;
        if !((direct - factored).abs() <= 1e-9 * (1.0 + direct.abs())) {
            return Err(Error::InternalInconsistency(format!(
                "ln|det G| is {direct} directly but {factored} through Potapov blocks"
            )));
        }
        let n = cf.n;
        let seam =
            cf.h.iter()
                .map(|h| (h - 1.0).abs() <= H_SEAM_TOLERANCE)
                .collect();
        let ke = Self {
            log_abs_det_g: factored,
            log_normalization: -0.5 * n as f64 * (2.0 * PI).ln(),
            seam,
            cf,
            pc,
        };
        ke.check_normalization()?;
        Ok(ke)
    }

    /// `∫ K_0(0, u) du = 1` pins the constant; checked at assembly.
    fn check_normalization(&self) -> Result<()> {
        let rule = gauss_hermite(8)?;
        let zero = vec![0.0; self.n()];
        let mass = self.integrate_in_u(Complex64::new(0.0, 0.0), &zero, &rule, |_| {
            Complex64::new(1.0, 0.0)
        })?;
        if !((mass - 1.0).norm() <= 1e-9) {
            return Err(Error::InternalInconsistency(format!(
                "kernel at λ = 0 integrates to {mass}, not 1"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.cf.n
    }

    pub fn m(&self) -> usize {
        self.cf.m
    }

    pub fn h(&self) -> &[f64] {
        &self.cf.h
    }

    pub fn canonical(&self) -> &CanonicalForm {
        &self.cf
    }

    pub fn potapov(&self) -> &PotapovCoords {
        &self.pc
    }

    pub fn log_abs_det_g(&self) -> f64 {
        self.log_abs_det_g
    }

    /// `ln (2π)^{−n/2}`, the constant that makes `K_0` a probability kernel
    /// against Lebesgue measure in `u`.
    pub fn log_normalization(&self) -> f64 {
        self.log_normalization
    }

    /// Which `h_j` lie in the seam band `|h_j − 1| ≤ 1e−6`.
    pub fn seam_flags(&self) -> &[bool] {
        &self.seam
    }

    fn check_branch(&self, lambda: Complex64) -> Result<()> {
        for &h in &self.cf.h {
            let z = Complex64::new(1.0, 0.0) + lambda * (h * h - 1.0);
            if z.norm() < BRANCH_POINT_TOLERANCE {
                return Err(Error::BranchPoint(lambda));
            }
        }
        Ok(())
    }

    /// Per-factor coefficient `c_j(λ) = λ²h_j²/(2(1 + λ(h_j² − 1))) − λ/2`
    /// of `ψ_j²`, and `−½ ln(1 + λ(h_j² − 1))`.
    fn factor_terms(&self, lambda: Complex64) -> Vec<(Complex64, Complex64)> {
        self.cf
            .h
            .iter()
            .map(|&h| {
                let one_plus = Complex64::new(1.0, 0.0) + lambda * (h * h - 1.0);
                let coeff = lambda * lambda * (h * h) / (one_plus * 2.0) - lambda * 0.5;
                (coeff, -0.5 * one_plus.ln())
            })
            .collect()
    }

    /// `ln K_λ(x, u)`.
    pub fn log_kernel(&self, lambda: Complex64, x: &[f64], u: &[f64]) -> Result<Complex64> {
        self.check_branch(lambda)?;
        let kc = KernelCoordinates::new(&self.pc, x, u)?;
        let one = Complex64::new(1.0, 0.0);
        // λ-free part and the power of B°
        let mut acc = Complex64::new(self.log_normalization + self.pc.log_abs_det_t, 0.0)
            + lambda * self.log_abs_det_g
            - (one - lambda) * (0.5 * norm_sq(&kc.y))
            + lambda * (0.5 * (kc.x_sq - kc.u_sq - norm_sq(&kc.xi)));
        for ((coeff, log_root), psi) in self.factor_terms(lambda).into_iter().zip(&kc.psi) {
            acc += log_root + coeff * (psi * psi);
        }
        Ok(acc)
    }

    /// `K_λ(x, u)`.
    pub fn kernel(&self, lambda: Complex64, x: &[f64], u: &[f64]) -> Result<Complex64> {
        self.log_kernel(lambda, x, u).map(Complex64::exp)
    }

    /// The quadratic form of `ln K_λ` in `w = (x, u)`:
    /// `Ω = −(1−λ)/2·ZZᵗ + λ/2·diag(I, −I) − λ/2·Y1Y1ᵗ + Σ c_j(λ)·y_j y_jᵗ`
    /// with `Z = [Q; T]`, `Y1 = [P1; R1]` and `y_j` the columns of `[P2; R2]`.
    pub fn quadratic(&self, lambda: Complex64) -> Result<KernelQuadratic> {
        self.check_branch(lambda)?;
        let n = self.n();
        let stack = |top: &DMatrix<f64>, bottom: &DMatrix<f64>| {
            let mut s = DMatrix::zeros(2 * n, top.ncols());
            s.rows_mut(0, n).copy_from(top);
            s.rows_mut(n, n).copy_from(bottom);
            s.map(|v| Complex64::new(v, 0.0))
        };
        let z = stack(&self.pc.q, &self.pc.t);
        let y1 = stack(&self.pc.p1, &self.pc.r1);
        let y2 = stack(&self.pc.p2, &self.pc.r2);
        let one = Complex64::new(1.0, 0.0);
        let mut omega =
            &z * z.transpose() * (-(one - lambda) * 0.5) - &y1 * y1.transpose() * (lambda * 0.5);
        for i in 0..2 * n {
            omega[(i, i)] += if i < n { lambda * 0.5 } else { -lambda * 0.5 };
        }
        let mut constant = Complex64::new(self.log_normalization + self.pc.log_abs_det_t, 0.0)
            + lambda * self.log_abs_det_g;
        for (j, (coeff, log_root)) in self.factor_terms(lambda).into_iter().enumerate() {
            let col = y2.column(j);
            omega += col * col.transpose() * coeff;
            constant += log_root;
        }
        Ok(KernelQuadratic { constant, omega })
    }

    /// `∫ K_λ(x, u) f(u) du` by Gauss–Hermite matched to the real part of
    /// the kernel's quadratic form in `u`.
    pub fn integrate_in_u<F>(
        &self,
        lambda: Complex64,
        x: &[f64],
        rule: &crate::numerics::QuadratureRule,
        f: F,
    ) -> Result<Complex64>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let terms: Vec<Complex64> = self
            .pushforward(lambda, x, rule)?
            .iter()
            .map(|(u, w)| f(u) * w)
            .collect();
        Ok(crate::numerics::pairwise_sum(&terms))
    }

    /// Nodes `u` and weights `K_λ(x, u)·w(u)` of the cubature behind
    /// `integrate_in_u`, for reuse across many test functions.
    pub fn pushforward(
        &self,
        lambda: Complex64,
        x: &[f64],
        rule: &crate::numerics::QuadratureRule,
    ) -> Result<Vec<(Vec<f64>, Complex64)>> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let quad = self.quadratic(lambda)?;
        let re = quad.omega.map(|z| z.re);
        let b = re.view((n, n), (n, n)).into_owned();
        let a = re.view((0, n), (n, n)).into_owned();
        let cub = matched_cubature(&a, &b, x)?;
        Ok(cub
            .points(rule)
            .into_iter()
            .map(|(u, log_w)| {
                let k = self
                    .log_kernel(lambda, x, &u)
                    .expect("branch already checked");
                let w = (k + log_w).exp();
                (u, w)
            })
            .collect())
    }
}

/// Gaussian matched to `exp(2 xᵗA u + uᵗB u)` in `u`: precision `−2B`,
/// mean `−B⁻¹Aᵗx`.
pub(crate) fn matched_cubature(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x: &[f64],
) -> Result<GaussianCubature> {
    let precision = b * -2.0;
    let b_inv = b.clone().try_inverse().ok_or_else(|| {
        Error::InternalInconsistency("kernel quadratic form is degenerate in u".into())
    })?;
    let xv = nalgebra::DVector::from_column_slice(x);
    let mean = -(b_inv * a.transpose() * xv);
    GaussianCubature::from_precision(mean, &precision)
        .map_err(|_| Error::InternalInconsistency("kernel is not integrable in u".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colligation::{coset_act, random_colligation};
    use crate::numerics::{haar_orthogonal, RngStream};

    fn evaluator(n: usize, m: usize, seed: u64) -> (Colligation, KernelEvaluator) {
        let g = random_colligation(n, m, 0.5, &mut RngStream::new(seed, 0)).unwrap();
        let ke = KernelEvaluator::new(&g).unwrap();
        (g, ke)
    }

    fn lambdas() -> Vec<Complex64> {
        vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.3),
        ]
    }

    #[test]
    fn quadratic_form_reproduces_kernel() {
        let (_, ke) = evaluator(2, 4, 1);
        let x = [0.3, -0.8];
        let u = [1.1, 0.2];
        for lam in lambdas() {
            let q = ke.quadratic(lam).unwrap();
            let w: Vec<Complex64> = x
                .iter()
                .chain(&u)
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            let wv = nalgebra::DVector::from_vec(w);
            let via_q = q.constant + (wv.transpose() * &q.omega * &wv)[(0, 0)];
            let direct = ke.log_kernel(lam, &x, &u).unwrap();
            assert!(
                (via_q - direct).norm() < 1e-12 * (1.0 + direct.norm()),
                "{via_q} vs {direct}"
            );
        }
    }

    #[test]
    fn stochastic_at_lambda_zero() {
        let rule = gauss_hermite(20).unwrap();
        for (n, m) in [(1, 2), (1, 3), (2, 3)] {
            let (_, ke) = evaluator(n, m, 5);
            for x in [vec![0.0; n], vec![1.3; n], vec![-0.7; n]] {
                let mass = ke
                    .integrate_in_u(Complex64::new(0.0, 0.0), &x, &rule, |_| {
                        Complex64::new(1.0, 0.0)
                    })
                    .unwrap();
                assert!((mass - 1.0).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn coset_invariance_pointwise() {
        let mut rng = RngStream::new(9, 0);
        let (g, ke) = evaluator(1, 3, 2);
        let u = haar_orthogonal(3, &mut rng);
        let v = haar_orthogonal(3, &mut rng);
        let moved = KernelEvaluator::new(&coset_act(&g, &u, &v).unwrap()).unwrap();
        for lam in lambdas() {
            for (x, y) in [(0.0, 0.0), (0.5, -1.0), (-1.5, 0.7)] {
                let a = ke.kernel(lam, &[x], &[y]).unwrap();
                let b = moved.kernel(lam, &[x], &[y]).unwrap();
                assert!((a - b).norm() < 1e-8 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn branch_point_is_refused() {
        let (_, ke) = evaluator(1, 2, 3);
        let h = ke.h()[0];
        let lam = Complex64::new(-1.0 / (h * h - 1.0), 0.0);
        assert!(matches!(
            ke.kernel(lam, &[0.0], &[0.0]),
            Err(Error::BranchPoint(_))
        ));
    }

    #[test]
    fn seam_factor_is_the_limit() {
        let (_, ke) = evaluator(1, 2, 4);
        let pinned =
            KernelEvaluator::from_canonical(ke.canonical().with_h(vec![1.0]).unwrap()).unwrap();
        assert_eq!(pinned.seam_flags(), &[true]);
        let near =
            KernelEvaluator::from_canonical(ke.canonical().with_h(vec![1.0 + 1e-7]).unwrap())
                .unwrap();
        for lam in lambdas() {
            let a = pinned.kernel(lam, &[0.4], &[-0.3]).unwrap();
            let b = near.kernel(lam, &[0.4], &[-0.3]).unwrap();
            assert!((a - b).norm() < 1e-6 * a.norm());
        }
    }
}
