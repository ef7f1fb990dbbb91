//! Brute-force evaluation of `T_λ(G)` straight from the assembled matrix:
//!
//! `T_λ f(x) = |det G|^λ ∫ f((wG)_{1..n}) exp(−λ/2·w(GGᵗ − I)wᵗ) dμ_m(v)`,
//! `w = (x, v)`. No canonical form and no Potapov coordinates are involved.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::colligation::Colligation;
use crate::error::{Error, Result};
use crate::numerics::{
    gauss_hermite, log_abs_det_raw, pairwise_sum, GaussianCubature, QuadratureRule,
};

/// Largest number of integration variables (`m`) the oracle accepts.
pub const ORACLE_MAX_DIM: usize = 6;
/// Order cap for the inner `z` rule once there are two or more `z` variables.
const INNER_ORDER_CAP: usize = 20;

struct Setup {
    n: usize,
    m: usize,
    g11: DMatrix<f64>,
    /// Upper triangle of the QR factor of the lower-left block.
    c: DMatrix<f64>,
    /// `G̃G̃ᵗ − I` for the rotated `G̃ = diag(I, Wᵗ)·G`.
    form: DMatrix<f64>,
    log_abs_det: f64,
}

impl Setup {
    fn new(g: &Colligation) -> Result<Self> {
        let (n, m) = (g.n(), g.m());
        if m > ORACLE_MAX_DIM {
            return Err(Error::TooLarge {
                dim: m,
                limit: ORACLE_MAX_DIM,
            });
        }
        if m < n {
            return Err(Error::NonGenericColligation(format!(
                "aux size {m} below n = {n}"
            )));
        }
        let rep: &DMatrix<f64> = g.rep();
        // rotate the aux coordinates so that the lower-left block becomes [c; 0]
        let mut padded = DMatrix::zeros(m, m);
        padded
            .columns_mut(0, n)
            .copy_from(&rep.view((n, 0), (m, n)));
        let w = padded.qr().q();
        let mut rotated = rep.clone();
        let lower = w.transpose() * rep.rows(n, m);
        rotated.rows_mut(n, m).copy_from(&lower);
        let c = rotated.view((n, 0), (n, n)).into_owned();
        let scale = rep.norm();
        if c.determinant().abs() <= 1e-12 * scale.powi(n as i32) {
            return Err(Error::NonGenericColligation(
                "lower-left block has rank below n".into(),
            ));
        }
        let mut form = &rotated * rotated.transpose();
        for i in 0..n + m {
            form[(i, i)] -= 1.0;
        }
        Ok(Self {
            n,
            m,
            g11: rep.view((0, 0), (n, n)).into_owned(),
            c,
            form,
            log_abs_det: log_abs_det_raw(rep),
        })
    }

    fn block(&self, r0: usize, rn: usize, c0: usize, cn: usize) -> DMatrix<f64> {
        self.form.view((r0, c0), (rn, cn)).into_owned()
    }

    /// `ln` of the integrand against Lebesgue `dv`.
    fn log_integrand(&self, lambda: Complex64, w: &[f64]) -> Complex64 {
        let v = &w[self.n..];
        let wv = DVector::from_column_slice(w);
        let quad = (wv.transpose() * &self.form * &wv)[(0, 0)];
        let gauss =
            -0.5 * v.iter().map(|t| t * t).sum::<f64>() - 0.5 * self.m as f64 * (2.0 * PI).ln();
        Complex64::new(gauss, 0.0) + lambda * (self.log_abs_det - 0.5 * quad)
    }

    fn u_of(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                (0..self.n).map(|i| x[i] * self.g11[(i, j)]).sum::<f64>()
                    + (0..self.n).map(|i| y[i] * self.c[(i, j)]).sum::<f64>()
            })
            .collect()
    }
}

fn inner_rule(quad: &QuadratureRule, z_dim: usize) -> Result<QuadratureRule> {
    if z_dim <= 1 {
        Ok(quad.clone())
    } else {
        gauss_hermite(quad.order.min(INNER_ORDER_CAP))
    }
}

/// The measure `T_λ(G)` puts on `u` at fixed `x`, as weighted nodes:
/// `T_λ f(x) ≈ Σ weight·f(u)`.
pub fn oracle_pushforward(
    g: &Colligation,
    lambda: Complex64,
    x: &[f64],
    quad: &QuadratureRule,
) -> Result<Vec<(Vec<f64>, Complex64)>> {
    let s = Setup::new(g)?;
    let (n, m) = (s.n, s.m);
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    // Gaussian in v matched to the real part of the exponent
    let re = lambda.re;
    let m_vv = s.block(n, m, n, m);
    let m_vx = s.block(n, m, 0, n);
    let precision = DMatrix::identity(m, m) + &m_vv * re;
    let xv = DVector::from_column_slice(x);
    let rhs = &m_vx * &xv * (-re);
    let center = precision
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InternalInconsistency("oracle precision is singular".into()))?;
    let cub = GaussianCubature::from_precision(center, &precision)?;
    let inner = inner_rule(quad, m - n)?;
    let inner_nodes: Vec<(Vec<f64>, f64)> = inner.tensor(m - n).collect();
    let mut out = Vec::new();
    for (eta_y, lw_y) in quad.tensor(n) {
        let mut terms = Vec::with_capacity(inner_nodes.len());
        let mut y = Vec::new();
        for (eta_z, lw_z) in &inner_nodes {
            let eta: Vec<f64> = eta_y.iter().chain(eta_z).cloned().collect();
            let v = cub.node(&eta);
            if y.is_empty() {
                // the Cholesky factor is lower triangular, so y depends on eta_y only
                y = v[..n].to_vec();
            }
            let w: Vec<f64> = x.iter().chain(&v).cloned().collect();
            let log_w = lw_y + lw_z + cub.log_jacobian(&eta);
            terms.push((s.log_integrand(lambda, &w) + log_w).exp());
        }
        out.push((s.u_of(x, &y), pairwise_sum(&terms)));
    }
    Ok(out)
}

/// `T_λ(G) f(x)` by tensor Gauss–Hermite.
pub fn oracle_t_lambda<F>(
    g: &Colligation,
    lambda: Complex64,
    f: F,
    x: &[f64],
    quad: &QuadratureRule,
) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64,
{
    let nodes = oracle_pushforward(g, lambda, x, quad)?;
    let terms: Vec<Complex64> = nodes.iter().map(|(u, w)| f(u) * w).collect();
    Ok(pairwise_sum(&terms))
}

/// The kernel `K_λ(x, u)` of `T_λ(G)` against Lebesgue `du`, integrating
/// only over the `z` variables.
pub fn oracle_kernel(
    g: &Colligation,
    lambda: Complex64,
    x: &[f64],
    u: &[f64],
    quad: &QuadratureRule,
) -> Result<Complex64> {
    let s = Setup::new(g)?;
    let (n, m) = (s.n, s.m);
    for v in [x, u] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    // u = x g11 + y c
    let shifted: Vec<f64> = (0..n)
        .map(|j| u[j] - (0..n).map(|i| x[i] * s.g11[(i, j)]).sum::<f64>())
        .collect();
    let c_inv =
        s.c.clone()
            .try_inverse()
            .ok_or_else(|| Error::NonGenericColligation("lower-left block is singular".into()))?;
    let y: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| shifted[i] * c_inv[(i, j)]).sum())
        .collect();
    let log_jac = -log_abs_det_raw(&s.c);
    let head: Vec<f64> = x.iter().chain(&y).cloned().collect();
    let k = m - n;
    if k == 0 {
        return Ok((s.log_integrand(lambda, &head) + log_jac).exp());
    }
    let re = lambda.re;
    let m_zz = s.block(2 * n, k, 2 * n, k);
    let m_zh = s.block(2 * n, k, 0, 2 * n);
    let precision = DMatrix::identity(k, k) + &m_zz * re;
    let rhs = &m_zh * DVector::from_column_slice(&head) * (-re);
    let center = precision
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InternalInconsistency("oracle precision is singular".into()))?;
    let cub = GaussianCubature::from_precision(center, &precision)?;
    let inner = inner_rule(quad, k)?;
    let terms: Vec<Complex64> = cub
        .points(&inner)
        .into_iter()
        .map(|(z, lw)| {
            let w: Vec<f64> = head.iter().chain(&z).cloned().collect();
            (s.log_integrand(lambda, &w) + lw + log_jac).exp()
        })
        .collect();
    Ok(pairwise_sum(&terms))
}
