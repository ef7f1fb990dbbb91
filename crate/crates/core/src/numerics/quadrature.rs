use std::f64::consts::PI;
use std::ops::Add;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 200;

/// Gauss–Hermite rule for the standard Gaussian weight `γ(x) = e^{−x²/2}/√(2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// `∫ f dγ`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .collect();
        pairwise_sum(&terms)
    }

    /// `∫ f dγ` for complex-valued `f`.
    pub fn integrate_complex<F: Fn(f64) -> Complex64>(&self, f: F) -> Complex64 {
        let terms: Vec<Complex64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(x) * w)
            .collect();
        pairwise_sum(&terms)
    }

    /// Nodes and log-weights of the `dim`-fold tensor product, in
    /// lexicographic order with the last coordinate varying fastest.
    pub fn tensor(&self, dim: usize) -> TensorNodes<'_> {
        TensorNodes {
            rule: self,
            index: vec![0; dim],
            done: false,
        }
    }
}

/// Iterator over a tensor-product grid; yields `(point, ln weight)`.
pub struct TensorNodes<'a> {
    rule: &'a QuadratureRule,
    index: Vec<usize>,
    done: bool,
}

impl Iterator for TensorNodes<'_> {
    type Item = (Vec<f64>, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let point: Vec<f64> = self.index.iter().map(|&i| self.rule.nodes[i]).collect();
        let log_w: f64 = self.index.iter().map(|&i| self.rule.weights[i].ln()).sum();
        let mut pos = self.index.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.index[pos] += 1;
            if self.index[pos] < self.rule.order {
                break;
            }
            self.index[pos] = 0;
        }
        Some((point, log_w))
    }
}

/// Probabilists' Gauss–Hermite rule of the given order.
///
/// Golub–Welsch for starting values, then Newton polishing on the
/// orthonormal Hermite recurrence, which also yields the weights.
pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::InvalidOrder(order));
    }
    if order == 1 {
        return Ok(QuadratureRule {
            order,
            nodes: vec![0.0],
            weights: vec![1.0],
        });
    }
    let jacobi = DMatrix::from_fn(order, order, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    nodes.sort_by(f64::total_cmp);

    let mut weights = Vec::with_capacity(order);
    for x in nodes.iter_mut() {
        for _ in 0..8 {
            let (p, p_prev, _) = orthonormal_hermite(order, *x);
            let step = p / ((order as f64).sqrt() * p_prev);
            *x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, _, sum_sq) = orthonormal_hermite(order, *x);
        weights.push(1.0 / sum_sq);
    }

    // enforce the reflection symmetry of the weight
    for i in 0..order / 2 {
        let j = order - 1 - i;
        let node = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -node;
        nodes[j] = node;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    let total = pairwise_sum(&weights);
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok(QuadratureRule {
        order,
        nodes,
        weights,
    })
}

/// Returns `(p_n(x), p_{n−1}(x), Σ_{k<n} p_k(x)²)` for the orthonormal
/// probabilists' Hermite polynomials.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sum_sq = 0.0;
    for k in 0..n {
        sum_sq += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev, sum_sq)
}

/// Tensor Gauss–Hermite cubature for `∫_{ℝ^d} g(u) du` (Lebesgue), with the
/// rule matched to a Gaussian `N(mean, cov)` that approximates `|g|`.
#[derive(Clone, Debug)]
pub struct GaussianCubature {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianCubature {
    /// `precision` is the inverse covariance; it must be positive definite.
    pub fn from_precision(mean: DVector<f64>, precision: &DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if precision.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: precision.nrows(),
            });
        }
        let sym = (precision + precision.transpose()) * 0.5;
        let cov = sym
            .try_inverse()
            .ok_or_else(|| Error::InvalidMatrix("precision matrix is singular".into()))?;
        let cov = (&cov + cov.transpose()) * 0.5;
        Self::from_covariance(mean, &cov)
    }

    pub fn from_covariance(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidMatrix("covariance is not positive definite".into()))?
            .l();
        let log_det_l: f64 = chol.diagonal().iter().map(|v| v.ln()).sum();
        Ok(Self {
            mean,
            chol,
            log_norm: 0.5 * d as f64 * (2.0 * PI).ln() + log_det_l,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Lower Cholesky factor `L` of the matched covariance.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Maps a standard node `η` to `μ + Lη`.
    pub fn node(&self, eta: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| self.mean[i] + (0..=i).map(|j| self.chol[(i, j)] * eta[j]).sum::<f64>())
            .collect()
    }

    /// Log of the factor that turns a Gaussian rule weight at `η` into a
    /// Lebesgue weight.
    pub fn log_jacobian(&self, eta: &[f64]) -> f64 {
        self.log_norm + 0.5 * eta.iter().map(|e| e * e).sum::<f64>()
    }

    /// `∫ exp(log_g(u)) du`.
    pub fn integrate_log<F>(&self, rule: &QuadratureRule, log_g: F) -> Complex64
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let terms: Vec<Complex64> = rule
            .tensor(self.dim())
            .map(|(eta, log_w)| {
                let u = self.node(&eta);
                (log_g(&u) + log_w + self.log_jacobian(&eta)).exp()
            })
            .collect();
        pairwise_sum(&terms)
    }

    /// Pushforward of the rule: Lebesgue-scaled `(u, ln weight)` pairs.
    pub fn points(&self, rule: &QuadratureRule) -> Vec<(Vec<f64>, f64)> {
        rule.tensor(self.dim())
            .map(|(eta, log_w)| (self.node(&eta), log_w + self.log_jacobian(&eta)))
            .collect()
    }
}

/// Pairwise (cascade) summation; the result does not depend on how work was
/// split across threads, only on the input order.
pub fn pairwise_sum<T>(xs: &[T]) -> T
where
    T: Copy + Default + Add<Output = T>,
{
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        return xs.iter().fold(T::default(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_orders() {
        assert!(matches!(gauss_hermite(0), Err(Error::InvalidOrder(0))));
        assert!(matches!(gauss_hermite(201), Err(Error::InvalidOrder(201))));
        assert!(gauss_hermite(200).is_ok());
    }

    #[test]
    fn weights_normalized_nodes_increasing() {
        for order in [1, 2, 3, 7, 40, 100, 200] {
            let r = gauss_hermite(order).unwrap();
            assert_eq!(r.nodes.len(), order);
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(r.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn gaussian_moments() {
        for order in 2..30 {
            let r = gauss_hermite(order).unwrap();
            assert!(
                (r.integrate(|x| x * x) - 1.0).abs() < 1e-13,
                "order {order}"
            );
            if order >= 3 {
                assert!((r.integrate(|x| x.powi(4)) - 3.0).abs() < 1e-12);
            }
            assert!(r.integrate(|x| x.powi(3)).abs() < 1e-13);
        }
    }

    #[test]
    fn exact_up_to_degree_2n_minus_1() {
        // E[x^{2k}] = (2k−1)!!
        let r = gauss_hermite(10).unwrap();
        let mut dfact = 1.0;
        for k in 1..10 {
            dfact *= (2 * k - 1) as f64;
            let got = r.integrate(|x| x.powi(2 * k));
            assert!(
                (got - dfact).abs() < 1e-10 * dfact,
                "k {k}: {got} vs {dfact}"
            );
        }
    }

    #[test]
    fn exponential_moment_high_order() {
        let r = gauss_hermite(40).unwrap();
        for c in [-3.0, -1.0, 0.5, 2.0, 3.0] {
            let got = r.integrate(|x| (c * x).exp());
            let exact = (c * c / 2.0f64).exp();
            assert!(((got - exact) / exact).abs() < 1e-8);
        }
    }

    #[test]
    fn tensor_grid_covers_every_combination() {
        let r = gauss_hermite(3).unwrap();
        let pts: Vec<_> = r.tensor(2).collect();
        assert_eq!(pts.len(), 9);
        let total: f64 = pts.iter().map(|(_, lw)| lw.exp()).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert_eq!(r.tensor(0).count(), 1);
    }

    #[test]
    fn matched_cubature_integrates_gaussian_exactly() {
        // ∫ exp(−½ uᵗ A u + bᵗu) du = (2π)^{d/2} det(A)^{−1/2} exp(½ bᵗA⁻¹b)
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let b = DVector::from_row_slice(&[0.4, -0.2]);
        let a_inv = a.clone().try_inverse().unwrap();
        let mean = &a_inv * &b;
        let cub = GaussianCubature::from_precision(mean, &a).unwrap();
        let rule = gauss_hermite(5).unwrap();
        let got = cub.integrate_log(&rule, |u| {
            let uv = DVector::from_row_slice(u);
            Complex64::from(-0.5 * (uv.transpose() * &a * &uv)[(0, 0)] + b.dot(&uv))
        });
        let exact = 2.0 * PI / a.determinant().sqrt() * (0.5 * b.dot(&(&a_inv * &b))).exp();
        assert!((got.re - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 4950.0);
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
    }
}
