use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{fiber, matched_cubature, KernelEvaluator};
use crate::colligation::{product, Colligation};
use crate::error::{Error, Result};
use crate::numerics::{pairwise_sum, GaussianCubature, QuadratureRule};

/// `x ↦ ∫ K_λ(x, u) f(u) du`, each evaluation by a Gauss–Hermite rule
/// matched to the kernel's own Gaussian factor in `u`.
pub fn apply_operator<'a, F>(
    ke: &'a KernelEvaluator,
    lambda: Complex64,
    f: F,
    quad: &'a QuadratureRule,
) -> impl Fn(&[f64]) -> Result<Complex64> + 'a
where
    F: Fn(&[f64]) -> Complex64 + 'a,
{
    move |x: &[f64]| ke.integrate_in_u(lambda, x, quad, &f)
}

/// `max |∫ K^a(x,u) K^b(u,v) du − K^{a∘b}(x,v)| / max |K^{a∘b}|` over the
/// given `(x, v)` pairs.
pub fn compose_check(
    a: &Colligation,
    b: &Colligation,
    lambda: Complex64,
    grid: &[(Vec<f64>, Vec<f64>)],
    quad: &QuadratureRule,
) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: b.n(),
        });
    }
    let n = a.n();
    let ka = KernelEvaluator::new(a)?;
    let kb = KernelEvaluator::new(b)?;
    let kab = KernelEvaluator::new(&product(a, b)?)?;
    let qa = ka.quadratic(lambda)?.omega.map(|z| z.re);
    let qb = kb.quadratic(lambda)?.omega.map(|z| z.re);
    // exponent in u: 2xᵗA_a u + uᵗ(B_a + B_b)u + 2uᵗA_b v
    let quad_u = qa.view((n, n), (n, n)) + qb.view((0, 0), (n, n));
    let precision = &quad_u * -2.0;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (x, v) in grid {
        let lin = qa.view((0, n), (n, n)).transpose() * DVector::from_column_slice(x)
            + qb.view((0, n), (n, n)) * DVector::from_column_slice(v);
        let mean = precision.clone().lu().solve(&(lin * 2.0)).ok_or_else(|| {
            Error::InternalInconsistency("composition integrand is degenerate".into())
        })?;
        let cub = GaussianCubature::from_precision(mean, &precision).map_err(|_| {
            Error::InternalInconsistency("composition integrand is not integrable".into())
        })?;
        // branch points were ruled out by `quadratic` above
        let value = cub.integrate_log(quad, |u| {
            ka.log_kernel(lambda, x, u).expect("checked")
                + kb.log_kernel(lambda, u, v).expect("checked")
        });
        let direct = kab.kernel(lambda, x, v)?;
        worst = worst.max((value - direct).norm());
        scale = scale.max(direct.norm());
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// The two defining conditions of a polymorphism, as residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkovResiduals {
    /// `sup_x |∫ K_0(x,u) du − 1|`.
    pub residual_a: f64,
    /// `max_g |∫∫ K_1(x,u) g(u) γ(x) dx du / ∫ g dμ − 1|`.
    pub residual_b: f64,
}

fn x_grid(n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                [-2.0, -1.0, 0.0, 1.0, 2.0].into_iter().map(move |t| {
                    let mut q = p.clone();
                    q.push(t);
                    q
                })
            })
            .collect();
    }
    out
}

/// Test functions for the second condition with their Gaussian means:
/// `1`, `u_i²`, `cos u_i` and `Π cos u_i`.
fn dual_family(n: usize) -> Vec<(Box<dyn Fn(&[f64]) -> f64>, f64)> {
    let mut out: Vec<(Box<dyn Fn(&[f64]) -> f64>, f64)> = vec![(Box::new(|_| 1.0), 1.0)];
    for i in 0..n {
        out.push((Box::new(move |u: &[f64]| u[i] * u[i]), 1.0));
        out.push((Box::new(move |u: &[f64]| u[i].cos()), (-0.5f64).exp()));
    }
    out.push((
        Box::new(|u: &[f64]| u.iter().map(|t| t.cos()).product()),
        (-0.5 * n as f64).exp(),
    ));
    out
}

/// Evaluates both conditions with `log_k(λ, x, u)` standing in for the kernel.
fn markov_with<K>(ke: &KernelEvaluator, quad: &QuadratureRule, log_k: K) -> Result<MarkovResiduals>
where
    K: Fn(Complex64, &[f64], &[f64]) -> Result<Complex64>,
{
    let n = ke.n();
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut residual_a: f64 = 0.0;
    let q0 = ke.quadratic(zero)?.omega.map(|z| z.re);
    let a0 = q0.view((0, n), (n, n)).into_owned();
    let b0 = q0.view((n, n), (n, n)).into_owned();
    for x in x_grid(n) {
        let cub = matched_cubature(&a0, &b0, &x)?;
        let mut terms = Vec::new();
        for (u, lw) in cub.points(quad) {
            terms.push((log_k(zero, &x, &u)? + lw).exp().re);
        }
        residual_a = residual_a.max((pairwise_sum(&terms) - 1.0).abs());
    }
    // γ(x)·K_1(x,u) is Gaussian in (x,u) with precision −2Ω_1 + diag(I, 0)
    let mut precision = ke.quadratic(one)?.omega.map(|z| z.re) * -2.0;
    for i in 0..n {
        precision[(i, i)] += 1.0;
    }
    let cub =
        GaussianCubature::from_precision(DVector::zeros(2 * n), &precision).map_err(|_| {
            Error::InternalInconsistency("dual Markov integrand is not integrable".into())
        })?;
    let family = dual_family(n);
    let log_gauss = -0.5 * n as f64 * (2.0 * PI).ln();
    let mut sums = vec![Vec::new(); family.len()];
    for (w, lw) in cub.points(quad) {
        let (x, u) = w.split_at(n);
        let base = (log_k(one, x, u)? + lw + log_gauss
            - 0.5 * x.iter().map(|t| t * t).sum::<f64>())
        .exp()
        .re;
        for (slot, (g, _)) in sums.iter_mut().zip(&family) {
            slot.push(base * g(u));
        }
    }
    let residual_b = sums
        .iter()
        .zip(&family)
        .map(|(s, (_, mean))| (pairwise_sum(s) / mean - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(MarkovResiduals {
        residual_a,
        residual_b,
    })
}

/// Both Markov residuals from the closed-form kernel.
pub fn markov_conditions(ke: &KernelEvaluator, quad: &QuadratureRule) -> Result<MarkovResiduals> {
    markov_with(ke, quad, |lam, x, u| ke.log_kernel(lam, x, u))
}

/// Both Markov residuals with the kernel replaced by the Mellin transform
/// of the fiber measure at each node.
pub fn markov_conditions_fiber(
    ke: &KernelEvaluator,
    quad: &QuadratureRule,
    tol: f64,
) -> Result<MarkovResiduals> {
    markov_with(ke, quad, |lam, x, u| {
        let sample = fiber::polymorphism_measure(ke, x, u, tol)?;
        crate::rx::log_mellin(&sample.measure, lam)
    })
}

/// Orthonormal Hermite polynomials `He_k/√k!`, `k < count`, at `t`.
fn hermite_orthonormal(t: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..count {
        out.push(cur);
        let next = (t * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    out
}

/// Tensor products of [`hermite_orthonormal`] over the coordinates of `p`.
fn hermite_tensor(p: &[f64], count: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for &t in p {
        let one = hermite_orthonormal(t, count);
        out = out
            .iter()
            .flat_map(|a| one.iter().map(move |b| a * b))
            .collect();
    }
    out
}

/// Operator norm of `T_λ` on `L²(μ_n)`, estimated as the largest singular
/// value of its compression `⟨φ_i, T_λ φ_j⟩` to the orthonormal Hermite
/// polynomials of degree below `quad.order` in each coordinate. The entries
/// are integrated with `quad` matched to `γ(x)·K_λ(x,u)`, so narrow kernels
/// are resolved. A compression never exceeds the true norm.
pub fn norm_estimate(
    ke: &KernelEvaluator,
    lambda: Complex64,
    quad: &QuadratureRule,
) -> Result<f64> {
    if (lambda.re - 0.5).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "norm estimate needs Re λ = ½, got {lambda}"
        )));
    }
    let n = ke.n();
    let count = quad.order / 2;
    let mut precision = ke.quadratic(lambda)?.omega.map(|z| z.re) * -2.0;
    for i in 0..n {
        precision[(i, i)] += 1.0;
    }
    let cub = GaussianCubature::from_precision(DVector::zeros(2 * n), &precision)
        .map_err(|_| Error::InternalInconsistency("norm integrand is not integrable".into()))?;
    let log_gauss = -0.5 * n as f64 * (2.0 * PI).ln();
    let size = count.pow(n as u32);
    let points = cub.points(quad);
    let mut left = DMatrix::<Complex64>::zeros(size, points.len());
    let mut right = DMatrix::<Complex64>::zeros(points.len(), size);
    for (k, (w, lw)) in points.iter().enumerate() {
        let (x, u) = w.split_at(n);
        let log_gamma_x = log_gauss - 0.5 * x.iter().map(|t| t * t).sum::<f64>();
        let weight = (ke.log_kernel(lambda, x, u)? + lw + log_gamma_x).exp();
        for (i, a) in hermite_tensor(x, count).iter().enumerate() {
            left[(i, k)] = weight * a;
        }
        for (j, b) in hermite_tensor(u, count).iter().enumerate() {
            right[(k, j)] = Complex64::new(*b, 0.0);
        }
    }
    let gram = left * right;
    let sv = gram
        .try_svd(false, false, 1e-15, 10_000)
        .ok_or_else(|| {
            Error::InternalInconsistency("SVD of the compressed operator did not converge".into())
        })?
        .singular_values;
    Ok(sv.iter().cloned().fold(0.0, f64::max))
}

/// Writes `x, u, Re K, Im K` rows for `n = 1` kernels over a grid.
pub fn write_kernel_csv<W: Write>(
    ke: &KernelEvaluator,
    lambda: Complex64,
    xs: &[f64],
    us: &[f64],
    mut out: W,
) -> Result<()> {
    if ke.n() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: ke.n(),
        });
    }
    writeln!(out, "x,u,re,im")?;
    for &x in xs {
        for &u in us {
            let k = ke.kernel(lambda, &[x], &[u])?;
            writeln!(out, "{x},{u},{},{}", k.re, k.im)?;
        }
    }
    Ok(())
}
