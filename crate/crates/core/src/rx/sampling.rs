use super::RxMeasure;
use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Inverse-CDF draws of `t` from a probability measure. Grid cells are
/// sampled with a triangular jitter of one step, the inverse of the hat
/// deposition used to build them.
pub fn sample_measure(mu: &RxMeasure, count: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    let mass = mu.total_mass();
    if !((mass - 1.0).abs() <= 1e-8) {
        return Err(Error::NotProbability(mass));
    }
    let scale = mu.log_scale().exp();
    let mut support: Vec<(f64, f64, bool)> = mu
        .atoms
        .iter()
        .map(|&(s, w)| (s, w * scale, false))
        .collect();
    let step = mu.grid.as_ref().map_or(0.0, |g| g.step());
    if let Some(g) = &mu.grid {
        support.extend(
            g.points()
                .filter(|p| p.1 > 0.0)
                .map(|(s, w)| (s, w * scale, true)),
        );
    }
    support.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cumulative = Vec::with_capacity(support.len());
    let mut acc = 0.0;
    for &(_, w, _) in &support {
        acc += w;
        cumulative.push(acc);
    }
    let total = acc;
    let draws = (0..count)
        .map(|_| {
            let target = rng.uniform() * total;
            let idx = cumulative
                .partition_point(|&c| c <= target)
                .min(support.len() - 1);
            let (s, _, spread) = support[idx];
            let jitter = if spread {
                step * (rng.uniform() + rng.uniform() - 1.0)
            } else {
                0.0
            };
            (s + jitter).exp()
        })
        .collect();
    Ok(draws)
}

/// Two-sample Kolmogorov–Smirnov test; returns `(D, p-value)` using the
/// asymptotic Kolmogorov distribution.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    (d, kolmogorov_q(lambda))
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rx::{convolve, xi_measure, XiParams};
    use num_complex::Complex64;

    #[test]
    fn unit_atom_samples_are_one() {
        let one = RxMeasure::atom(1.0, 1.0).unwrap();
        let s = sample_measure(&one, 10, &mut RngStream::new(0, 0)).unwrap();
        assert!(s.iter().all(|&t| t == 1.0));
    }

    #[test]
    fn rejects_unnormalized() {
        let heavy = RxMeasure::atom(1.0, 2.0).unwrap();
        assert!(matches!(
            sample_measure(&heavy, 1, &mut RngStream::new(0, 0)),
            Err(Error::NotProbability(_))
        ));
    }

    #[test]
    fn empirical_sqrt_moment() {
        let xi = xi_measure(XiParams { h: 1.3, psi: 0.7 }).unwrap();
        let draws = sample_measure(&xi, 100_000, &mut RngStream::new(3, 0)).unwrap();
        let roots: Vec<f64> = draws.iter().map(|t| t.sqrt()).collect();
        let count = roots.len() as f64;
        let mean = roots.iter().sum::<f64>() / count;
        let var = roots.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (count - 1.0);
        let exact = xi.mellin_numeric(Complex64::new(0.5, 0.0)).re;
        assert!((mean - exact).abs() < 3.0 * (var / count).sqrt());
    }

    #[test]
    fn convolution_samples_like_products() {
        let a = xi_measure(XiParams { h: 1.3, psi: 0.7 }).unwrap();
        let b = xi_measure(XiParams { h: 0.7, psi: 0.3 }).unwrap();
        let ab = convolve(&a, &b).unwrap();
        let mut rng = RngStream::new(4, 0);
        let direct: Vec<f64> = sample_measure(&ab, 5_000, &mut rng)
            .unwrap()
            .iter()
            .map(|t| t.ln())
            .collect();
        let sa = sample_measure(&a, 5_000, &mut rng).unwrap();
        let sb = sample_measure(&b, 5_000, &mut rng).unwrap();
        let products: Vec<f64> = sa.iter().zip(&sb).map(|(x, y)| (x * y).ln()).collect();
        let (_, p) = ks_two_sample(&direct, &products);
        assert!(p > 0.05, "p = {p}");
    }

    #[test]
    fn ks_detects_shift() {
        let mut rng = RngStream::new(5, 0);
        let a: Vec<f64> = (0..2000).map(|_| rng.standard_normal()).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.standard_normal() + 0.5).collect();
        assert!(ks_two_sample(&a, &b).1 < 1e-6);
    }
}
