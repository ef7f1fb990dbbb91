use std::f64::consts::PI;

use num_complex::Complex64;

use super::grid::{sharpen, LogGrid, LOG_GRID_STEP};
use crate::error::{Error, Result};

/// `N²` beyond which the Gaussian tail is dropped (`e^{−32} ≈ 1.3e−14`).
const TAIL_SQ: f64 = 64.5;
const MAX_HALF_RANGE: f64 = 40.0;
/// Longest stretch of `N` handed to a single Gauss–Legendre panel.
const MAX_PANEL: f64 = 0.25;

/// Five-point Gauss–Legendre on `[−1, 1]`.
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// `e^{log_mass}` times the law of `s = c0 + c1·N + c2·N²`, `N` standard
/// normal, read as a measure in the log coordinate `s = ln t`.
///
/// Every family used here has this shape: `Φ[b, M]` is
/// `(M, −bM, −b√(2M), −b/2)` and `Ξ[h, ψ]` is
/// `(0, ln h − ψ²/2, −hψ, −(h²−1)/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticNormalLaw {
    pub log_mass: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl QuadraticNormalLaw {
    pub fn is_atom(&self) -> bool {
        self.c1 == 0.0 && self.c2 == 0.0
    }

    /// `E[s] = c0 + c2`.
    pub fn mean_log(&self) -> f64 {
        self.c0 + self.c2
    }

    /// Narrow enough that an atom at the mean has a smaller Mellin error
    /// (`λ²Var(s)/2`) than a grid deposit (`λ²Δ²/24` after sharpening).
    pub fn is_narrow(&self) -> bool {
        let var = self.c1 * self.c1 + 2.0 * self.c2 * self.c2;
        0.5 * var <= LOG_GRID_STEP * LOG_GRID_STEP / 24.0
    }

    /// `∫ t^λ`: `e^{log_mass}(1 − 2λc2)^{−1/2} exp(λc0 + λ²c1²/(2(1 − 2λc2)))`.
    pub fn mellin(&self, lambda: Complex64) -> Result<Complex64> {
        self.log_mellin(lambda).map(Complex64::exp)
    }

    pub fn log_mellin(&self, lambda: Complex64) -> Result<Complex64> {
        let gamma = Complex64::new(1.0, 0.0) - lambda * (2.0 * self.c2);
        if gamma.re <= 0.0 {
            return Err(Error::BranchCut(gamma));
        }
        Ok(self.log_mass - 0.5 * gamma.ln()
            + lambda * self.c0
            + lambda * lambda * (self.c1 * self.c1) / (gamma * 2.0))
    }

    fn s_at(&self, n: f64) -> f64 {
        self.c0 + n * (self.c1 + self.c2 * n)
    }

    /// Range of `N` outside which the integrand of the Mellin transform is
    /// negligible for every `0 ≤ Re λ ≤ 1`.
    fn n_range(&self) -> (f64, f64) {
        let half0 = TAIL_SQ.sqrt();
        let (mut lo, mut hi) = (-half0, half0);
        let gamma = 1.0 - 2.0 * self.c2;
        if gamma > 0.0 {
            let center = self.c1 / gamma;
            let half = (TAIL_SQ / gamma).sqrt().min(MAX_HALF_RANGE);
            lo = lo.min(center - half);
            hi = hi.max(center + half);
        } else {
            lo = -MAX_HALF_RANGE;
            hi = MAX_HALF_RANGE;
        }
        (lo.max(-MAX_HALF_RANGE), hi.min(MAX_HALF_RANGE))
    }

    /// Solutions of `s(N) = target` inside `[lo, hi]`.
    fn preimages(&self, target: f64, lo: f64, hi: f64) -> Vec<f64> {
        let (a, b, c) = (self.c2, self.c1, self.c0 - target);
        let mut roots = Vec::with_capacity(2);
        if a == 0.0 {
            if b != 0.0 {
                roots.push(-c / b);
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let q = -0.5 * (b + b.signum() * disc.sqrt());
                if q != 0.0 {
                    roots.push(c / q);
                }
                roots.push(q / a);
            }
        }
        roots.retain(|r| r.is_finite() && *r > lo && *r < hi);
        roots
    }

    /// Cell masses on a log grid, normalized to total 1. Returns `None` for
    /// an atom or a narrow law.
    ///
    /// Hat deposition inflates `Σ w e^{λs}` by about `1 + λ²Δ²/12`; the
    /// weights are then passed through `[−1/12, 7/6, −1/12]`, whose Mellin
    /// factor `1 − λ²Δ²/12 + O(Δ⁴)` cancels it.
    pub(crate) fn deposit(&self) -> Result<Option<LogGrid>> {
        if self.is_atom() || self.is_narrow() {
            return Ok(None);
        }
        let (lo, hi) = self.n_range();
        let mut breaks = vec![lo, hi];
        if self.c2 != 0.0 {
            let vertex = -self.c1 / (2.0 * self.c2);
            if vertex > lo && vertex < hi {
                breaks.push(vertex);
            }
        }
        let mut s_min = f64::INFINITY;
        let mut s_max = f64::NEG_INFINITY;
        for &n in &breaks {
            let s = self.s_at(n);
            s_min = s_min.min(s);
            s_max = s_max.max(s);
        }
        let step = LOG_GRID_STEP;
        let half = 0.5 * (s_max - s_min);
        if half > super::grid::MAX_HALF_WIDTH {
            return Err(Error::SupportOverflow {
                required: half,
                limit: super::grid::MAX_HALF_WIDTH,
            });
        }
        let origin = (s_min / step).floor() * step;
        let len = ((s_max - origin) / step).floor() as usize + 2;

        // every N where s(N) meets a grid node, so each panel maps into one cell
        let first = ((s_min - origin) / step).ceil() as i64;
        let last = ((s_max - origin) / step).floor() as i64;
        for i in first..=last {
            let target = origin + i as f64 * step;
            breaks.extend(self.preimages(target, lo, hi));
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let mut weights = vec![0.0; len];
        let norm = 1.0 / (2.0 * PI).sqrt();
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b <= a {
                continue;
            }
            let cell = ((self.s_at(0.5 * (a + b)) - origin) / step).floor();
            let cell = (cell.max(0.0) as usize).min(len - 2);
            let cell_start = origin + cell as f64 * step;
            let panels = ((b - a) / MAX_PANEL).ceil().max(1.0) as usize;
            let width = (b - a) / panels as f64;
            for p in 0..panels {
                let pa = a + p as f64 * width;
                let mid = pa + 0.5 * width;
                for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                    let n = mid + 0.5 * width * x;
                    let dens = 0.5 * width * w * norm * (-0.5 * n * n).exp();
                    let frac = ((self.s_at(n) - cell_start) / step).clamp(0.0, 1.0);
                    weights[cell] += dens * (1.0 - frac);
                    weights[cell + 1] += dens * frac;
                }
            }
        }
        let mut grid = LogGrid::new(origin - step, step, sharpen(&weights, 1.0 / 12.0));
        grid.trim();
        Ok(Some(grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(c0: f64, c1: f64, c2: f64) -> QuadraticNormalLaw {
        QuadraticNormalLaw {
            log_mass: 0.0,
            c0,
            c1,
            c2,
        }
    }

    #[test]
    fn closed_form_reduces_to_lognormal() {
        // c2 = 0: E[e^{λ(c0 + c1 N)}] = e^{λc0 + λ²c1²/2}
        let l = law(0.3, 0.8, 0.0);
        let lam = Complex64::new(0.7, 0.2);
        let expected = (lam * 0.3 + lam * lam * 0.32).exp();
        assert!((l.mellin(lam).unwrap() - expected).norm() < 1e-14);
    }

    #[test]
    fn branch_cut_is_reported() {
        let l = law(0.0, 0.0, 1.0);
        assert!(matches!(
            l.mellin(Complex64::new(0.5, 0.0)),
            Err(Error::BranchCut(_))
        ));
        assert!(l.mellin(Complex64::new(0.4, 0.0)).is_ok());
    }

    #[test]
    fn preimages_are_roots() {
        let l = law(0.1, -0.7, -0.4);
        for target in [-3.0, -1.0, 0.0, 0.2] {
            for r in l.preimages(target, -10.0, 10.0) {
                assert!((l.s_at(r) - target).abs() < 1e-12);
            }
        }
        // tiny curvature keeps the linear root accurate
        let flat = law(0.0, 1.0, 1e-14);
        let r = flat.preimages(0.5, -10.0, 10.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn deposit_preserves_mass_and_mean() {
        for l in [
            law(0.0, 1.0, 0.0),
            law(-0.2, -0.5, -0.6),
            law(0.0, 0.0, -1.0),
            law(0.1, 0.3, 0.2),
        ] {
            let g = l.deposit().unwrap().unwrap();
            let mass: f64 = g.weights().iter().sum();
            assert!((mass - 1.0).abs() < 1e-12);
            // hat deposition keeps first moments exact: E[s] = c0 + c2
            let mean: f64 = g.points().map(|(s, w)| s * w).sum();
            assert!((mean - (l.c0 + l.c2)).abs() < 1e-10, "{l:?}: {mean}");
        }
    }

    #[test]
    fn sharpened_deposit_matches_closed_form() {
        let lam = Complex64::new(1.0, 0.3);
        for l in [
            law(0.0, 1.0, 0.0),
            law(-0.2, -0.5, -0.6),
            law(0.0, 0.0, -1.0),
            law(0.1, 0.3, 0.2),
        ] {
            let g = l.deposit().unwrap().unwrap();
            let err = (g.mellin_sum(lam, 0.0).ln() - l.log_mellin(lam).unwrap()).norm();
            assert!(err < 5e-9, "{l:?}: {err:e}");
        }
    }

    #[test]
    fn narrow_laws_become_atoms() {
        assert!(law(0.0, 1e-4, 0.0).deposit().unwrap().is_none());
        assert!(law(0.0, 1e-2, 0.0).deposit().unwrap().is_some());
    }

    #[test]
    fn atoms_do_not_deposit() {
        assert!(law(0.4, 0.0, 0.0).deposit().unwrap().is_none());
    }
}
