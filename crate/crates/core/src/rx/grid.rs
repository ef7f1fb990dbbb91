use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::numerics::pairwise_sum;

/// Spacing of every log grid, `2^{−10}`.
pub const LOG_GRID_STEP: f64 = 1.0 / 1024.0;
/// Largest admissible half-width of a grid in the log coordinate.
pub const MAX_HALF_WIDTH: f64 = 60.0;
/// End cells whose share of the mass (at `λ = 0` and at `λ = 1`) stays
/// below this are dropped.
const TRIM_TOLERANCE: f64 = 1e-18;
/// Below this length a direct convolution beats the FFT.
const DIRECT_LIMIT: usize = 64;

/// Point masses `weights[i]` at `s_i = origin + i·step`. Weights are
/// quadrature weights: a cell next to a support edge may be slightly
/// negative.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LogGrid {
    origin: f64,
    step: f64,
    weights: Vec<f64>,
}

impl LogGrid {
    pub fn new(origin: f64, step: f64, weights: Vec<f64>) -> Self {
        Self {
            origin,
            step,
            weights,
        }
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn s(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (self.s(i), w))
    }

    pub fn total(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.step * self.len().saturating_sub(1) as f64
    }

    pub fn scale(&mut self, factor: f64) {
        for w in self.weights.iter_mut() {
            *w *= factor;
        }
    }

    pub fn shift(&mut self, ds: f64) {
        self.origin += ds;
    }

    pub fn check_width(&self) -> Result<()> {
        let half = self.half_width();
        if half > MAX_HALF_WIDTH {
            return Err(Error::SupportOverflow {
                required: half,
                limit: MAX_HALF_WIDTH,
            });
        }
        Ok(())
    }

    /// `Σ w_i e^{λ(s_i − s_ref)}`.
    pub fn mellin_sum(&self, lambda: Complex64, s_ref: f64) -> Complex64 {
        let terms: Vec<Complex64> = self
            .points()
            .filter(|&(_, w)| w != 0.0)
            .map(|(s, w)| (lambda * (s - s_ref)).exp() * w)
            .collect();
        pairwise_sum(&terms)
    }

    /// Drops end cells whose absolute weights are negligible.
    pub fn trim(&mut self) {
        if self.weights.is_empty() {
            return;
        }
        let top = self.s(self.len() - 1);
        let tilted: Vec<f64> = self
            .points()
            .map(|(s, w)| w.abs() * (s - top).exp())
            .collect();
        let total0 = self.weights.iter().map(|w| w.abs()).sum::<f64>();
        let total1 = pairwise_sum(&tilted);
        if total0 <= 0.0 {
            self.weights.clear();
            return;
        }
        let negligible = |i: usize, acc0: &mut f64, acc1: &mut f64| {
            *acc0 += self.weights[i].abs();
            *acc1 += tilted[i];
            *acc0 > TRIM_TOLERANCE * total0 || *acc1 > TRIM_TOLERANCE * total1
        };
        let (mut a0, mut a1) = (0.0, 0.0);
        let lo = (0..self.len())
            .find(|&i| negligible(i, &mut a0, &mut a1))
            .unwrap_or(0);
        let (mut b0, mut b1) = (0.0, 0.0);
        let hi = (0..self.len())
            .rev()
            .find(|&i| negligible(i, &mut b0, &mut b1))
            .unwrap_or(self.len() - 1);
        let lo = lo.saturating_sub(1);
        let hi = (hi + 1).min(self.len() - 1);
        self.origin = self.s(lo);
        self.weights = self.weights[lo..=hi].to_vec();
    }

    /// Adds `factor · other` shifted by `ds`. Aligned grids add
    /// index-wise; otherwise each point mass is split between its two
    /// neighbouring nodes.
    pub fn accumulate(&mut self, other: &LogGrid, ds: f64, factor: f64) {
        debug_assert_eq!(self.step, other.step);
        if other.weights.is_empty() {
            return;
        }
        let step = self.step;
        let other_origin = other.origin + ds;
        if self.weights.is_empty() {
            self.origin = other_origin;
            self.weights = other.weights.iter().map(|w| w * factor).collect();
            return;
        }
        let offset = (other_origin - self.origin) / step;
        let aligned = (offset - offset.round()).abs() < 1e-9;
        let first = if aligned {
            offset.round()
        } else {
            offset.floor()
        } as i64;
        let last = first + other.len() as i64;
        self.extend_to(first, last);
        let base = ((other_origin - self.origin) / step).round();
        if aligned {
            let start = base as usize;
            for (i, w) in other.weights.iter().enumerate() {
                self.weights[start + i] += factor * w;
            }
        } else {
            // every point splits with the same fraction, adding variance
            // frac(1 − frac)Δ² that the sharpening takes back out
            let pos0 = (other_origin - self.origin) / step;
            let cell0 = pos0.floor();
            let frac = pos0 - cell0;
            let mut split = vec![0.0; other.len() + 1];
            for (i, w) in other.weights.iter().enumerate() {
                split[i] += w * (1.0 - frac);
                split[i + 1] += w * frac;
            }
            let split = sharpen(&split, 0.5 * frac * (1.0 - frac));
            self.extend_to(cell0 as i64 - 1, cell0 as i64 + split.len() as i64);
            let start = ((other_origin - self.origin) / step).floor() as usize - 1;
            for (i, w) in split.iter().enumerate() {
                self.weights[start + i] += factor * w;
            }
        }
    }

    /// Grows the grid so that relative indices `first..=last` exist.
    fn extend_to(&mut self, first: i64, last: i64) {
        if first < 0 {
            let pad = (-first) as usize;
            let mut w = vec![0.0; pad];
            w.extend_from_slice(&self.weights);
            self.weights = w;
            self.origin -= pad as f64 * self.step;
        }
        let shift = if first < 0 { -first } else { 0 };
        let need = (last + shift + 1).max(0) as usize;
        if need > self.weights.len() {
            self.weights.resize(need, 0.0);
        }
    }

    /// Additive convolution on the common step.
    pub fn convolve(&self, other: &LogGrid) -> LogGrid {
        debug_assert_eq!(self.step, other.step);
        if self.weights.is_empty() || other.weights.is_empty() {
            return LogGrid::new(self.origin + other.origin, self.step, Vec::new());
        }
        let out_len = self.len() + other.len() - 1;
        let weights = if self.len().min(other.len()) <= DIRECT_LIMIT {
            let mut out = vec![0.0; out_len];
            for (i, a) in self.weights.iter().enumerate() {
                for (j, b) in other.weights.iter().enumerate() {
                    out[i + j] += a * b;
                }
            }
            out
        } else {
            self.fft_convolve_tilted(other, out_len)
        };
        let mut grid = LogGrid::new(self.origin + other.origin, self.step, weights);
        grid.trim();
        grid
    }
}

impl LogGrid {
    /// FFT convolution run twice, once plain and once under the tilt
    /// `w ↦ w·e^{s}`. Round-off is relative to the largest entry, so the
    /// plain pass is accurate where the masses live and the tilted pass where
    /// `t·mass` lives; each output cell keeps the pass with the smaller error.
    fn fft_convolve_tilted(&self, other: &LogGrid, out_len: usize) -> Vec<f64> {
        let top_a = self.s(self.len() - 1);
        let top_b = other.s(other.len() - 1);
        let tilt = |g: &LogGrid, top: f64| -> Vec<f64> {
            g.points().map(|(s, w)| w * (s - top).exp()).collect()
        };
        let plain = fft_convolve(&self.weights, &other.weights, out_len);
        let tilted = fft_convolve(&tilt(self, top_a), &tilt(other, top_b), out_len);
        let max_plain = plain.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_tilted = tilted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let origin = self.origin + other.origin;
        let top = top_a + top_b;
        plain
            .iter()
            .zip(&tilted)
            .enumerate()
            .map(|(k, (&p, &t))| {
                let back = top - (origin + k as f64 * self.step);
                if max_tilted.ln() + back < max_plain.ln() {
                    t * back.exp()
                } else {
                    p
                }
            })
            .collect()
    }
}

/// `w_i + ε(2w_i − w_{i−1} − w_{i+1})`, padded by one cell each side. Mass
/// and mean are kept and `Σ w e^{λs}` gains the factor
/// `1 − ελ²Δ² + O(Δ⁴)`. Next to a square-root edge the outer cell goes
/// slightly negative.
pub(crate) fn sharpen(weights: &[f64], eps: f64) -> Vec<f64> {
    let mut w = vec![0.0; weights.len() + 4];
    w[2..weights.len() + 2].copy_from_slice(weights);
    w.windows(3)
        .map(|p| (1.0 + 2.0 * eps) * p[1] - eps * (p[0] + p[2]))
        .collect()
}

fn fft_convolve(a: &[f64], b: &[f64], out_len: usize) -> Vec<f64> {
    let size = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let pad = |x: &[f64]| {
        let mut v: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        v.resize(size, Complex64::new(0.0, 0.0));
        v
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inverse.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..out_len].iter().map(|z| z.re * scale).collect()
}
