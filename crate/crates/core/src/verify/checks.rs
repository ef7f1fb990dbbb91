use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::report::CheckRecord;
use super::{Suite, SuiteConfig};
use crate::colligation::{canonical_form, coset_act, random_colligation, truncate, Colligation};
use crate::error::{Error, Result};
use crate::gaussian::{
    radon_nikodym, radon_nikodym_diagonal, rn_cocycle_check, GaussianSpace, LinearSymmetry,
};
use crate::numerics::{gauss_hermite, haar_orthogonal, log_abs_det, DenseMatrix, RngStream};
use crate::polymorphism::{
    compose_check, markov_conditions, markov_conditions_fiber, norm_estimate, oracle_pushforward,
    polymorphism_measure, polymorphism_measure_via, test_basis, FiberRoute, KernelEvaluator,
    ORACLE_MAX_DIM,
};
use crate::rx::{
    convolve, infinite_convolution, log_mellin, phi_law, phi_measure, xi_law, xi_measure,
    KernelCoordinates, PhiParams, RxMeasure, XiParams, H_SEAM_TOLERANCE,
};

#[derive(Default)]
pub(super) struct SuiteOutput {
    pub records: Vec<CheckRecord>,
    pub skipped: Vec<String>,
}

impl SuiteOutput {
    fn push(&mut self, id: &str, params: String, threshold: f64, outcome: Result<f64>, wall: f64) {
        match outcome {
            Ok(r) => self
                .records
                .push(CheckRecord::new(id, params, r, threshold, wall)),
            Err(Error::BranchPoint(_) | Error::BranchCut(_)) => {
                self.skipped.push(format!("{id} {params}: branch point"));
            }
            Err(e) => self.records.push(CheckRecord::failed(
                id,
                params,
                threshold,
                e.to_string(),
                wall,
            )),
        }
    }

    fn skip(&mut self, id: &str, params: String, reason: &str) {
        self.skipped.push(format!("{id} {params}: {reason}"));
    }

    fn extend(&mut self, other: SuiteOutput) {
        self.records.extend(other.records);
        self.skipped.extend(other.skipped);
    }
}

/// Streams above this are reserved for batches that are not per-trial.
const SHARED_STREAM: u64 = 1 << 32;

pub(super) fn run(suite: Suite, cfg: &SuiteConfig) -> SuiteOutput {
    match suite {
        Suite::Mellin => mellin(cfg),
        Suite::Semigroup => per_trial(cfg, semigroup_trial),
        Suite::Markov => per_trial(cfg, markov_trial),
        Suite::Canonical => per_trial(cfg, canonical_trial),
        Suite::Rn => rn(cfg),
        Suite::Truncation => per_trial(cfg, truncation_trial),
        Suite::Norm => per_trial(cfg, norm_trial),
        Suite::All => {
            let mut out = SuiteOutput::default();
            for s in Suite::EACH {
                out.extend(run(s, cfg));
            }
            out
        }
    }
}

fn per_trial(cfg: &SuiteConfig, f: fn(&SuiteConfig, usize) -> SuiteOutput) -> SuiteOutput {
    let parts: Vec<SuiteOutput> = (0..cfg.trials).into_par_iter().map(|t| f(cfg, t)).collect();
    let mut out = SuiteOutput::default();
    for p in parts {
        out.extend(p);
    }
    out
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}

fn lam_str(l: Complex64) -> String {
    format!("{}{:+}i", l.re, l.im)
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `|a/b − 1|` for logs `a`, `b`.
fn log_rel(a: Complex64, b: Complex64) -> f64 {
    ((a - b).exp() - 1.0).norm()
}

/// The trial's colligation. Trial 0 has the `h_j` nearest 1 set to exactly 1
/// so that every batch exercises the seam.
fn trial_colligation(
    cfg: &SuiteConfig,
    rng: &mut RngStream,
    trial: usize,
    n: usize,
    m: usize,
) -> Result<Colligation> {
    let g = random_colligation(n, m, cfg.decay, rng)?;
    if trial != 0 {
        return Ok(g);
    }
    let cf = canonical_form(&g)?;
    let mut h = cf.h.clone();
    if let Some((idx, _)) = h
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
    {
        h[idx] = 1.0;
    }
    cf.with_h(h)?.to_colligation()
}

/// Tensor nodes allowed per cubature.
const NODE_BUDGET: f64 = 1e5;

/// Order of a `dims`-dimensional tensor rule: the configured order, lowered
/// to stay inside the node budget but never below 8.
pub fn tensor_order(quad_order: usize, dims: usize) -> usize {
    let fit = NODE_BUDGET.powf(1.0 / dims.max(1) as f64).floor() as usize;
    quad_order.min(fit.max(8))
}

fn spread(n: usize, base: f64) -> Vec<f64> {
    (0..n).map(|j| base * (1.0 - 0.3 * j as f64)).collect()
}

fn fiber_points(n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    vec![
        (vec![0.0; n], vec![0.0; n]),
        (spread(n, 0.5), spread(n, -0.3)),
    ]
}

fn mellin(cfg: &SuiteConfig) -> SuiteOutput {
    let mut out = SuiteOutput::default();
    let lambdas = cfg.lambdas();
    for b in [-0.5, 0.5, 2.0] {
        for m in [0.0, 0.3, 1.0] {
            let p = PhiParams { b, m };
            let (measure, wall) = timed(|| phi_measure(p));
            for &lam in &lambdas {
                let params = format!("b={b} M={m} lambda={}", lam_str(lam));
                if (1.0 + b * lam).norm() < 0.05 {
                    out.skip("mellin.phi", params, "branch-cut neighborhood");
                    continue;
                }
                let outcome = measure.as_ref().map_err(clone_err).and_then(|mu| {
                    Ok(log_rel(
                        mu.log_mellin_numeric(lam),
                        phi_law(p)?.log_mellin(lam)?,
                    ))
                });
                out.push("mellin.phi", params, 1e-6, outcome, wall);
            }
        }
    }
    for h in [0.6, 1.0 - 1e-7, 1.0, 1.0 + 1e-7, 1.3, 1.8] {
        for psi in [0.0, 0.7, 2.0] {
            let p = XiParams { h, psi };
            let (measure, wall) = timed(|| xi_measure(p));
            let params = format!("h={h} psi={psi}");
            let mass = measure
                .as_ref()
                .map_err(clone_err)
                .map(|mu| (mu.total_mass() - 1.0).abs());
            out.push("mellin.xi_mass", params.clone(), 1e-8, mass, wall);
            for &lam in &lambdas {
                let outcome = measure.as_ref().map_err(clone_err).and_then(|mu| {
                    Ok(log_rel(
                        mu.log_mellin_numeric(lam),
                        xi_law(p)?.log_mellin(lam)?,
                    ))
                });
                out.push(
                    "mellin.xi",
                    format!("{params} lambda={}", lam_str(lam)),
                    1e-6,
                    outcome,
                    wall,
                );
            }
        }
    }
    for psi in [0.0, 0.7, 2.0] {
        let (outcome, wall) = timed(|| -> Result<f64> {
            let at_one = xi_measure(XiParams { h: 1.0, psi })?;
            let mut worst: f64 = 0.0;
            for h in [1.0 - H_SEAM_TOLERANCE, 1.0 + H_SEAM_TOLERANCE] {
                let near = xi_measure(XiParams { h, psi })?;
                for &lam in &lambdas {
                    let a = near.mellin_numeric(lam);
                    let b = at_one.mellin_numeric(lam);
                    worst = worst.max((a - b).norm());
                }
            }
            Ok(worst)
        });
        out.push("mellin.xi_seam", format!("psi={psi}"), 1e-5, outcome, wall);
    }
    let pairs = [
        (XiParams { h: 1.3, psi: 0.7 }, XiParams { h: 0.7, psi: 0.3 }),
        (XiParams { h: 0.8, psi: 1.0 }, XiParams { h: 1.5, psi: 0.7 }),
        (XiParams { h: 1.0, psi: 0.7 }, XiParams { h: 1.1, psi: 0.0 }),
    ];
    for (p, q) in pairs {
        let (outcome, wall) = timed(|| -> Result<f64> {
            let mu = xi_measure(p)?;
            let nu = xi_measure(q)?;
            let both = convolve(&mu, &nu)?;
            let mut worst: f64 = 0.0;
            for &lam in &lambdas {
                let lhs = both.log_mellin_numeric(lam);
                let rhs = mu.log_mellin_numeric(lam) + nu.log_mellin_numeric(lam);
                worst = worst.max(log_rel(lhs, rhs));
            }
            Ok(worst)
        });
        let params = format!("xi[{},{}]*xi[{},{}]", p.h, p.psi, q.h, q.psi);
        out.push("mellin.homomorphism", params, 1e-8, outcome, wall);
    }
    let factors: Vec<XiParams> = (1..=40)
        .map(|j| {
            let e = 0.5f64.powi(j);
            XiParams { h: 1.0 + e, psi: e }
        })
        .collect();
    let (outcome, wall) = timed(|| -> Result<(f64, f64, f64)> {
        let short = complete_convolution(&factors[..20], f64::MIN_POSITIVE)?;
        let long = complete_convolution(&factors, f64::MIN_POSITIVE)?;
        let half = c(0.5);
        let cauchy = log_rel(
            short.log_mellin_numeric(half),
            long.log_mellin_numeric(half),
        );
        let shifted = log_rel(
            short.log_mellin_numeric(c(1.0)),
            long.log_mellin_numeric(c(1.0)),
        );
        let mut product = Complex64::new(0.0, 0.0);
        for &p in &factors {
            product += xi_law(p)?.log_mellin(half)?;
        }
        Ok((
            cauchy,
            shifted,
            log_rel(long.log_mellin_numeric(half), product),
        ))
    });
    let split = |k: usize| {
        outcome
            .as_ref()
            .map_err(clone_err)
            .map(|v| [v.0, v.1, v.2][k])
    };
    out.push(
        "mellin.infinite_cauchy",
        "factors=20,40 lambda=0.5".into(),
        1e-6,
        split(0),
        wall,
    );
    out.push(
        "mellin.infinite_cauchy_tilted",
        "factors=20,40 lambda=1".into(),
        1e-6,
        split(1),
        wall,
    );
    out.push(
        "mellin.infinite_product",
        "factors=40 lambda=0.5".into(),
        1e-5,
        split(2),
        wall,
    );
    out
}

/// Truncated convolution, or the whole list when the tail never drops
/// below `tol`.
fn complete_convolution(factors: &[XiParams], tol: f64) -> Result<RxMeasure> {
    match infinite_convolution(factors, tol) {
        Ok(t) => Ok(t.measure),
        Err(Error::ToleranceNotMet { partial, .. }) => Ok(*partial),
        Err(e) => Err(e),
    }
}

fn clone_err(e: &Error) -> Error {
    match e {
        Error::BranchPoint(l) => Error::BranchPoint(*l),
        Error::BranchCut(l) => Error::BranchCut(*l),
        other => Error::InternalInconsistency(other.to_string()),
    }
}

fn semigroup_trial(cfg: &SuiteConfig, trial: usize) -> SuiteOutput {
    let mut out = SuiteOutput::default();
    let mut rng = RngStream::new(cfg.seed, trial as u64);
    let (n, m) = (cfg.n, cfg.m);
    let pair = trial_colligation(cfg, &mut rng, trial, n, m)
        .and_then(|a| Ok((a, random_colligation(n, m, cfg.decay, &mut rng)?)));
    let (a, b) = match pair {
        Ok(p) => p,
        Err(e) => {
            out.push(
                "semigroup.setup",
                format!("trial={trial}"),
                0.0,
                Err(e),
                0.0,
            );
            return out;
        }
    };
    let quad = gauss_hermite(cfg.quad_order).expect("validated order");
    let grid: Vec<(Vec<f64>, Vec<f64>)> = [(-1.0, 0.5), (0.0, 0.0), (0.8, -1.2), (1.5, 1.0)]
        .iter()
        .map(|&(x, v)| (spread(n, x), spread(n, v)))
        .collect();
    for lam in cfg.lambdas() {
        let threshold = if lam.norm() == 0.0 { 1e-6 } else { 1e-5 };
        let (outcome, wall) = timed(|| compose_check(&a, &b, lam, &grid, &quad));
        out.push(
            "semigroup.compose",
            format!("trial={trial} lambda={}", lam_str(lam)),
            threshold,
            outcome,
            wall,
        );
    }
    if m > ORACLE_MAX_DIM {
        out.skip(
            "semigroup.oracle",
            format!("trial={trial}"),
            "aux dimension above the oracle limit",
        );
        return out;
    }
    let ke = match KernelEvaluator::new(&a) {
        Ok(k) => k,
        Err(e) => {
            out.push(
                "semigroup.oracle",
                format!("trial={trial}"),
                1e-6,
                Err(e),
                0.0,
            );
            return out;
        }
    };
    let oracle_quad = gauss_hermite(tensor_order(cfg.quad_order, m)).expect("validated order");
    for lam in cfg.lambdas() {
        let (outcome, wall) =
            timed(|| oracle_residual(&a, &ke, lam, &[vec![0.0; n], spread(n, 0.6)], &oracle_quad));
        out.push(
            "semigroup.oracle",
            format!("trial={trial} lambda={}", lam_str(lam)),
            1e-6,
            outcome,
            wall,
        );
    }
    out
}

/// `max |∫K f − T_oracle f| / max(|T_oracle f|, |T_oracle 1|)` over the
/// test basis and the given points.
pub fn oracle_residual(
    g: &Colligation,
    ke: &KernelEvaluator,
    lam: Complex64,
    xs: &[Vec<f64>],
    quad: &crate::numerics::QuadratureRule,
) -> Result<f64> {
    let basis = test_basis(ke.n());
    let mut worst: f64 = 0.0;
    for x in xs {
        let nodes = oracle_pushforward(g, lam, x, quad)?;
        let kernel_nodes = ke.pushforward(lam, x, quad)?;
        let unit: Complex64 = nodes.iter().map(|(_, w)| *w).sum();
        for f in &basis {
            let oracle: Complex64 = nodes.iter().map(|(u, w)| w * f.eval(u)).sum();
            let kernel: Complex64 = kernel_nodes.iter().map(|(u, w)| w * f.eval(u)).sum();
            let scale = oracle.norm().max(unit.norm());
            worst = worst.max((kernel - oracle).norm() / scale);
        }
    }
    Ok(worst)
}

fn markov_trial(cfg: &SuiteConfig, trial: usize) -> SuiteOutput {
    let mut out = SuiteOutput::default();
    let mut rng = RngStream::new(cfg.seed, trial as u64);
    let n = cfg.n;
    let ke = match trial_colligation(cfg, &mut rng, trial, n, cfg.m)
        .and_then(|g| KernelEvaluator::new(&g))
    {
        Ok(k) => k,
        Err(e) => {
            out.push("markov.setup", format!("trial={trial}"), 0.0, Err(e), 0.0);
            return out;
        }
    };
    let quad = gauss_hermite(tensor_order(cfg.quad_order, 2 * n)).expect("validated order");
    let (res, wall) = timed(|| markov_conditions(&ke, &quad));
    let params = format!("trial={trial}");
    out.push(
        "markov.residual_a",
        params.clone(),
        1e-7,
        res.as_ref().map(|r| r.residual_a).map_err(clone_err),
        wall,
    );
    out.push(
        "markov.residual_b",
        params,
        1e-7,
        res.map(|r| r.residual_b),
        wall,
    );
    for (x, u) in fiber_points(n) {
        let params = format!("trial={trial} x={x:?} u={u:?}");
        let (outcome, wall) = timed(|| -> Result<f64> {
            let s = polymorphism_measure(&ke, &x, &u, cfg.tol)?;
            let mut worst: f64 = 0.0;
            for lam in [0.0, 0.5, 1.0] {
                worst = worst.max(log_rel(
                    s.measure.log_mellin_numeric(c(lam)),
                    ke.log_kernel(c(lam), &x, &u)?,
                ));
            }
            Ok(worst)
        });
        out.push("markov.fiber_kernel", params.clone(), 1e-6, outcome, wall);
        if ke.seam_flags().iter().any(|&f| f) {
            out.skip("markov.cross_route", params, "h at the seam has no Φ route");
            continue;
        }
        let (outcome, wall) = timed(|| -> Result<f64> {
            let phi = polymorphism_measure_via(&ke, &x, &u, cfg.tol, FiberRoute::Phi)?;
            let xi = polymorphism_measure_via(&ke, &x, &u, cfg.tol, FiberRoute::Xi)?;
            let mut worst: f64 = 0.0;
            for lam in [0.0, 0.5, 1.0] {
                worst = worst.max(log_rel(
                    phi.measure.log_mellin_numeric(c(lam)),
                    xi.measure.log_mellin_numeric(c(lam)),
                ));
            }
            Ok(worst)
        });
        out.push("markov.cross_route", params, 1e-6, outcome, wall);
    }
    if trial == 0 && n > 2 {
        out.skip(
            "markov.fiber_residual",
            format!("trial={trial}"),
            "one fiber per node is too many nodes above n = 2",
        );
    } else if trial == 0 {
        let order = if n == 1 { 12 } else { 10 };
        let quad = gauss_hermite(order).expect("small order");
        let (res, wall) = timed(|| markov_conditions_fiber(&ke, &quad, cfg.tol));
        let params = format!("trial={trial} order={order}");
        out.push(
            "markov.fiber_residual_a",
            params.clone(),
            1e-7,
            res.as_ref().map(|r| r.residual_a).map_err(clone_err),
            wall,
        );
        out.push(
            "markov.fiber_residual_b",
            params,
            1e-7,
            res.map(|r| r.residual_b),
            wall,
        );
    }
    out
}

fn canonical_trial(cfg: &SuiteConfig, trial: usize) -> SuiteOutput {
    let mut out = SuiteOutput::default();
    let mut rng = RngStream::new(cfg.seed, trial as u64);
    let (n, m) = (cfg.n, cfg.m);
    let params = format!("trial={trial}");
    let g = match trial_colligation(cfg, &mut rng, trial, n, m) {
        Ok(g) => g,
        Err(e) => {
            out.push("canonical.setup", params, 0.0, Err(e), 0.0);
            return out;
        }
    };
    let (outcome, wall) = timed(|| -> Result<f64> {
        let cf = canonical_form(&g)?;
        let pc = crate::colligation::potapov(&cf)?;
        let direct = log_abs_det(g.rep())?;
        Ok(((pc.log_abs_det_p1 + pc.sum_log_h - pc.log_abs_det_t - direct).exp() - 1.0).abs())
    });
    out.push(
        "canonical.det_identity",
        params.clone(),
        1e-9,
        outcome,
        wall,
    );
    let u = haar_orthogonal(m, &mut rng);
    let v = haar_orthogonal(m, &mut rng);
    let (moved, wall) = timed(|| -> Result<(KernelEvaluator, KernelEvaluator, f64)> {
        let moved = coset_act(&g, &u, &v)?;
        let a = KernelEvaluator::new(&g)?;
        let b = KernelEvaluator::new(&moved)?;
        let gap = a
            .h()
            .iter()
            .zip(b.h())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        Ok((a, b, gap))
    });
    let (a, b, gap) = match moved {
        Ok(v) => v,
        Err(e) => {
            out.push("canonical.coset_h", params, 1e-8, Err(e), wall);
            return out;
        }
    };
    out.push("canonical.coset_h", params.clone(), 1e-8, Ok(gap), wall);
    for lam in cfg.lambdas() {
        let (outcome, wall) = timed(|| -> Result<f64> {
            let mut worst: f64 = 0.0;
            for (x, y) in fiber_points(n)
                .into_iter()
                .chain([(spread(n, -1.2), spread(n, 0.9))])
            {
                worst = worst.max(log_rel(
                    a.log_kernel(lam, &x, &y)?,
                    b.log_kernel(lam, &x, &y)?,
                ));
            }
            Ok(worst)
        });
        out.push(
            "canonical.coset_kernel",
            format!("{params} lambda={}", lam_str(lam)),
            1e-8,
            outcome,
            wall,
        );
    }
    let (outcome, wall) = timed(|| -> Result<f64> {
        let (x, y) = (spread(n, 0.5), spread(n, 0.5));
        let p = polymorphism_measure(&a, &x, &y, cfg.tol)?;
        let q = polymorphism_measure(&b, &x, &y, cfg.tol)?;
        let mut worst: f64 = 0.0;
        for lam in [0.0, 0.5, 1.0] {
            worst = worst.max(log_rel(
                p.measure.log_mellin_numeric(c(lam)),
                q.measure.log_mellin_numeric(c(lam)),
            ));
        }
        Ok(worst)
    });
    out.push("canonical.coset_fiber", params, 1e-8, outcome, wall);
    out
}

fn random_symmetry(n: usize, rng: &mut RngStream) -> Result<LinearSymmetry> {
    let m = DMatrix::from_fn(
        n,
        n,
        |i, j| if i == j { 1.0 } else { 0.0 } + 0.15 * rng.standard_normal(),
    );
    LinearSymmetry::new(DenseMatrix::new(m)?)
}

fn rn(cfg: &SuiteConfig) -> SuiteOutput {
    let mut out = SuiteOutput::default();
    let (outcome, wall) = timed(|| -> Result<f64> {
        let mut rng = RngStream::new(cfg.seed, SHARED_STREAM);
        let a = random_symmetry(3, &mut rng)?;
        let xs = GaussianSpace::new(3)?.sample(100_000, &mut rng);
        let vals: Vec<f64> = xs
            .iter()
            .map(|x| radon_nikodym(&a, x).map(f64::exp))
            .collect::<Result<_>>()?;
        let count = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / count;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
        Ok((mean - 1.0).abs() / (var / count).sqrt())
    });
    out.push(
        "rn.monte_carlo_sigmas",
        "n=3 samples=100000".into(),
        3.0,
        outcome,
        wall,
    );
    let (outcome, wall) = timed(|| -> Result<f64> {
        let mut rng = RngStream::new(cfg.seed, SHARED_STREAM + 1);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let a = random_symmetry(3, &mut rng)?;
            let b = random_symmetry(3, &mut rng)?;
            let x: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
            worst = worst.max(rn_cocycle_check(&a, &b, &x)?);
        }
        Ok(worst)
    });
    out.push("rn.cocycle", "n=3 triples=100".into(), 1e-10, outcome, wall);
    let (outcome, wall) = timed(|| -> Result<f64> {
        let mut rng = RngStream::new(cfg.seed, SHARED_STREAM + 2);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let t: Vec<f64> = (0..3).map(|_| rng.uniform_in(-0.5, 0.5)).collect();
            let x: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
            let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                3,
                t.iter().map(|v| 1.0 + v),
            ));
            let general = radon_nikodym(&LinearSymmetry::new(DenseMatrix::new(diag)?)?, &x)?;
            worst = worst.max((general - radon_nikodym_diagonal(&t, &x)?).abs());
        }
        Ok(worst)
    });
    out.push("rn.diagonal", "n=3 cases=100".into(), 1e-12, outcome, wall);
    out
}

/// Aux size used by the truncation suite.
pub const TRUNCATION_M: usize = 8;

/// `(k, M_k, bound_k)` with `M_k` the fiber Mellin transform at `λ` of the
/// `k`-th corner of the canonical representative and `bound_k` the closed
/// form `|M_k|·|Π_{j ≥ k−n} Ξ̂_j(λ) − 1|` for the step to the next corner.
pub fn truncation_sequence(
    canon: &Colligation,
    ks: &[usize],
    x: &[f64],
    u: &[f64],
    lam: Complex64,
    tol: f64,
) -> Result<Vec<(usize, Complex64, f64)>> {
    let n = canon.n();
    let full = KernelEvaluator::new(canon)?;
    let kc = KernelCoordinates::new(full.potapov(), x, u)?;
    let mut out = Vec::new();
    for (i, &k) in ks.iter().enumerate() {
        let ke = KernelEvaluator::new(&truncate(canon, k)?)?;
        let sample = polymorphism_measure(&ke, x, u, tol)?;
        let value = log_mellin(&sample.measure, lam)?.exp();
        let next = ks.get(i + 1).copied().unwrap_or(k);
        let mut log_tail = Complex64::new(0.0, 0.0);
        for j in (k - n)..(next - n) {
            log_tail += xi_law(XiParams {
                h: full.h()[j],
                psi: kc.psi[j],
            })?
            .log_mellin(lam)?;
        }
        out.push((k, value, value.norm() * (log_tail.exp() - 1.0).norm()));
    }
    Ok(out)
}

fn truncation_trial(cfg: &SuiteConfig, trial: usize) -> SuiteOutput {
    let mut out = SuiteOutput::default();
    let n = cfg.n;
    let m = TRUNCATION_M.max(cfg.m).max(2 * n);
    let mut rng = RngStream::new(cfg.seed, trial as u64);
    let params = format!("trial={trial} n={n} m={m}");
    let canon = match random_colligation(n, m, cfg.decay, &mut rng)
        .and_then(|g| canonical_form(&g))
        .and_then(|cf| cf.to_colligation())
    {
        Ok(g) => g,
        Err(e) => {
            out.push("truncation.setup", params, 0.0, Err(e), 0.0);
            return out;
        }
    };
    let mut ks: Vec<usize> = (1..)
        .map(|p| 1usize << p)
        .take_while(|&k| k < m)
        .filter(|&k| k >= n)
        .collect();
    ks.push(m);
    let (x, u) = (spread(n, 0.3), spread(n, -0.2));
    let (seq, wall) = timed(|| truncation_sequence(&canon, &ks, &x, &u, c(0.5), cfg.tol));
    let seq = match seq {
        Ok(s) => s,
        Err(e) => {
            out.push("truncation.decrement_ratio", params, 2.0, Err(e), wall);
            return out;
        }
    };
    for w in seq.windows(2) {
        let (k, value, bound) = w[0];
        let decrement = (w[1].1 - value).norm();
        let ratio = if bound <= 1e-14 * value.norm() && decrement <= 1e-12 * value.norm() {
            1.0
        } else {
            let r = decrement / bound;
            r.max(1.0 / r)
        };
        out.push(
            "truncation.decrement_ratio",
            format!("{params} k={k}->{}", w[1].0),
            2.0,
            Ok(ratio),
            wall,
        );
    }
    out
}

fn norm_trial(cfg: &SuiteConfig, trial: usize) -> SuiteOutput {
    let mut out = SuiteOutput::default();
    let mut rng = RngStream::new(cfg.seed, trial as u64);
    let n = cfg.n;
    let ke = match trial_colligation(cfg, &mut rng, trial, n, cfg.m)
        .and_then(|g| KernelEvaluator::new(&g))
    {
        Ok(k) => k,
        Err(e) => {
            out.push("norm.setup", format!("trial={trial}"), 0.0, Err(e), 0.0);
            return out;
        }
    };
    // the Galerkin basis grows as (order/2)^n, so past one dimension 12 is plenty
    let order = if n == 1 {
        cfg.quad_order
    } else {
        tensor_order(cfg.quad_order, 2 * n).min(12)
    };
    let quad = gauss_hermite(order).expect("validated order");
    for lam in cfg
        .lambdas()
        .into_iter()
        .filter(|l| (l.re - 0.5).abs() < 1e-12)
    {
        let (outcome, wall) = timed(|| norm_estimate(&ke, lam, &quad));
        out.push(
            "norm.contraction",
            format!("trial={trial} lambda={} order={order}", lam_str(lam)),
            1.0 + 1e-6,
            outcome,
            wall,
        );
    }
    out
}
