use num_complex::Complex64;

use super::KernelEvaluator;
use crate::error::{Error, Result};
use crate::rx::{
    convolve, delta_n, delta_n_circ, infinite_convolution, log_mellin, phi_measure,
    KernelCoordinates, PhiParams, RxMeasure, XiParams,
};

/// How the fiber measure is assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FiberRoute {
    /// The atom `A·δ(t − B)` convolved with `Φ[h_j² − 1, M_j]`; needs every
    /// `h_j` outside the seam band.
    Phi,
    /// The atom `A°·δ(t − B°)` convolved with `Ξ[h_j, ψ_j]`; always valid.
    Xi,
}

/// The measure `dM_{x,u}(t)` on the fiber over `(x, u)`.
#[derive(Clone, Debug)]
pub struct PolymorphismSample {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub route: FiberRoute,
    pub measure: RxMeasure,
}

/// The fiber measure, through `Φ` factors when no `h_j` sits at the seam
/// and through `Ξ` factors otherwise.
pub fn polymorphism_measure(
    ke: &KernelEvaluator,
    x: &[f64],
    u: &[f64],
    tol: f64,
) -> Result<PolymorphismSample> {
    let route = if ke.seam_flags().iter().any(|&f| f) {
        FiberRoute::Xi
    } else {
        FiberRoute::Phi
    };
    polymorphism_measure_via(ke, x, u, tol, route)
}

/// The fiber measure through a chosen route. Its Mellin transform is
/// checked against `K_λ(x, u)` at `λ ∈ {0, ½, 1}` within `max(1e−7, 10·tol)`.
pub fn polymorphism_measure_via(
    ke: &KernelEvaluator,
    x: &[f64],
    u: &[f64],
    tol: f64,
    route: FiberRoute,
) -> Result<PolymorphismSample> {
    let pc = ke.potapov();
    let h = ke.h();
    let kc = KernelCoordinates::new(pc, x, u)?;
    let measure = match route {
        FiberRoute::Phi => {
            let mut acc = delta_n(pc, h, x, u)?;
            for (&hj, &pj) in h.iter().zip(&kc.psi) {
                let k = hj * hj - 1.0;
                let phi = phi_measure(PhiParams {
                    b: k,
                    m: hj * hj * pj * pj / (2.0 * k * k),
                })?;
                acc = convolve(&acc, &phi)?;
            }
            acc
        }
        FiberRoute::Xi => {
            let factors: Vec<XiParams> = h
                .iter()
                .zip(&kc.psi)
                .map(|(&h, &psi)| XiParams { h, psi })
                .collect();
            // a finite list is complete, so running out of factors is exact
            let product = match infinite_convolution(&factors, tol) {
                Ok(t) => t.measure,
                Err(Error::ToleranceNotMet { partial, .. }) => *partial,
                Err(e) => return Err(e),
            };
            convolve(&delta_n_circ(pc, x, u)?, &product)?
        }
    }
    .scaled(ke.log_normalization());
    let threshold = (10.0 * tol).max(1e-7);
    for lam in [0.0, 0.5, 1.0] {
        let lam = Complex64::new(lam, 0.0);
        let from_measure = log_mellin(&measure, lam)?;
        let from_kernel = ke.log_kernel(lam, x, u)?;
        let rel = ((from_measure - from_kernel).exp() - 1.0).norm();
        if !(rel <= threshold) {
            return Err(Error::InternalInconsistency(format!(
                "fiber Mellin differs from the kernel by {rel:e} at λ = {lam}"
            )));
        }
    }
    Ok(PolymorphismSample {
        x: x.to_vec(),
        u: u.to_vec(),
        route,
        measure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colligation::{coset_act, random_colligation, Colligation};
    use crate::numerics::{haar_orthogonal, RngStream};

    fn seeded(n: usize, m: usize, seed: u64) -> KernelEvaluator {
        let g = random_colligation(n, m, 0.5, &mut RngStream::new(seed, 0)).unwrap();
        KernelEvaluator::new(&g).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn no_aux_factors_gives_the_atom() {
        let ke = seeded(1, 1, 1);
        let s = polymorphism_measure(&ke, &[0.3], &[-0.4], 1e-9).unwrap();
        assert_eq!(s.measure.atoms().len(), 1);
        assert_eq!(s.measure.grid_len(), 0);
        for lam in [0.0, 0.25, 0.7] {
            let a = s.measure.mellin_numeric(c(lam));
            let b = ke.kernel(c(lam), &[0.3], &[-0.4]).unwrap();
            assert!((a - b).norm() < 1e-12 * b.norm());
        }
    }

    #[test]
    fn routes_agree() {
        for seed in 0..3 {
            let ke = seeded(1, 3, seed);
            for (x, u) in [(0.0, 0.0), (0.7, -0.5)] {
                let phi = polymorphism_measure_via(&ke, &[x], &[u], 1e-9, FiberRoute::Phi).unwrap();
                let xi = polymorphism_measure_via(&ke, &[x], &[u], 1e-9, FiberRoute::Xi).unwrap();
                for lam in [0.0, 0.5, 1.0] {
                    let a = phi.measure.mellin_numeric(c(lam));
                    let b = xi.measure.mellin_numeric(c(lam));
                    assert!(
                        (a - b).norm() < 1e-6 * b.norm(),
                        "seed {seed} λ={lam}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn seam_forces_the_xi_route() {
        let ke = seeded(1, 2, 5);
        let pinned =
            KernelEvaluator::from_canonical(ke.canonical().with_h(vec![1.0]).unwrap()).unwrap();
        let s = polymorphism_measure(&pinned, &[0.2], &[0.1], 1e-9).unwrap();
        assert_eq!(s.route, FiberRoute::Xi);
        assert!(matches!(
            polymorphism_measure_via(&pinned, &[0.2], &[0.1], 1e-9, FiberRoute::Phi),
            Err(Error::SingularH(_))
        ));
    }

    #[test]
    fn invariant_under_cosets() {
        let g: Colligation = random_colligation(1, 3, 0.5, &mut RngStream::new(6, 0)).unwrap();
        let mut rng = RngStream::new(6, 1);
        let moved = coset_act(
            &g,
            &haar_orthogonal(3, &mut rng),
            &haar_orthogonal(3, &mut rng),
        )
        .unwrap();
        let a =
            polymorphism_measure(&KernelEvaluator::new(&g).unwrap(), &[0.5], &[0.5], 1e-9).unwrap();
        let b = polymorphism_measure(&KernelEvaluator::new(&moved).unwrap(), &[0.5], &[0.5], 1e-9)
            .unwrap();
        for lam in [0.0, 0.5, 1.0] {
            let ma = log_mellin(&a.measure, c(lam)).unwrap().exp();
            let mb = log_mellin(&b.measure, c(lam)).unwrap().exp();
            assert!((ma - mb).norm() < 1e-8 * ma.norm());
        }
    }
}
