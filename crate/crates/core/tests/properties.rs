use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use collig::colligation::{canonical_form, coset_act, potapov, random_colligation};
use collig::gaussian::{rn_cocycle_check, LinearSymmetry};
use collig::numerics::{gauss_hermite, haar_orthogonal, log_abs_det, DenseMatrix, RngStream};
use collig::polymorphism::{polymorphism_measure, KernelEvaluator};
use collig::rx::{convolve, log_mellin, phi_measure, xi_law, xi_measure, PhiParams, XiParams};
use collig::Error;

fn strip_lambda() -> impl Strategy<Value = Complex64> {
    (0.0..=1.0f64, -0.4..=0.4f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn xi_params() -> impl Strategy<Value = XiParams> {
    // below h ≈ 0.6 the λ = 1 tail outgrows the log grid (SupportOverflow)
    (0.62..1.8f64, -1.5..1.5f64).prop_map(|(h, psi)| XiParams { h, psi })
}

fn log_rel(a: Complex64, b: Complex64) -> f64 {
    ((a - b).exp() - 1.0).norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn xi_is_a_probability(p in xi_params()) {
        let mu = xi_measure(p).unwrap();
        prop_assert!((mu.total_mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn xi_grid_matches_closed_form(p in xi_params(), lam in strip_lambda()) {
        let mu = xi_measure(p).unwrap();
        let exact = xi_law(p).unwrap().log_mellin(lam).unwrap();
        prop_assert!(log_rel(mu.log_mellin_numeric(lam), exact) < 1e-6);
    }

    #[test]
    fn phi_grid_matches_closed_form(b in -0.6..2.0f64, m in 0.0..1.0f64, lam in strip_lambda()) {
        prop_assume!((Complex64::new(1.0, 0.0) + lam * b).norm() > 0.05);
        let mu = phi_measure(PhiParams { b, m }).unwrap();
        let exact = mu.log_mellin_closed(lam).unwrap().unwrap();
        prop_assert!(log_rel(mu.log_mellin_numeric(lam), exact) < 1e-6);
    }

    #[test]
    fn mellin_turns_convolution_into_product(a in xi_params(), b in xi_params(), lam in strip_lambda()) {
        let (ma, mb) = (xi_measure(a).unwrap(), xi_measure(b).unwrap());
        // two wide factors can need more than the largest grid
        let ab = match convolve(&ma, &mb) {
            Err(Error::SupportOverflow { .. }) => return Err(TestCaseError::reject("support overflow")),
            other => other.unwrap(),
        };
        let product = log_mellin(&ma, lam).unwrap() + log_mellin(&mb, lam).unwrap();
        prop_assert!(log_rel(ab.log_mellin_numeric(lam), product) < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn determinant_has_two_routes(seed in any::<u64>(), n in 1usize..3, extra in 1usize..4) {
        let g = random_colligation(n, n + extra, 0.5, &mut RngStream::new(seed, 0)).unwrap();
        let pc = potapov(&canonical_form(&g).unwrap()).unwrap();
        let direct = log_abs_det(g.rep()).unwrap();
        prop_assert!((pc.log_abs_det_p1 + pc.sum_log_h - pc.log_abs_det_t - direct).abs() < 1e-9);
    }

    #[test]
    fn kernel_depends_only_on_the_coset(seed in any::<u64>(), lam in strip_lambda(), x in -1.5..1.5f64, u in -1.5..1.5f64) {
        let mut rng = RngStream::new(seed, 0);
        let g = random_colligation(1, 3, 0.5, &mut rng).unwrap();
        let moved = coset_act(&g, &haar_orthogonal(3, &mut rng), &haar_orthogonal(3, &mut rng)).unwrap();
        let (a, b) = (KernelEvaluator::new(&g).unwrap(), KernelEvaluator::new(&moved).unwrap());
        for (p, q) in a.h().iter().zip(b.h()) {
            prop_assert!((p - q).abs() < 1e-8);
        }
        let (ka, kb) = (a.log_kernel(lam, &[x], &[u]).unwrap(), b.log_kernel(lam, &[x], &[u]).unwrap());
        prop_assert!(log_rel(ka, kb) < 1e-8);
    }

    #[test]
    fn lambda_zero_kernel_is_stochastic(seed in any::<u64>(), x in -2.0..2.0f64) {
        let ke = KernelEvaluator::new(&random_colligation(1, 3, 0.5, &mut RngStream::new(seed, 0)).unwrap()).unwrap();
        let quad = gauss_hermite(40).unwrap();
        let total = ke.integrate_in_u(Complex64::new(0.0, 0.0), &[x], &quad, |_| Complex64::new(1.0, 0.0)).unwrap();
        prop_assert!((total - 1.0).norm() < 1e-8);
    }

    #[test]
    fn fiber_mellin_is_the_kernel(seed in any::<u64>(), x in -1.0..1.0f64, u in -1.0..1.0f64) {
        let ke = KernelEvaluator::new(&random_colligation(1, 3, 0.5, &mut RngStream::new(seed, 0)).unwrap()).unwrap();
        let sample = polymorphism_measure(&ke, &[x], &[u], 1e-9).unwrap();
        for lam in [0.0, 0.5, 1.0] {
            let lam = Complex64::new(lam, 0.0);
            let k = ke.log_kernel(lam, &[x], &[u]).unwrap();
            prop_assert!(log_rel(sample.measure.log_mellin_numeric(lam), k) < 1e-6);
        }
    }

    #[test]
    fn radon_nikodym_is_a_cocycle(entries in proptest::collection::vec(-0.2..0.2f64, 18), x in proptest::collection::vec(-2.0..2.0f64, 3)) {
        let sym = |e: &[f64]| {
            let m = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.0 } + e[3 * i + j]);
            LinearSymmetry::new(DenseMatrix::new(m).unwrap()).unwrap()
        };
        let (a, b) = (sym(&entries[..9]), sym(&entries[9..]));
        prop_assert!(rn_cocycle_check(&a, &b, &x).unwrap() < 1e-10);
    }

    #[test]
    fn streams_replay(seed in any::<u64>(), stream in any::<u64>()) {
        let draw = || {
            let mut r = RngStream::new(seed, stream);
            (0..8).map(|_| r.standard_normal()).collect::<Vec<f64>>()
        };
        prop_assert_eq!(draw(), draw());
    }
}
