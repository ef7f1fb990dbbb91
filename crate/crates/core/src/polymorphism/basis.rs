use std::f64::consts::FRAC_1_SQRT_2;

const LABELS: [&str; 6] = ["1", "x", "x2", "cos", "sin", "gauss"];

/// A product `Π_i f_{k_i}(u_i)` of one-dimensional test functions drawn
/// from `{1, x, x², cos x, sin x, e^{−x²/4}}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestFunction {
    factors: Vec<usize>,
}

impl TestFunction {
    pub fn label(&self) -> String {
        self.factors
            .iter()
            .map(|&k| LABELS[k])
            .collect::<Vec<_>>()
            .join("*")
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        self.factors
            .iter()
            .zip(u)
            .map(|(&k, &x)| eval_one(k, x))
            .product()
    }

    /// `∫ f dμ_n` against the standard Gaussian.
    pub fn gaussian_mean(&self) -> f64 {
        self.factors.iter().map(|&k| mean_one(k)).product()
    }
}

fn eval_one(k: usize, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        2 => x * x,
        3 => x.cos(),
        4 => x.sin(),
        _ => (-0.25 * x * x).exp(),
    }
}

fn mean_one(k: usize) -> f64 {
    match k {
        0 | 2 => 1.0,
        1 | 4 => 0.0,
        3 => (-0.5f64).exp(),
        // (1 + 1/2)^{−1/2}
        _ => 2.0 * FRAC_1_SQRT_2 / 3f64.sqrt(),
    }
}

/// All `6^n` tensor products.
pub fn test_basis(n: usize) -> Vec<TestFunction> {
    let mut out = vec![TestFunction {
        factors: Vec::new(),
    }];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|f| {
                (0..LABELS.len()).map(move |k| {
                    let mut factors = f.factors.clone();
                    factors.push(k);
                    TestFunction { factors }
                })
            })
            .collect();
    }
    out
}
