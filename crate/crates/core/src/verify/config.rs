use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::MAX_ORDER;

/// Settings shared by all suites. Every field is optional in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub decay: f64,
    /// `[re, im]` pairs.
    pub lambda_grid: Vec<[f64; 2]>,
    pub quad_order: usize,
    pub tol: f64,
    pub trials: usize,
    pub output_dir: PathBuf,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        let mut lambda_grid = Vec::new();
        for re in [0.0, 0.25, 0.5, 0.75, 1.0] {
            for im in [0.0, 0.3, -0.3] {
                lambda_grid.push([re, im]);
            }
        }
        Self {
            seed: 1,
            n: 1,
            m: 3,
            decay: 0.5,
            lambda_grid,
            quad_order: 40,
            tol: 1e-6,
            trials: 20,
            output_dir: PathBuf::from("."),
        }
    }
}

/// Command-line values; each one present wins over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigOverrides {
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub quad_order: Option<usize>,
    pub tol: Option<f64>,
    pub trials: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl SuiteConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Flag over file over default.
    pub fn resolve(file: Option<&Path>, flags: &ConfigOverrides) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if let Some(v) = flags.seed {
            cfg.seed = v;
        }
        if let Some(v) = flags.n {
            cfg.n = v;
        }
        if let Some(v) = flags.m {
            cfg.m = v;
        }
        if let Some(v) = flags.quad_order {
            cfg.quad_order = v;
        }
        if let Some(v) = flags.tol {
            cfg.tol = v;
        }
        if let Some(v) = flags.trials {
            cfg.trials = v;
        }
        if let Some(v) = &flags.output_dir {
            cfg.output_dir = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 || self.m < self.n {
            return bad(format!("need m >= n >= 1, got n={}, m={}", self.n, self.m));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad(format!("decay {} outside (0, 1)", self.decay));
        }
        if !(1..=MAX_ORDER).contains(&self.quad_order) {
            return bad(format!(
                "quad_order {} outside 1..={MAX_ORDER}",
                self.quad_order
            ));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol {} must be positive", self.tol));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.lambda_grid.is_empty() {
            return bad("lambda_grid is empty".into());
        }
        for &[re, im] in &self.lambda_grid {
            if !re.is_finite() || !im.is_finite() {
                return bad(format!("λ = {re}{im:+}i is not finite"));
            }
            if !(0.0..=1.0).contains(&re) {
                log::warn!("λ = {re}{im:+}i lies outside the strip 0 ≤ Re λ ≤ 1");
            }
        }
        Ok(())
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        self.lambda_grid
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect()
    }

    /// SHA-256 of the canonical JSON of every field that affects results
    /// (the output directory does not).
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("output_dir");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(
            SuiteConfig::from_json("{}").unwrap(),
            SuiteConfig::default()
        );
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"m": 4, "trials": 5}"#).unwrap();
        let flags = ConfigOverrides {
            trials: Some(2),
            ..Default::default()
        };
        let cfg = SuiteConfig::resolve(Some(&path), &flags).unwrap();
        assert_eq!((cfg.n, cfg.m, cfg.trials), (1, 4, 2));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(SuiteConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let cfg = SuiteConfig {
            tol: 0.0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = SuiteConfig::default();
        let b = SuiteConfig {
            output_dir: "elsewhere".into(),
            ..Default::default()
        };
        let c = SuiteConfig {
            seed: 2,
            ..Default::default()
        };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
