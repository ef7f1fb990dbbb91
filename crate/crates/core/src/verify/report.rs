use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Suite, SuiteConfig};
use crate::error::Result;

/// One checked inequality `residual ≤ threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check_id: String,
    pub params: String,
    /// `None` when the computation itself failed.
    pub residual: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub wall_time_s: f64,
}

impl CheckRecord {
    pub fn new(
        check_id: &str,
        params: String,
        residual: f64,
        threshold: f64,
        wall_time_s: f64,
    ) -> Self {
        Self {
            check_id: check_id.to_string(),
            params,
            residual: Some(residual),
            threshold,
            pass: residual <= threshold,
            detail: None,
            wall_time_s,
        }
    }

    pub fn failed(
        check_id: &str,
        params: String,
        threshold: f64,
        detail: String,
        wall_time_s: f64,
    ) -> Self {
        Self {
            check_id: check_id.to_string(),
            params,
            residual: None,
            threshold,
            pass: false,
            detail: Some(detail),
            wall_time_s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub pass: bool,
    pub provenance: Provenance,
    pub config: SuiteConfig,
    /// Grid points left out, with the reason.
    pub skipped: Vec<String>,
    pub checks: Vec<CheckRecord>,
    pub wall_time_s: f64,
}

impl Report {
    pub(super) fn new(
        suite: Suite,
        config: &SuiteConfig,
        checks: Vec<CheckRecord>,
        skipped: Vec<String>,
        wall_time_s: f64,
    ) -> Self {
        Self {
            suite: suite.name().to_string(),
            pass: checks.iter().all(|c| c.pass),
            provenance: Provenance {
                seed: config.seed,
                config_hash: config.hash(),
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
            config: config.clone(),
            skipped,
            checks,
            wall_time_s,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn max_residual(&self, prefix: &str) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| c.check_id.starts_with(prefix))
            .filter_map(|c| c.residual)
            .reduce(f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `report.json` and `checks.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json()? + "\n")?;
        let mut csv = fs::File::create(dir.join("checks.csv"))?;
        writeln!(csv, "check_id,params,residual,threshold,pass")?;
        for c in &self.checks {
            let residual = c
                .residual
                .map_or_else(|| "NaN".to_string(), |r| format!("{r:e}"));
            writeln!(
                csv,
                "{},\"{}\",{},{:e},{}",
                c.check_id,
                c.params.replace('"', "'"),
                residual,
                c.threshold,
                c.pass
            )?;
        }
        Ok(())
    }
}
