//! Verification suites, their configuration and their reports.

mod checks;
mod config;
mod export;
mod report;

pub use checks::{oracle_residual, tensor_order, truncation_sequence, TRUNCATION_M};
pub use config::{ConfigOverrides, SuiteConfig};
pub use export::{export_measure, ExportKind};
pub use report::{CheckRecord, Provenance, Report};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "COLLIG_THREADS";

/// The named invariant suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Suite {
    Mellin,
    Semigroup,
    Markov,
    Canonical,
    Rn,
    Truncation,
    Norm,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] = [
        Suite::Mellin,
        Suite::Semigroup,
        Suite::Markov,
        Suite::Canonical,
        Suite::Rn,
        Suite::Truncation,
        Suite::Norm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Mellin => "mellin",
            Suite::Semigroup => "semigroup",
            Suite::Markov => "markov",
            Suite::Canonical => "canonical",
            Suite::Rn => "rn",
            Suite::Truncation => "truncation",
            Suite::Norm => "norm",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite {s:?}")))
    }
}

/// Worker pool honoring [`THREADS_ENV`].
fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a count")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

/// Runs a suite. Failed checks are recorded, not raised; errors are
/// reserved for invalid configuration.
pub fn run_suite(suite: Suite, config: &SuiteConfig) -> Result<Report> {
    config.validate()?;
    let start = Instant::now();
    let pool = thread_pool()?;
    let (mut checks, mut skipped) = (Vec::new(), Vec::new());
    let selected: Vec<Suite> = match suite {
        Suite::All => Suite::EACH.to_vec(),
        one => vec![one],
    };
    pool.install(|| {
        for s in selected {
            let out = checks::run(s, config);
            checks.extend(out.records);
            skipped.extend(out.skipped);
        }
    });
    Ok(Report::new(
        suite,
        config,
        checks,
        skipped,
        start.elapsed().as_secs_f64(),
    ))
}
