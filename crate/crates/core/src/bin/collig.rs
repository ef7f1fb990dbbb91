use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use collig::colligation::{random_colligation, Colligation};
use collig::numerics::RngStream;
use collig::polymorphism::{write_kernel_csv, KernelEvaluator};
use collig::rx::{PhiParams, XiParams};
use collig::verify::{export_measure, run_suite, ConfigOverrides, ExportKind, Suite, SuiteConfig};
use collig::Error;

#[derive(Parser)]
#[command(
    name = "collig",
    version,
    about = "Verification harness for colligation polymorphisms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and write report.json and checks.csv.
    Verify {
        /// mellin, semigroup, markov, canonical, rn, truncation, norm or all.
        suite: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        quad_order: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a Φ, Ξ or fiber measure as CSV, or as JSON for a `.json` path.
    ExportMeasure {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, allow_negative_numbers = true)]
        b: Option<f64>,
        #[arg(long = "M", alias = "big-m")]
        big_m: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        psi: Option<f64>,
        #[command(flatten)]
        source: Source,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        u: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write `x,u,re,im` rows of the kernel of an `n = 1` colligation.
    ExportKernel {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        lambda_re: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        lambda_im: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Phi,
    Xi,
    Fiber,
}

/// A colligation from a JSON file, or a seeded random one.
#[derive(clap::Args)]
struct Source {
    #[arg(long)]
    colligation: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 0.5)]
    decay: f64,
}

impl Source {
    fn load(&self) -> collig::Result<Colligation> {
        match &self.colligation {
            Some(path) => Colligation::from_json(&std::fs::read_to_string(path)?),
            None => random_colligation(
                self.n,
                self.m,
                self.decay,
                &mut RngStream::new(self.seed, 0),
            ),
        }
    }
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("collig: {msg}");
    ExitCode::from(2)
}

fn failure(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("collig: {msg}");
    ExitCode::from(1)
}

fn verify(suite: &str, file: Option<&Path>, flags: ConfigOverrides) -> ExitCode {
    let suite: Suite = match suite.parse() {
        Ok(s) => s,
        Err(e) => return usage(e),
    };
    let config = match SuiteConfig::resolve(file, &flags) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    let report = match run_suite(suite, &config) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => return usage(e),
        Err(e) => return failure(e),
    };
    if let Err(e) = report.write(&config.output_dir) {
        return failure(e);
    }
    for c in report.failures() {
        let residual = c
            .residual
            .map_or_else(|| "error".to_string(), |r| format!("{r:e}"));
        println!(
            "FAIL {} [{}] residual {} threshold {:e}{}",
            c.check_id,
            c.params,
            residual,
            c.threshold,
            c.detail
                .as_deref()
                .map(|d| format!(": {d}"))
                .unwrap_or_default()
        );
    }
    let failed = report.failures().count();
    println!(
        "{} {}: {} checks, {} failed, {} skipped, {:.1} s",
        if report.pass { "PASS" } else { "FAIL" },
        report.suite,
        report.checks.len(),
        failed,
        report.skipped.len(),
        report.wall_time_s
    );
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Verify {
            suite,
            config,
            seed,
            n,
            m,
            quad_order,
            tol,
            trials,
            out,
        } => verify(
            &suite,
            config.as_deref(),
            ConfigOverrides {
                seed,
                n,
                m,
                quad_order,
                tol,
                trials,
                output_dir: out,
            },
        ),
        Command::ExportMeasure {
            kind,
            b,
            big_m,
            h,
            psi,
            source,
            x,
            u,
            tol,
            out,
        } => {
            let request = match kind {
                Kind::Phi => match (b, big_m) {
                    (Some(b), Some(m)) => ExportKind::Phi(PhiParams { b, m }),
                    _ => return usage("--kind phi needs --b and --M"),
                },
                Kind::Xi => match (h, psi) {
                    (Some(h), Some(psi)) => ExportKind::Xi(XiParams { h, psi }),
                    _ => return usage("--kind xi needs --h and --psi"),
                },
                Kind::Fiber => {
                    let colligation = match source.load() {
                        Ok(g) => g,
                        Err(e) => return usage(e),
                    };
                    let n = colligation.n();
                    ExportKind::Fiber {
                        colligation,
                        x: x.unwrap_or_else(|| vec![0.0; n]),
                        u: u.unwrap_or_else(|| vec![0.0; n]),
                        tol,
                    }
                }
            };
            match export_measure(&request, &out) {
                Ok(_) => ExitCode::SUCCESS,
                Err(e @ (Error::Io(_) | Error::Json(_))) => failure(e),
                Err(e) => usage(e),
            }
        }
        Command::ExportKernel {
            source,
            lambda_re,
            lambda_im,
            out,
        } => {
            let ke = match source.load().and_then(|g| KernelEvaluator::new(&g)) {
                Ok(k) => k,
                Err(e) => return usage(e),
            };
            let grid: Vec<f64> = (0..=24).map(|i| -3.0 + 0.25 * i as f64).collect();
            let lambda = Complex64::new(lambda_re, lambda_im);
            let written = std::fs::File::create(&out)
                .map_err(Error::from)
                .and_then(|f| {
                    write_kernel_csv(&ke, lambda, &grid, &grid, std::io::BufWriter::new(f))
                });
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(e @ Error::Io(_)) => failure(e),
                Err(e) => usage(e),
            }
        }
    }
}
