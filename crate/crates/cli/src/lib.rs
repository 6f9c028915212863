//! Command-line driver for `torsionlab`.
//!
//! [`run`] executes one [`RunRequest`]: it looks the inputs up in the
//! content-addressed cache, otherwise runs the pipeline, and writes the
//! report. Exit codes: 0 success, 2 invalid input, 3 solver failure.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod commands;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde_json::{json, Value};
use thiserror::Error;

pub use cache::{cache_key, canonical_json, Cache, CacheEntry};
pub use report::{write_report, Format, Report, Series};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Environment variable that overrides `--cache-dir`.
pub const CACHE_ENV: &str = "TORSIONLAB_CACHE";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Solver(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => EXIT_VALIDATION,
            CliError::Solver(_) => EXIT_SOLVER,
        }
    }
}

impl From<torsionlab::Error> for CliError {
    fn from(e: torsionlab::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Solver(e.to_string())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Theorem {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    #[value(name = "psz")]
    Psz,
}

impl Theorem {
    pub fn label(self) -> &'static str {
        match self {
            Theorem::One => "1",
            Theorem::Two => "2",
            Theorem::Three => "3",
            Theorem::Psz => "psz",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Grid torsion field, rigidity and distribution function of a domain.
    Torsion,
    /// Fraenkel asymmetry of a domain.
    Asymmetry,
    /// δ(x, D) at --point, or δ_p(D) for --p.
    Deficit,
    /// One theorem certificate (--theorem).
    Certify,
    /// Certificates across the ellipse family (--eps).
    Sweep,
    /// Ball amplitude of the α-stable lifetime by path simulation.
    Calibrate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Torsion => "torsion",
            Command::Asymmetry => "asymmetry",
            Command::Deficit => "deficit",
            Command::Certify => "certify",
            Command::Sweep => "sweep",
            Command::Calibrate => "calibrate",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "torsionlab", version, about = "Expected lifetimes, torsion and quantitative deficit certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Clone, Debug, clap::Args)]
pub struct Options {
    /// Domain spec JSON file.
    #[arg(long, global = true)]
    pub domain: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub theorem: Option<Theorem>,
    /// Exponent p ≥ 1 or `inf`.
    #[arg(long, global = true)]
    pub p: Option<String>,
    /// Stable order α in (0, 2].
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Evaluation point `X,Y[,Z]`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub point: Option<String>,
    #[arg(long, global = true, default_value_t = 256)]
    pub grid_res: usize,
    /// Monte Carlo paths (walk on spheres, per sample cell for Theorem 3,
    /// or calibration paths).
    #[arg(long, global = true)]
    pub wos_paths: Option<usize>,
    /// Walk-on-spheres absorption distance.
    #[arg(long, global = true)]
    pub wos_eps: Option<f64>,
    #[arg(long, global = true, default_value_t = torsionlab::certify::DEFAULT_BETA_N)]
    pub beta_n: f64,
    #[arg(long, global = true, default_value_t = torsionlab::certify::DEFAULT_THETA)]
    pub theta: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated ellipse parameters for `sweep`.
    #[arg(long, global = true, default_value = "0.05,0.1,0.15,0.2,0.3")]
    pub eps: String,
    /// Stable ball amplitude; calibrated by simulation when omitted.
    #[arg(long, global = true)]
    pub amplitude: Option<f64>,
    /// Sample grid resolution for fractional rigidity.
    #[arg(long, global = true, default_value_t = 48)]
    pub sample_res: usize,
    /// Time step for path simulation (`calibrate`).
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub dt: f64,
    /// Dimension for `calibrate` when no domain is given.
    #[arg(long, global = true, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Bypass the cache entirely.
    #[arg(long, global = true)]
    pub no_cache: bool,
    /// Output path (a directory for svg-data); stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

/// A fully resolved invocation.
#[derive(Clone, Debug)]
pub struct RunRequest {
    pub command: Command,
    pub options: Options,
    /// Effective cache directory after applying the environment override.
    pub cache_dir: Option<PathBuf>,
}

impl RunRequest {
    /// `env_cache` is the value of `TORSIONLAB_CACHE`, passed in so callers
    /// control the environment.
    pub fn new(cli: Cli, env_cache: Option<PathBuf>) -> Self {
        let cache_dir = if cli.options.no_cache {
            None
        } else {
            env_cache.or_else(|| cli.options.cache_dir.clone())
        };
        Self {
            command: cli.command,
            options: cli.options,
            cache_dir,
        }
    }

    pub fn parse_from<I, T>(args: I, env_cache: Option<PathBuf>) -> Result<Self, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        Ok(Self::new(Cli::try_parse_from(args)?, env_cache))
    }
}

/// What a run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub from_cache: bool,
    pub written: Vec<PathBuf>,
    /// Rendered report when no `--out` was given.
    pub stdout: Option<String>,
}

/// Executes a request: cache lookup, pipeline, report.
pub fn run(req: &RunRequest) -> Result<RunOutcome, CliError> {
    if req.options.format == Format::SvgData && req.options.out.is_none() {
        return Err(CliError::Validation("--format svg-data needs --out DIR".into()));
    }
    let prepared = commands::prepare(req)?;
    let inputs = json!({
        "command": req.command.name(),
        "inputs": prepared.inputs.clone(),
    });
    let cache = match &req.cache_dir {
        Some(dir) => Some(Cache::open(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?),
        None => None,
    };
    let _lock = match &cache {
        Some(c) => Some(c.lock().map_err(|e| CliError::Io(e.to_string()))?),
        None => None,
    };
    let cached = cache
        .as_ref()
        .and_then(|c| c.lookup(&inputs))
        .and_then(|v| {
            let r = Report::from_value(v);
            if r.is_none() {
                warn!("cached payload does not decode as a report; recomputing");
            }
            r
        });
    let from_cache = cached.is_some();
    let report = match cached {
        Some(r) => {
            info!("served from cache");
            r
        }
        None => {
            let r = with_threads(req.options.threads, || commands::execute(req, &prepared))?;
            if let Some(c) = &cache {
                if let Err(e) = c.store(&inputs, &r.to_value()) {
                    warn!("cache store failed: {e}");
                }
            }
            r
        }
    };
    let (written, stdout) = match &req.options.out {
        Some(out) => (write_report(&report, req.options.format, out)?, None),
        None => {
            if report.csv_rows() == 0 && report.series.is_empty() {
                return Err(CliError::Validation("nothing to report: empty payload".into()));
            }
            (Vec::new(), Some(report.render(req.options.format)?))
        }
    };
    Ok(RunOutcome {
        report,
        from_cache,
        written,
        stdout,
    })
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match threads {
        None => f(),
        Some(0) => Err(CliError::Validation("--threads must be >= 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::Solver(e.to_string()))?
            .install(f),
    }
}

/// Parses argv, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I, env_cache: Option<PathBuf>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let req = match RunRequest::parse_from(args, env_cache) {
        Ok(r) => r,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&req) {
        Ok(out) => {
            if let Some(s) = out.stdout {
                print!("{s}");
            }
            for p in &out.written {
                info!("wrote {}", p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("torsionlab {}: {e}", req.command.name());
            e.exit_code()
        }
    }
}

/// JSON number, with non-finite values mapped to null.
pub(crate) fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}
