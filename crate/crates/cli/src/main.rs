//! `affdim`: information dimension, affine decompositions and rate-distortion
//! bias of linear images of discrete-continuous sources.
//!
//! Exit codes: 0 success, 1 numeric or I/O failure, 2 invalid configuration.

mod commands;
mod manifest;
mod output;
mod repro;

use std::path::PathBuf;
use std::process::ExitCode;

use affdim_core::Error;
use clap::{Args, Parser, Subcommand};

/// Prefixes `module` unless the message already names it.
fn with_module(module: &str, msg: impl std::fmt::Display) -> String {
    let msg = msg.to_string();
    match msg.strip_prefix("invalid argument: ") {
        Some(rest) if rest.starts_with(module) => rest.to_string(),
        _ if msg.starts_with(module) => msg,
        _ => format!("{module}: {msg}"),
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input or flags; exit 2.
    Validation(String),
    /// The computation failed; exit 1.
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn io(e: impl std::fmt::Display) -> Self {
        CliError::Io(e.to_string())
    }

    pub fn invalid(module: &str, msg: impl std::fmt::Display) -> Self {
        CliError::Validation(with_module(module, msg))
    }

    /// Attributes a core error to `module`.
    pub fn from_core(module: &str, e: Error) -> Self {
        match e {
            Error::ParseRational(_)
            | Error::InvalidSource(_)
            | Error::DimensionMismatch(_)
            | Error::EnumerationCap { .. }
            | Error::DependentSensitivity
            | Error::InvalidArgument(_)
            | Error::Json(_) => CliError::invalid(module, e),
            Error::EmptyBatch
            | Error::PurelyDiscrete
            | Error::NonFinite(_)
            | Error::ZeroMatrix
            | Error::NoConvergence(_) => CliError::Numeric(with_module(module, e)),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Numeric(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "affdim", version, about = "Information dimension and rate-distortion bias of affinely singular random vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Inputs {
    /// Source description (JSON).
    #[arg(long)]
    pub source: PathBuf,
    /// Matrix A (JSON: {rows, cols, entries}).
    #[arg(long)]
    pub matrix: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact (or Monte Carlo) information dimension of Y = A X.
    Rid {
        #[command(flatten)]
        inputs: Inputs,
        /// Monte Carlo sample count instead of exact enumeration.
        #[arg(long)]
        mc: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest dimension enumerated exactly.
        #[arg(long, default_value_t = affdim_core::rid::DEFAULT_ENUMERATION_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Affine components of Y = A X.
    Decompose {
        #[command(flatten)]
        inputs: Inputs,
        /// Include the (nu, x_d) members of each component.
        #[arg(long)]
        audit: bool,
        /// Attach differential entropies (Gaussian or uniform parts).
        #[arg(long)]
        entropies: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dimensional rate bias of Y = A X, optionally against the rate-distortion oracle.
    Drb {
        #[command(flatten)]
        inputs: Inputs,
        /// Distortions for the grid oracle, e.g. 1e-2,1e-3 (scalar Y only).
        #[arg(long, value_delimiter = ',')]
        oracle: Vec<f64>,
        #[arg(long)]
        grid_step: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV of the oracle curve; a gnuplot script is written next to it.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Slope of quantized entropy against log2 of the scale.
    EmpiricalRid {
        #[command(flatten)]
        inputs: Inputs,
        /// `lo..hi` (powers of two in between) or a comma list.
        #[arg(long, default_value = "16..1024")]
        scales: String,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-scale CSV; a gnuplot script is written next to it.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Block information dimension of a moving-average process.
    Ma {
        #[command(flatten)]
        ma: MaArgs,
        /// Block lengths: `1..12`, `5` or `1,2,8`.
        #[arg(long, default_value = "1..12")]
        m: String,
        #[arg(long)]
        mc: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a gnuplot script for the CSV (requires --out).
        #[arg(long)]
        gnuplot: bool,
    },
    /// Concentration bounds for the dimension of an MA block.
    MaBounds {
        #[command(flatten)]
        ma: MaArgs,
        /// Number of noise inputs.
        #[arg(long)]
        n: usize,
        /// Thresholds: `k`, `lo..hi` or a comma list (default: all).
        #[arg(long)]
        k: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Sampled check of the bounds with this many trials.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spark and rank of a matrix.
    Spark {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerates the example tables into a report directory.
    Repro {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip the rate-distortion oracle (the slowest step).
        #[arg(long)]
        no_oracle: bool,
    },
}

#[derive(Args, Debug, Clone)]
pub struct MaArgs {
    /// Filter taps from a_{-l1} to a_{l2}, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub taps: String,
    /// Number of anticausal taps.
    #[arg(long, default_value_t = 0)]
    pub l1: usize,
    #[arg(long)]
    pub alpha: String,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("AFFDIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::invalid("AFFDIM_THREADS", format!("expected a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(CliError::io)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Rid { inputs, mc, seed, cap, out } => commands::rid(&inputs, mc, seed, cap, out.as_deref()),
        Command::Decompose { inputs, audit, entropies, out } => {
            commands::decompose(&inputs, audit, entropies, out.as_deref())
        }
        Command::Drb { inputs, oracle, grid_step, out, csv } => {
            commands::drb(&inputs, &oracle, grid_step, out.as_deref(), csv.as_deref())
        }
        Command::EmpiricalRid { inputs, scales, samples, seed, out, csv } => {
            commands::empirical_rid(&inputs, &scales, samples, seed, out.as_deref(), csv.as_deref())
        }
        Command::Ma { ma, m, mc, seed, out, gnuplot } => {
            commands::ma(&ma, &m, mc, seed, out.as_deref(), gnuplot)
        }
        Command::MaBounds { ma, n, k, eps, delta, trials, seed, out } => {
            commands::ma_bounds(&ma, n, k.as_deref(), eps, delta, trials, seed, out.as_deref())
        }
        Command::Spark { matrix, out } => commands::spark(&matrix, out.as_deref()),
        Command::Repro { out, seed, no_oracle } => repro::run(&out, seed, !no_oracle),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
