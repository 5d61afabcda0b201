//! Command-line front end for `ait-core`: instance generation, solving,
//! closed-form bounds, trace verification and parameter sweeps.

pub mod commands;
pub mod report;
pub mod sweep;
pub mod trace;

use std::path::PathBuf;

use ait_core::{MatrixEnsemble, SignRule, ThresholdRule};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ait_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Exit status of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Diverged,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Ok => 0,
            Outcome::Diverged => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ait",
    version,
    about = "Adaptively iterative thresholding for sparse recovery"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random instance bundle.
    Gen(GenArgs),
    /// Run the solver on a bundle.
    Solve(SolveArgs),
    /// Print support-identification bounds for every rule.
    Theory(TheoryArgs),
    /// Run a parameter sweep described by a JSON file.
    Sweep(SweepArgs),
    /// Check a saved trace against a bundle's ground truth.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignsArg {
    Random,
    Positive,
}

impl From<SignsArg> for SignRule {
    fn from(s: SignsArg) -> Self {
        match s {
            SignsArg::Random => SignRule::Random,
            SignsArg::Positive => SignRule::Positive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnsembleArg {
    Gaussian,
    #[value(name = "spike_hadamard", alias = "spike-hadamard")]
    SpikeHadamard,
}

impl From<EnsembleArg> for MatrixEnsemble {
    fn from(e: EnsembleArg) -> Self {
        match e {
            EnsembleArg::Gaussian => MatrixEnsemble::Gaussian,
            EnsembleArg::SpikeHadamard => MatrixEnsemble::SpikeHadamard,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(short = 'M')]
    pub m: usize,
    #[arg(short = 'N')]
    pub n: usize,
    /// True sparsity k*.
    #[arg(short = 'k')]
    pub k_star: usize,
    #[arg(long, default_value_t = 1.0)]
    pub dr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SignsArg::Random)]
    pub signs: SignsArg,
    #[arg(long, value_enum, default_value_t = EnsembleArg::Gaussian)]
    pub ensemble: EnsembleArg,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub bundle: PathBuf,
    /// hard, half, twothirds, soft, scad or scad:a=<a>.
    #[arg(long, default_value = "hard")]
    pub rule: ThresholdRule,
    /// Specified sparsity; defaults to k* when the bundle has a truth.
    #[arg(short = 'k', long = "k")]
    pub k: Option<usize>,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the solution vector (original coordinates) as CSV.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    #[arg(long = "stall-tol")]
    pub stall_tol: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long = "kstar")]
    pub k_star: Option<usize>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub dr: Option<f64>,
    #[arg(short = 'k', long = "k")]
    pub k: Option<usize>,
    /// Print the Welch lower bound for an M x N matrix instead.
    #[arg(long, requires_all = ["m", "n"])]
    pub welch: bool,
    #[arg(short = 'M')]
    pub m: Option<usize>,
    #[arg(short = 'N')]
    pub n: Option<usize>,
    /// Take mu, k* and Dr from a bundle.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub spec: PathBuf,
    /// Output directory for `sweep.csv` and `summary.json`.
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub bundle: PathBuf,
    pub trace: PathBuf,
    #[arg(long, default_value = "hard")]
    pub rule: ThresholdRule,
    #[arg(short = 'k', long = "k")]
    pub k: Option<usize>,
    /// Verdict path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Gen(args) => commands::gen(&args),
        Command::Solve(args) => commands::solve(&args),
        Command::Theory(args) => commands::theory(&args),
        Command::Sweep(args) => sweep::run(&args),
        Command::Verify(args) => commands::verify(&args),
    }
}
