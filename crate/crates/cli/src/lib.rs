//! Command-line surface for `ensemblefuse`.
//!
//! Matrices travel as CSV, reports as JSON. Diagnostics go to stderr and
//! human-readable tables to stdout. Exit codes: 0 success, 2 invalid input,
//! 3 runtime failure.

mod commands;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::run;

/// Environment variable consulted when no seed is given on the command line.
pub const SEED_ENV: &str = "ENSEMBLEFUSE_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "ensemblefuse",
    version,
    about = "Evaluate, weight and fuse multi-label model predictions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-class and mean AUC of one prediction file
    Evaluate(EvaluateArgs),
    /// Search ensemble weights with differential evolution
    Optimize(OptimizeArgs),
    /// Weighted average of prediction files
    Fuse(FuseArgs),
    /// Combined imbalance-aware loss of one prediction file
    Loss(LossArgs),
    /// ROC curve of one class
    Roc(RocArgs),
    /// Generate a synthetic long-tail dataset with simulated model outputs
    Synth(SynthArgs),
    /// Train the linear toy model on a feature/label pair
    Train(TrainArgs),
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// AUC report JSON
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Two or more prediction files (repeat the flag or list them)
    #[arg(long, num_args = 1.., required = true)]
    pub pred: Vec<PathBuf>,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, env = SEED_ENV)]
    pub seed: u64,
    /// Population size [default: max(10 K, 16)]
    #[arg(long)]
    pub pop: Option<usize>,
    /// Mutation factor
    #[arg(long = "F", default_value_t = 0.5)]
    pub mutation: f64,
    /// Crossover rate
    #[arg(long = "CR", default_value_t = 0.9)]
    pub crossover: f64,
    #[arg(long = "max-gen", default_value_t = 200)]
    pub max_generations: usize,
    /// Stop after this many generations without improvement
    #[arg(long, default_value_t = 30)]
    pub stall: usize,
    /// Result JSON
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub pred: Vec<PathBuf>,
    /// Comma-separated weights, one per prediction file
    #[arg(long, allow_hyphen_values = true)]
    pub weights: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub gamma_pos: f64,
    #[arg(long, default_value_t = 4.0)]
    pub gamma_neg: f64,
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    /// Scale each entry by its prevalence-derived class weight
    #[arg(long)]
    pub weighted: bool,
    #[arg(long, default_value_t = 1e-7)]
    pub epsilon: f64,
    /// Also write the JSON to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RocArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long = "class")]
    pub class: String,
    /// threshold,fpr,tpr CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON config; omitted fields take their defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// train,test,val fractions
    #[arg(long)]
    pub split: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON config; omitted fields take their defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config's feature file
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Overrides the config's label file
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// train,test,val fractions
    #[arg(long)]
    pub split: Option<String>,
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ensemblefuse::Error> for CliError {
    fn from(err: ensemblefuse::Error) -> Self {
        if err.is_validation() {
            Self::validation(err.to_string())
        } else {
            Self::runtime(err.to_string())
        }
    }
}
