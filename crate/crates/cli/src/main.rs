//! `copmix` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or validation error, 1 runtime failure.

mod commands;
mod config;
mod io;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use copmix::mesh::BinsRule;
use copmix::mixture::Init;
use copmix::stat_tests::Estimator;

/// A problem with the invocation or its inputs (exit code 2).
#[derive(Debug)]
pub struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(name = "copmix", version, about = "Spline density estimation and copula-mixture clustering")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Random seed (mandatory when the CI environment variable is set)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output path (gendata, metrics) or output prefix (density, cluster)
    #[arg(long, short = 'o', global = true)]
    pub out: Option<PathBuf>,
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset (x1..x4), a univariate sample, or data from a recipe
    Gendata(GendataArgs),
    /// Fit the spline density estimator to one column
    Density(DensityArgs),
    /// Fit a copula mixture and label every row
    Cluster(ClusterArgs),
    /// Score a labelling of a dataset
    Metrics(MetricsArgs),
}

#[derive(Args, Debug)]
pub struct GendataArgs {
    /// x1, x2, x3, x4, or a distribution such as `normal:5,0.3`, `exponential:1`, `mixture`
    pub dataset: Option<String>,
    /// Recipe JSON to generate from instead of a named dataset
    #[arg(long, conflicts_with = "dataset")]
    pub recipe: Option<PathBuf>,
    /// Sample size for univariate distributions
    #[arg(short, long, default_value_t = 1000)]
    pub n: usize,
}

#[derive(Args, Debug)]
pub struct DensityArgs {
    pub input: PathBuf,
    /// Column name, or 1-based index (default: first feature column)
    #[arg(long)]
    pub column: Option<String>,
    /// rice, cuberoot, or an explicit interval count
    #[arg(long)]
    pub bins: Option<BinsRule>,
    /// Extend the support by this fraction of the range on each side
    #[arg(long)]
    pub padding: Option<f64>,
    /// Ground-truth distribution for a goodness-of-fit report
    #[arg(long)]
    pub truth: Option<String>,
    /// Also fit the uniform-kernel baseline
    #[arg(long)]
    pub baseline: bool,
    /// Number of plot-grid points
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    pub input: PathBuf,
    /// Number of clusters
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Comma-separated copula families, or `all`
    #[arg(long)]
    pub families: Option<String>,
    /// random or kmeans
    #[arg(long)]
    pub init: Option<Init>,
    /// rice, cuberoot, or an explicit interval count
    #[arg(long)]
    pub bins: Option<BinsRule>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// bshqi or kernel
    #[arg(long)]
    pub marginal: Option<Estimator>,
    /// Floor of the pseudo-observation clamp
    #[arg(long)]
    pub clamp: Option<f64>,
    /// Widen each cluster's clamp with its size (true/false)
    #[arg(long)]
    pub adaptive_clamp: Option<bool>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    pub input: PathBuf,
    /// Predicted labels (CSV with a `label` column)
    #[arg(long)]
    pub labels: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use copmix::Error as E;
    if err.downcast_ref::<Usage>().is_some()
        || err.downcast_ref::<csv::Error>().is_some()
        || err.downcast_ref::<std::io::Error>().is_some()
    {
        return 2;
    }
    match err.downcast_ref::<E>() {
        Some(
            E::EmptyInput
            | E::DegenerateSupport
            | E::OutOfSupport { .. }
            | E::InvalidMesh(_)
            | E::InvalidSample(_)
            | E::InvalidParameter(_)
            | E::DimensionMismatch { .. }
            | E::Unsupported(_),
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gendata(a) => commands::gendata(&cli.common, a),
        Command::Density(a) => commands::density(&cli.common, a),
        Command::Cluster(a) => commands::cluster(&cli.common, a),
        Command::Metrics(a) => commands::metrics(&cli.common, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
