//! `pmfs` — fit, sample and evaluate latent-space samplers from the shell.
//!
//! Exit codes: 0 on success, 1 on runtime or numeric failure, 2 on usage
//! errors (bad flags, missing input files).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pmfs", version, about = "Density estimation and sampling over autoencoder latent spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a PMFS or GMM model to a latent set and save it as JSON.
    Fit(FitArgs),
    /// Draw vectors from a saved model.
    Sample(SampleArgs),
    /// Compare two latent sets; prints a single number.
    Eval(EvalArgs),
    /// Sinkhorn distance to a holdout set for each partition count k.
    Sweep(SweepArgs),
    /// Project named sets to 2D with a PCA basis fitted on the first one.
    Project(ProjectArgs),
    /// Time PMFS against EM on a seeded synthetic mixture.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FitMethod {
    Pmfs,
    Gmm,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    method: FitMethod,
    /// Latent set (.csv, or the binary format for any other extension).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Bins per dimension (PMFS).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    k: Option<u32>,
    /// Mixture components (GMM).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    components: Option<u64>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    max_iters: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Metric {
    Sinkhorn,
    Frechet,
    TvBins,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    metric: Metric,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Absolute entropic regularization; defaults to 0.05 × median cost.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Ground-cost exponent.
    #[arg(long, default_value_t = 2.0)]
    xi: f64,
    /// PMFS model whose grid defines the bins (tv-bins only).
    #[arg(long)]
    model: Option<PathBuf>,
    /// With tv-bins, fail unless every vector of `--a` lands in a positively
    /// weighted bin.
    #[arg(long)]
    require_support: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    holdout: PathBuf,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "1,2,4,8,16", value_parser = clap::value_parser!(u32).range(1..))]
    k_values: Vec<u32>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    /// `name=PATH` pairs; the first set defines the basis.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true, value_parser = parse_named_path)]
    inputs: Vec<(String, PathBuf)>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    d: u64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    k: u32,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    components: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    max_iters: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(3..))]
    repeats: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instead of the comparison, time PMFS fits at each of these sizes.
    #[arg(long, value_delimiter = ',', num_args = 1.., value_parser = clap::value_parser!(u64).range(1..))]
    scaling: Option<Vec<u64>>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_named_path(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected name=PATH, got `{s}`")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => commands::fit(args),
        Command::Sample(args) => commands::sample(args),
        Command::Eval(args) => commands::eval(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Project(args) => commands::project(args),
        Command::Bench(args) => commands::bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
