use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "continest", version, about = "Continuous-time influence estimation and maximization")]
pub struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Generate a Kronecker network with random Weibull delays.
    Generate(GenerateArgs),
    /// Estimate the influence of a source set.
    Estimate(EstimateArgs),
    /// Select sources greedily.
    Maximize(MaximizeArgs),
    /// Compare estimates with empirical influence from cascades.
    EvalCascades(EvalCascadesArgs),
    /// Run a benchmark suite.
    Benchmark(BenchmarkArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Estimate(_) => "estimate",
            Command::Maximize(_) => "maximize",
            Command::EvalCascades(_) => "eval-cascades",
            Command::Benchmark(_) => "benchmark",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = ["core-periphery", "random", "hierarchical"])]
    pub preset: String,
    #[arg(long)]
    pub power: u32,
    #[arg(long)]
    pub density: f64,
    #[arg(long, default_value_t = 0.0)]
    pub param_low: f64,
    #[arg(long, default_value_t = 10.0)]
    pub param_high: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Continest,
    Naive,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Comma-separated node ids, or a file of ids.
    #[arg(long)]
    pub sources: String,
    /// Time window.
    #[arg(long = "T", alias = "window")]
    pub window: f64,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Method::Continest)]
    pub method: Method,
    /// Fill the wall_ms column; the output is then no longer reproducible.
    #[arg(long)]
    pub record_timing: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MaximizeArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub budget: usize,
    #[arg(long = "T", alias = "window")]
    pub window: f64,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Re-evaluate every candidate each round instead of lazily.
    #[arg(long)]
    pub eager: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalCascadesArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub cascades: PathBuf,
    #[arg(long = "T", alias = "window")]
    pub window: f64,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Score on random test splits holding out `1 - train_fraction` of cascades.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub repeats: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Accuracy,
    ScalingDensity,
    ScalingSize,
    Sources,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, value_parser = ["core-periphery", "random", "hierarchical"])]
    pub preset: Option<String>,
    /// Kronecker power for single-network suites.
    #[arg(long)]
    pub power: Option<u32>,
    /// Kronecker powers for the size suite.
    #[arg(long, value_delimiter = ',')]
    pub powers: Option<Vec<u32>>,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub densities: Option<Vec<f64>>,
    /// Sample counts for the error-vs-samples series.
    #[arg(long, value_delimiter = ',')]
    pub samples: Option<Vec<usize>>,
    /// Label-set counts for the error-vs-labels series.
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub windows: Option<Vec<f64>>,
    #[arg(long = "T", alias = "window")]
    pub window: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub truth_samples: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub max_budget: Option<usize>,
    /// Timing repetitions per point; the minimum is reported.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub gen_seed: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reject configurations estimated to run longer than this.
    #[arg(long, default_value_t = 3600.0)]
    pub max_seconds: f64,
    #[arg(long)]
    pub record_timing: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write to this path instead of the recorded output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
