use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Rigid point-cloud registration: synthetic data, ICP and the learned
/// closest-point network.
#[derive(Debug, Parser)]
#[command(name = "dcp", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled pair archive from a mesh/XYZ corpus.
    GenData(GenDataArgs),
    /// Register one source cloud onto one target cloud.
    Register(RegisterArgs),
    /// Train a model and write its checkpoint and training log.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a pair archive.
    Eval(EvalArgs),
    /// Run a full experiment (split, train, evaluate) and write a report.
    Experiment(ExperimentArgs),
    /// Time registration methods over several cloud sizes.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Directory of .off/.xyz files (labeled by top-level folder), or `builtin`.
    #[arg(long, default_value = "builtin")]
    pub corpus: String,
    /// Number of clouds drawn from the built-in shapes.
    #[arg(long, default_value_t = 20)]
    pub clouds: usize,
    #[arg(long, default_value_t = 1024)]
    pub n_points: usize,
    #[arg(long, default_value_t = 1)]
    pub pairs_per_cloud: usize,
    #[arg(long, default_value_t = 45.0)]
    pub max_rot_deg: f64,
    #[arg(long, default_value_t = 0.5)]
    pub trans_bound: f64,
    /// Perturb each source with clipped Gaussian noise.
    #[arg(long)]
    pub noise: bool,
    #[arg(long, default_value_t = 0.01)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise_clip: f64,
    /// Keep target points in source order.
    #[arg(long)]
    pub no_shuffle: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum RegisterMethod {
    Icp,
    #[value(name = "dcp-v1")]
    DcpV1,
    #[value(name = "dcp-v2")]
    DcpV2,
    #[value(name = "dcp+icp")]
    DcpIcp,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long, value_enum)]
    pub method: RegisterMethod,
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Model weights; required by the dcp methods.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Write the source, moved by the estimated transform, here.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

/// Options shared by the config-driven commands.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config entry; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides `output`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for evaluation (overrides `experiment.workers`).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Which variant to train.
    #[arg(long, value_enum, default_value = "dcp-v2")]
    pub method: TrainMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TrainMethod {
    #[value(name = "dcp-v1")]
    DcpV1,
    #[value(name = "dcp-v2")]
    DcpV2,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Pair archive written by gen-data.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Also report the network output polished by ICP.
    #[arg(long)]
    pub polish: bool,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Write report.csv and report.txt here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated subset of icp, dcp-v1, dcp-v2.
    #[arg(long, value_delimiter = ',', default_value = "icp,dcp-v1,dcp-v2")]
    pub methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "512,1024,2048,4096")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// ICP runs exactly this many iterations per registration.
    #[arg(long, default_value_t = 20)]
    pub icp_iters: usize,
    /// Larger clouds are skipped for the network methods.
    #[arg(long, default_value_t = 1024)]
    pub dcp_max_points: usize,
    /// Network architecture preset: v1 (full size) or tiny.
    #[arg(long, default_value = "v1")]
    pub model: String,
    #[arg(long)]
    pub checkpoint_v1: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint_v2: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}
