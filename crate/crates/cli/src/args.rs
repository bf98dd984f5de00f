use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "npsn",
    version,
    about = "Low-discrepancy and learned latent sampling for trajectory prediction",
    long_about = "Low-discrepancy and learned latent sampling for trajectory prediction.\n\n\
        Every run prints its resolved configuration to stderr. Commands that write files \
        also write <out>.config.json, which `npsn replay` re-executes.\n\n\
        NPSN_THREADS caps the number of worker threads."
)]
pub struct Cli {
    /// Suppress progress output (the resolved configuration is still printed).
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Point-set generation and discrepancy audit.
    #[command(subcommand)]
    Lds(LdsCommand),
    /// Dataset ingestion, synthesis and export.
    #[command(subcommand)]
    Data(DataCommand),
    /// Fit the constant-velocity Gaussian head to a scene file.
    FitHead(FitHeadArgs),
    /// Train NPSN against a frozen head.
    Train(TrainArgs),
    /// Best-of-N evaluation of one sampler.
    Eval(EvalArgs),
    /// MC, QMC and optionally NPSN side by side, with the FDE gain over MC.
    Compare(CompareArgs),
    /// Best-of-N metrics over a grid of sample counts.
    SweepN(SweepArgs),
    /// Integration bias and convergence experiments.
    #[command(subcommand)]
    Bias(BiasCommand),
    /// Re-run a command from its config sidecar.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LdsCommand {
    /// Write a point set as CSV.
    Gen(LdsGenArgs),
    /// Star discrepancy and minimum pairwise distance of a point set.
    Disc(LdsDiscArgs),
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct LdsGenArgs {
    /// mc, sobol, ssobol (alias qmc) or halton.
    #[arg(long, default_value = "ssobol")]
    pub sampler: String,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct LdsDiscArgs {
    /// CSV point set (as written by `lds gen`); generated from the flags below when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "ssobol")]
    pub sampler: String,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the key=value report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataCommand {
    /// Convert an ETH/UCY text file (frame ped x y) into 20-frame scenes.
    Load(DataLoadArgs),
    /// Generate the synthetic branching dataset.
    Synth(DataSynthArgs),
    /// Export a scene file as long-format CSV.
    Export(DataExportArgs),
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct DataLoadArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Window stride in frames.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Source tag stored with each scene; defaults to the input file stem.
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct DataSynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub n_scenes: usize,
    /// Probabilities of straight, left, right (a prefix may be given).
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.34, 0.33, 0.33])]
    pub branches: Vec<f64>,
    /// Meters per frame.
    #[arg(long, default_value_t = 0.4)]
    pub speed: f64,
    /// Gaussian position jitter in meters.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Emit crossing pedestrian pairs.
    #[arg(long)]
    pub interaction: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct DataExportArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct FitHeadArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub head: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub epochs: usize,
    /// Scenes per batch.
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Halve the learning rate every this many epochs.
    #[arg(long, default_value_t = 32)]
    pub lr_step: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr_gamma: f64,
    /// Weight of the discrepancy loss.
    #[arg(long, default_value_t = 1e-2)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    /// Samples per pedestrian the network emits.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    /// Seeds both the initialization and the shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Epoch log CSV; defaults to <out>.log.csv.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub head: PathBuf,
    /// mc, qmc, sobol, halton or npsn:<checkpoint>.
    #[arg(long, default_value = "qmc")]
    pub sampler: String,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Repeats for stochastic samplers; deterministic ones run once.
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub head: PathBuf,
    /// NPSN checkpoint to include.
    #[arg(long)]
    pub npsn: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long)]
    pub head: PathBuf,
    /// Generic samplers: mc, qmc, sobol, halton.
    #[arg(long, value_delimiter = ',', default_values_t = vec!["mc".to_string(), "qmc".to_string()])]
    pub samplers: Vec<String>,
    /// NPSN checkpoints; each reports only at its own sample count.
    #[arg(long)]
    pub npsn: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024])]
    pub grid: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasCommand {
    /// Run one experiment and write its CSV.
    Run(BiasRunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Bias of F(estimate) against K·F''(I)/(2n).
    Taylor,
    /// RMS error against n, with log-log slopes.
    Convergence,
    /// Expected best-of-n ADE for one pedestrian.
    Bestofn,
    /// Integration error against star discrepancy.
    Scatter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalArg {
    Square,
    Linear,
    Exp,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct BiasRunArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    /// Point generators: mc, sobol, ssobol, halton.
    #[arg(long, value_delimiter = ',', default_values_t = vec!["mc".to_string(), "ssobol".to_string()])]
    pub sampler: Vec<String>,
    /// constant, x1, product or bump; defaults to x1 for taylor, product otherwise.
    #[arg(long)]
    pub integrand: Option<String>,
    #[arg(long, value_enum, default_value_t = FunctionalArg::Square)]
    pub functional: FunctionalArg,
    /// Sample count for taylor and scatter.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Sample counts for convergence and bestofn.
    #[arg(long, value_delimiter = ',', default_values_t = vec![16, 32, 64, 128, 256, 512, 1024, 2048, 4096])]
    pub grid: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Scene file for bestofn.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    /// Head file for bestofn.
    #[arg(long)]
    pub head: Option<PathBuf>,
    /// Scene and pedestrian index for bestofn.
    #[arg(long, default_value_t = 0)]
    pub scene_index: usize,
    #[arg(long, default_value_t = 0)]
    pub ped: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// A <out>.config.json written by an earlier run.
    pub sidecar: PathBuf,
    /// Write to this path instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace the recorded seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    /// Primary output path, if the command writes one.
    pub fn output_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Command::Lds(LdsCommand::Gen(a)) => Some(&mut a.out),
            Command::Lds(LdsCommand::Disc(a)) => a.out.as_mut(),
            Command::Data(DataCommand::Load(a)) => Some(&mut a.out),
            Command::Data(DataCommand::Synth(a)) => Some(&mut a.out),
            Command::Data(DataCommand::Export(a)) => Some(&mut a.out),
            Command::FitHead(a) => Some(&mut a.out),
            Command::Train(a) => Some(&mut a.out),
            Command::Eval(a) => Some(&mut a.out),
            Command::Compare(a) => Some(&mut a.out),
            Command::SweepN(a) => Some(&mut a.out),
            Command::Bias(BiasCommand::Run(a)) => Some(&mut a.out),
            Command::Replay(_) => None,
        }
    }

    pub fn seed_mut(&mut self) -> Option<&mut u64> {
        match self {
            Command::Lds(LdsCommand::Gen(a)) => Some(&mut a.seed),
            Command::Lds(LdsCommand::Disc(a)) => Some(&mut a.seed),
            Command::Data(DataCommand::Synth(a)) => Some(&mut a.seed),
            Command::Train(a) => Some(&mut a.seed),
            Command::Eval(a) => Some(&mut a.seed),
            Command::Compare(a) => Some(&mut a.seed),
            Command::SweepN(a) => Some(&mut a.seed),
            Command::Bias(BiasCommand::Run(a)) => Some(&mut a.seed),
            _ => None,
        }
    }
}
