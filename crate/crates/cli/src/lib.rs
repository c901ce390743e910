//! `dcae`: the denoising pipeline as composable subcommands that talk
//! through ECGD dataset files, EDAE checkpoints and CSV.

mod commands;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dcae_core::noise::{DEFAULT_SNR_MEAN_DB, DEFAULT_SNR_STD_DB};

pub use commands::run;

/// Environment variable naming the directory for outputs whose path was
/// not given.
pub const OUT_DIR_ENV: &str = "DCAE_OUT_DIR";

pub mod exit {
    pub const IO: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const DATA: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] dcae_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use dcae_core::Error as E;
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } | CliError::Core(E::Io(_)) => exit::IO,
            CliError::Core(
                E::Parse { .. } | E::UnsupportedFormat(_) | E::Truncated { .. } | E::Corrupt(_),
            ) => exit::PARSE,
            CliError::Core(_) => exit::DATA,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dcae",
    version,
    about = "Denoise ECG windows with a convolutional autoencoder"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a noisy/clean dataset from synthetic subjects or WFDB records.
    Generate(GenerateArgs),
    /// Train the autoencoder with early stopping.
    Train(TrainArgs),
    /// Replace each noisy window with its reconstruction.
    Denoise(DenoiseArgs),
    /// Score SNR improvement, heart rate and R-peak precision.
    Eval(EvalArgs),
    /// Blank part of a beat with white noise and compare reconstructions.
    Occlude(OccludeArgs),
    /// Write PSD, spectrogram or latent-activation CSVs.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// Number of synthetic subjects.
    #[arg(long, conflicts_with = "wfdb_dir")]
    pub synth: Option<u32>,
    /// Directory of WFDB records (format 16) to ingest.
    #[arg(long)]
    pub wfdb_dir: Option<PathBuf>,
    /// Signal label (or index) to read from each WFDB record.
    #[arg(long, default_value = "I")]
    pub channel: String,
    /// Length of each synthetic recording, seconds.
    #[arg(long, default_value_t = 30.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0)]
    pub first_subject: u32,
    #[arg(long, default_value_t = 100.0)]
    pub fs: f64,
    #[arg(long, default_value_t = 10.0)]
    pub window: f64,
    #[arg(long, default_value_t = 0.9)]
    pub overlap: f64,
    #[arg(long, default_value_t = DEFAULT_SNR_MEAN_DB, allow_negative_numbers = true)]
    pub snr_mean: f64,
    #[arg(long, default_value_t = DEFAULT_SNR_STD_DB)]
    pub snr_std: f64,
    /// Keep at most this many pairs.
    #[arg(long)]
    pub max_pairs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Encoder channel widths, input to latent.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 4, 8, 16, 32])]
    pub channels: Vec<usize>,
    /// Encoder kernel sizes; the decoder mirrors them.
    #[arg(long, value_delimiter = ',', default_values_t = vec![75usize, 45, 45, 45])]
    pub kernels: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
    /// Window length the model accepts, samples.
    #[arg(long, default_value_t = 1000)]
    pub input_length: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 20)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 3)]
    pub patience: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Fraction of extra inverted or time-reversed training pairs.
    #[arg(long, default_value_t = 0.0)]
    pub augment: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Checkpoint path; history and config are written next to it.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Subject whose clean windows form the template (default: first pair's).
    #[arg(long)]
    pub template_subject: Option<u32>,
    /// Per-window CSV; the summary goes to `<out>.summary.json`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionArg {
    TWave,
    PQrs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OccludeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub region: RegionArg,
    /// Number of windows to probe.
    #[arg(long, default_value_t = 50)]
    pub windows: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportKind {
    Psd,
    Spectrogram,
    Latent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalArg {
    Clean,
    Noisy,
    Denoised,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExportArgs {
    #[arg(long, value_enum)]
    pub kind: ExportKind,
    #[arg(long)]
    pub data: PathBuf,
    /// Needed for latent export and for the denoised signal class.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Window to export (spectrogram, latent).
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, value_enum, default_value_t = SignalArg::Noisy)]
    pub signal: SignalArg,
    /// Welch segment length, seconds.
    #[arg(long, default_value_t = 2.0)]
    pub segment: f64,
    /// Spectrogram window, seconds.
    #[arg(long, default_value_t = 0.1)]
    pub window: f64,
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    /// Gaussian smoothing of the spectrogram, in bins.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Latent channels to keep (default: all).
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<usize>>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}
