//! Command-line front end: `features`, `train`, `diarize`, `score`, `synth`
//! and `inspect`.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 data or validation.

mod commands;
mod manifest;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::audio::AudioError;
use crate::features::{FeatureError, FeatureKind};
use crate::metrics::MetricsError;
use crate::model::{Head, ModelError};
use crate::pipeline::PipelineError;
use crate::synth::SynthError;
use crate::tracker::ThresholdMode;

pub use manifest::{Manifest, ManifestRecord, Source, SplitTag};

/// Environment variable naming the directory searched for `model.ckpt`
/// when `diarize` gets no `--model`.
pub const MODEL_DIR_ENV: &str = "DIARKIT_MODEL_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl From<AudioError> for CliError {
    fn from(e: AudioError) -> Self {
        match e {
            AudioError::Unreadable { .. } | AudioError::Write(_) => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Audio(a) => a.into(),
            PipelineError::Model(m) => m.into(),
            PipelineError::Config(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn parse_kind(s: &str) -> Result<FeatureKind, String> {
    s.parse().map_err(|e: FeatureError| e.to_string())
}

fn parse_head(s: &str) -> Result<Head, String> {
    s.parse().map_err(|e: ModelError| e.to_string())
}

fn parse_mode(s: &str) -> Result<ThresholdMode, String> {
    s.parse().map_err(|e: crate::tracker::TrackerError| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "diarkit", version, about = "Speaker diarization with recurrent convolutional speaker embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the feature matrix of one analysis window.
    Features(FeaturesArgs),
    /// Train a speaker classifier from a manifest.
    Train(TrainArgs),
    /// Diarize a WAV file into RTTM.
    Diarize(DiarizeArgs),
    /// Score a hypothesis RTTM against a reference RTTM.
    Score(ScoreArgs),
    /// Generate a synthetic speaker corpus.
    Synth(SynthArgs),
    /// Describe a checkpoint, feature dump, RTTM or WAV file.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DumpFormat {
    Bin,
    Csv,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    pub input: PathBuf,
    /// sftf, logmel, gammatone or cqt.
    #[arg(long = "features", default_value = "cqt", value_parser = parse_kind)]
    pub kind: FeatureKind,
    /// Index of the 3.072 s window (windows start every 250 ms).
    #[arg(long, default_value_t = 0)]
    pub segment: usize,
    #[arg(long, value_enum, default_value_t = DumpFormat::Bin)]
    pub format: DumpFormat,
    /// Skip per-bin normalization.
    #[arg(long)]
    pub raw: bool,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reinterpret the samples at this rate, ignoring the WAV header (diagnostics).
    #[arg(long)]
    pub sample_rate: Option<u32>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Tab-separated manifest: wav, label or RTTM, optional train/test tag.
    pub manifest: PathBuf,
    #[arg(long = "features", default_value = "cqt", value_parser = parse_kind)]
    pub kind: FeatureKind,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// sigmoid or softmax.
    #[arg(long, default_value = "sigmoid", value_parser = parse_head)]
    pub head: Head,
    /// Training share of the seeded segment split for untagged manifests.
    #[arg(long, default_value_t = 0.7)]
    pub split: f64,
    /// Spacing of training windows in seconds.
    #[arg(long, default_value_t = 0.25)]
    pub hop: f64,
    /// Stop once held-out accuracy reaches this value.
    #[arg(long)]
    pub target_accuracy: Option<f64>,
    #[arg(long, default_value = "model.ckpt")]
    pub out: PathBuf,
    /// Also write the training report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiarizeArgs {
    pub input: PathBuf,
    /// Checkpoint; defaults to model.ckpt in $DIARKIT_MODEL_DIR.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long = "features", default_value = "cqt", value_parser = parse_kind)]
    pub kind: FeatureKind,
    /// RTTM output; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = crate::tracker::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// distance or literal.
    #[arg(long, default_value = "distance", value_parser = parse_mode)]
    pub threshold_mode: ThresholdMode,
    /// Majority-vote half-width in windows.
    #[arg(long, default_value_t = 2)]
    pub smoothing: usize,
    /// Minimum turn duration in seconds.
    #[arg(long, default_value_t = 0.5)]
    pub min_turn: f64,
    /// Enable the energy VAD with this threshold in dB below the stream RMS.
    #[arg(long)]
    pub vad_db: Option<f64>,
    /// Worker threads for feature extraction and inference.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// File id written to the RTTM; defaults to the input file stem.
    #[arg(long)]
    pub file_id: Option<String>,
    /// Reinterpret the samples at this rate, ignoring the WAV header (diagnostics).
    #[arg(long)]
    pub sample_rate: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub hyp: PathBuf,
    /// Forgiveness collar in seconds around reference boundaries.
    #[arg(long, default_value_t = crate::metrics::DEFAULT_COLLAR)]
    pub collar: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    pub speakers: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Seconds of material per speaker.
    #[arg(long, default_value_t = 90.0)]
    pub duration: f64,
    /// Also write a dialogue cycling through all speakers this many times.
    #[arg(long)]
    pub dialogue_rounds: Option<usize>,
    /// Turn length in the dialogue, seconds.
    #[arg(long, default_value_t = 15.0)]
    pub turn_seconds: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
}

/// Runs one parsed command, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Features(a) => commands::features(a, out),
        Command::Train(a) => commands::train(a, out),
        Command::Diarize(a) => commands::diarize(a, out),
        Command::Score(a) => commands::score(a, out),
        Command::Synth(a) => commands::synth(a, out),
        Command::Inspect(a) => commands::inspect(a, out),
    }
}

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn main_with_args<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests;
