//! `redmask`: featize -> stats -> augment -> score pipeline, plus speed
//! perturbation and the kernel self-test.
//!
//! Exit codes: 0 on success, 1 on data errors, 2 on usage errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "redmask", version, about = "Alignment-aware masking augmentation for speech features")]
struct Cli {
    /// TOML config file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for corpus operations (default: one per core).
    /// Outputs are identical for any thread count.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract MFCC features from a directory of WAV files.
    Featize(FeatizeArgs),
    /// Print phone duration statistics for a CTM alignment file.
    Stats(StatsArgs),
    /// Apply masking augmentation to a feature archive.
    Augment(AugmentArgs),
    /// Speed-perturb a WAV file and/or rescale a CTM alignment.
    Perturb(PerturbArgs),
    /// Score hypotheses against references (WER with SUB/DEL/INS).
    Score(ScoreArgs),
    /// Run the numeric kernel against its reference oracles.
    KernelSelftest,
}

#[derive(Debug, Args)]
pub struct FeatizeArgs {
    /// Directory scanned (non-recursively) for *.wav files.
    #[arg(long, value_name = "DIR")]
    pub wav_dir: PathBuf,
    /// Output feature archive.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Apply per-utterance cepstral mean and variance normalization.
    #[arg(long)]
    pub cmvn: bool,
    /// Comma-separated speed factors; non-unit factors emit `sp{f}-` copies.
    #[arg(long, value_name = "F,F,...", value_delimiter = ',')]
    pub speed: Vec<f64>,
    /// Expected sample rate of the input WAVs.
    #[arg(long)]
    pub sample_rate: Option<u32>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// CTM alignment file.
    #[arg(long, value_name = "FILE")]
    pub ctm: PathBuf,
    /// Frame shift used to quantize CTM times.
    #[arg(long, default_value_t = 10.0)]
    pub shift_ms: f64,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Input feature archive.
    #[arg(long, value_name = "FILE")]
    pub feats: PathBuf,
    /// CTM alignments (required for pm/wpm/stm).
    #[arg(long, value_name = "FILE")]
    pub ctm: Option<PathBuf>,
    /// Masking method: pm, wpm, stm, or specaugment.
    #[arg(long)]
    pub method: Option<String>,
    /// Fraction of phones/pieces/words to mask.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Fill strategy for masked segments: utt or word.
    #[arg(long)]
    pub fill: Option<String>,
    /// Global seed (falls back to config, then REDMASK_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Named configuration: specaugment, stm, wpm-20, pm, pm-20, pm20-fw.
    #[arg(long)]
    pub preset: Option<String>,
    /// Word-piece vocabulary (required for wpm).
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    /// Output feature archive.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Audit log of every masked region, as TSV.
    #[arg(long, value_name = "FILE")]
    pub plan_log: Option<PathBuf>,
    /// Frame shift used to quantize CTM times.
    #[arg(long, default_value_t = 10.0)]
    pub shift_ms: f64,
    /// SpecAugment maximum frequency-mask width.
    #[arg(long)]
    pub spec_freq_width: Option<usize>,
    /// SpecAugment frequency-mask count.
    #[arg(long)]
    pub spec_freq_masks: Option<usize>,
    /// SpecAugment maximum time-mask width.
    #[arg(long)]
    pub spec_time_width: Option<usize>,
    /// SpecAugment time-mask count.
    #[arg(long)]
    pub spec_time_masks: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    /// Speed factor in (0.5, 2.0).
    #[arg(long)]
    pub factor: f64,
    /// Input WAV file.
    #[arg(long, value_name = "FILE")]
    pub wav: Option<PathBuf>,
    /// Output WAV file (with --wav).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Input CTM to rescale.
    #[arg(long, value_name = "FILE")]
    pub ctm: Option<PathBuf>,
    /// Output CTM (with --ctm).
    #[arg(long, value_name = "FILE")]
    pub out_ctm: Option<PathBuf>,
    /// Prefix for utterance ids in the output CTM, e.g. `sp0.9-` to match
    /// the copies `featize --speed` emits.
    #[arg(long, default_value = "")]
    pub utt_prefix: String,
    /// Frame shift used to quantize CTM times.
    #[arg(long, default_value_t = 10.0)]
    pub shift_ms: f64,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Reference transcripts (trn: `utt_id<TAB>token token ...`).
    #[arg(long = "ref", value_name = "FILE")]
    pub reference: PathBuf,
    /// Hypothesis transcripts (same format).
    #[arg(long, value_name = "FILE")]
    pub hyp: PathBuf,
    /// Also print a per-utterance TSV breakdown.
    #[arg(long)]
    pub detail: bool,
    /// Score graphemes instead of whitespace words (diagnostic).
    #[arg(long)]
    pub graphemes: bool,
}

/// Failures carry the exit-code distinction the pipeline promises.
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Failure::Data(err)
    }
}

impl From<redmask_core::Error> for Failure {
    fn from(err: redmask_core::Error) -> Self {
        Failure::Data(err.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file_config = config::FileConfig::load(cli.config.as_deref()).map_err(Failure::Data)?;
    let jobs = cli.jobs.or(file_config.jobs);
    match cli.command {
        Command::Featize(args) => commands::featize(&args, &file_config, jobs),
        Command::Stats(args) => commands::stats(&args),
        Command::Augment(args) => commands::augment(&args, &file_config, jobs),
        Command::Perturb(args) => commands::perturb(&args),
        Command::Score(args) => commands::score(&args, &file_config),
        Command::KernelSelftest => commands::kernel_selftest(),
    }
}
