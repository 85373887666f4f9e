use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "suprahmm", version, about = "Talking-condition identification with suprasegmental HMMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn audio records into feature files and write an updated manifest.
    Extract(ExtractArgs),
    /// Train a model bank for one registered system.
    Train(TrainArgs),
    /// Score a test set against a bank and write report tables.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic feature corpus with known generators.
    Synth(SynthArgs),
    /// List the registered systems.
    Systems,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ShapeArg {
    Linear,
    Circular,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    /// Registered system preset (see `suprahmm systems`).
    #[arg(long, default_value = "csphmm2")]
    pub system: String,
    /// Chain order of the acoustic model; overrides the preset.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub order: Option<u8>,
    /// State topology; overrides the preset.
    #[arg(long, value_enum)]
    pub shape: Option<ShapeArg>,
    #[arg(long, default_value_t = 6)]
    pub states: usize,
    /// Suprasegmental states; 0 removes the layer.
    #[arg(long)]
    pub supra_states: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub mixtures: usize,
    #[arg(long, default_value_t = 3)]
    pub supra_mixtures: usize,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Divide each stream's log-likelihood by its observation count.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 16)]
    pub codebook_size: usize,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Split plan; training uses its train side. Without it every record is used.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub bank: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Baseline {
    Vq,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Split plan; evaluation uses its test side. Without it every record is scored.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Second bank for the significance test and comparison table.
    #[arg(long)]
    pub compare_bank: Option<PathBuf>,
    /// Fusion weight override for this evaluation.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Re-fuse at 0.0, 0.1, ..., 1.0 and write the sweep table.
    #[arg(long)]
    pub alpha_sweep: bool,
    /// Train a baseline on the split's train side and add it to the comparison.
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// Feed sample SDs instead of standard errors into the pooled deviation.
    #[arg(long)]
    pub raw_sd: bool,
    #[arg(long, default_value_t = 1.645)]
    pub critical: f64,
    #[arg(long, default_value_t = 16)]
    pub codebook_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub conditions: usize,
    /// Acoustic mean shift per condition, in emission SDs.
    #[arg(long, default_value_t = 5.0)]
    pub separation: f64,
    /// Prosodic shift per condition, in descriptor SDs; defaults to --separation.
    #[arg(long)]
    pub prosodic_separation: Option<f64>,
    #[arg(long, default_value_t = 8)]
    pub speakers: usize,
    #[arg(long, default_value_t = 20)]
    pub texts: usize,
    #[arg(long, default_value_t = 2)]
    pub reps: usize,
    #[arg(long, default_value_t = 5)]
    pub train_speakers: usize,
    #[arg(long, default_value_t = 10)]
    pub train_texts: usize,
    #[arg(long, default_value_t = 40)]
    pub min_frames: usize,
    #[arg(long, default_value_t = 80)]
    pub max_frames: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.0)]
    pub speaker_spread: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Extract(a) => commands::extract(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Systems => commands::systems(),
    };
    match outcome {
        Ok(failures) if failures == 0 => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
