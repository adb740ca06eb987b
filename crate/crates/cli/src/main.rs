mod commands;
mod evaluate;
mod inputs;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

/// Seed used when neither `--seed` nor `MDTK_SEED` is given.
pub const DEFAULT_SEED: u64 = 42;

/// Toolkit for building degraded MIDI datasets and scoring models on them.
#[derive(Parser, Debug)]
#[command(name = "mdtk", version, about, propagate_version = true)]
struct Cli {
    /// Log level (error, warn, info, debug, trace); RUST_LOG overrides it.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a labeled train/valid/test dataset from MIDI or CSV files.
    MakeDataset(MakeDatasetArgs),
    /// Estimate degradation proportions from transcription/ground-truth pairs.
    MeasureErrors(MeasureErrorsArgs),
    /// Degrade a single excerpt.
    Degrade(DegradeArgs),
    /// Score predictions for one of the four tasks.
    Evaluate(EvaluateArgs),
    /// Encode an excerpt as a command sequence or a binary piano roll.
    Encode(EncodeArgs),
    /// Decode a command CSV or binary piano roll back to a note CSV.
    Decode(DecodeArgs),
    /// Fit the rule-based baselines on the train split and score them.
    RuleBased(RuleBasedArgs),
}

/// Degradation mix flags shared by `make-dataset` and `degrade --type random`.
#[derive(clap::Args, Debug, Clone, Default)]
pub struct MixArgs {
    /// Probability that an excerpt is left undegraded.
    #[arg(long, conflicts_with = "profile")]
    pub clean_proportion: Option<f64>,

    /// Degradation weights as `name:weight,...`; unlisted degradations get 0.
    #[arg(long, conflicts_with = "profile")]
    pub weights: Option<String>,

    /// Take the degradation mix from a measure-errors profile.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct MakeDatasetArgs {
    /// MIDI (.mid, .midi) or CSV files, or directories searched recursively.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,

    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,

    /// Start from a config.json written by an earlier run; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, env = "MDTK_SEED")]
    pub seed: Option<u64>,

    #[arg(long)]
    pub frame_ms: Option<u64>,

    /// Excerpt length in milliseconds.
    #[arg(long)]
    pub excerpt_ms: Option<u64>,

    /// Fewest notes an excerpt may hold.
    #[arg(long)]
    pub min_notes: Option<usize>,

    /// Train, valid and test fractions, e.g. `0.8,0.1,0.1`.
    #[arg(long)]
    pub splits: Option<String>,

    #[arg(long)]
    pub excerpts_per_piece: Option<usize>,

    /// Ignore MIDI channel 10.
    #[arg(long)]
    pub exclude_drums: bool,

    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,

    #[command(flatten)]
    pub mix: MixArgs,
}

#[derive(clap::Args, Debug)]
pub struct MeasureErrorsArgs {
    /// Directory of transcriptions.
    pub transcriptions: PathBuf,

    /// Directory of ground truths; files are paired by name without extension.
    pub ground_truth: PathBuf,

    /// Where to write the profile JSON.
    #[arg(short, long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = mdtk_core::error_measure::DEFAULT_THRESHOLD_MS)]
    pub threshold_ms: u64,
}

#[derive(clap::Args, Debug)]
pub struct DegradeArgs {
    /// Input MIDI or CSV file.
    pub input: PathBuf,

    /// Output CSV; a `<stem>.label.json` sidecar is written next to it.
    #[arg(short, long)]
    pub out: PathBuf,

    /// Degradation name, or `random` to draw from the mix.
    #[arg(long = "type", default_value = "random")]
    pub kind: String,

    #[arg(long, env = "MDTK_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[arg(long)]
    pub exclude_drums: bool,

    #[command(flatten)]
    pub mix: MixArgs,
}

#[derive(clap::Args, Debug)]
pub struct EvaluateArgs {
    /// Task number: 1 detection, 2 classification, 3 location, 4 correction.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub task: u8,

    /// Predictions: a CSV for tasks 1-3, a directory of `<item_id>.csv` for task 4.
    pub predictions: PathBuf,

    /// Dataset directory written by make-dataset.
    #[arg(long)]
    pub dataset: PathBuf,

    #[arg(long, default_value = "test")]
    pub split: mdtk_core::Split,

    /// Model name shown in the report.
    #[arg(long, default_value = "model")]
    pub model: String,

    /// Write the JSON report here; task 2 also writes `<stem>.confusion.csv`.
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Onset tolerance for task 4.
    #[arg(long, default_value_t = mdtk_core::eval::DEFAULT_ONSET_TOLERANCE_MS)]
    pub tolerance_ms: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// CSV of command ids and tokens.
    Commands,
    /// Binary presence and onset roll.
    PianoRoll,
}

#[derive(clap::Args, Debug)]
pub struct EncodeArgs {
    pub input: PathBuf,

    #[arg(short, long)]
    pub out: PathBuf,

    #[arg(long, value_enum, default_value = "commands")]
    pub format: Encoding,

    #[arg(long, default_value_t = mdtk_core::formats::DEFAULT_FRAME_MS)]
    pub frame_ms: u64,
}

#[derive(clap::Args, Debug)]
pub struct DecodeArgs {
    /// Command CSV or binary roll; rolls are recognized by their magic bytes.
    pub input: PathBuf,

    #[arg(short, long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = mdtk_core::formats::DEFAULT_FRAME_MS)]
    pub frame_ms: u64,
}

#[derive(clap::Args, Debug)]
pub struct RuleBasedArgs {
    /// Dataset directory written by make-dataset.
    #[arg(long)]
    pub dataset: PathBuf,

    /// Directory for the prediction files.
    #[arg(short, long)]
    pub out: PathBuf,

    #[arg(long, default_value = "test")]
    pub split: mdtk_core::Split,

    #[arg(long, env = "MDTK_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    #[arg(long, default_value_t = mdtk_core::eval::DEFAULT_ONSET_TOLERANCE_MS)]
    pub tolerance_ms: u64,
}

fn main() -> ExitCode {
    let command = params::register(Cli::command(), &["make-dataset", "degrade"]);
    let matches = command.get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log_level))
        .format_timestamp(None)
        .init();

    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand is required");
    let result = match &cli.command {
        Command::MakeDataset(args) => params::overrides(sub).and_then(|p| commands::make_dataset(args, &p)),
        Command::MeasureErrors(args) => commands::measure_errors(args),
        Command::Degrade(args) => params::overrides(sub).and_then(|p| commands::degrade(args, &p)),
        Command::Evaluate(args) => evaluate::evaluate(args),
        Command::Encode(args) => commands::encode(args),
        Command::Decode(args) => commands::decode(args),
        Command::RuleBased(args) => evaluate::rule_based(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
