//! `runon`: synthesize run-on data, train the labelers, tag, correct and
//! score.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to
//! standard error.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

mod commands;
mod config;

use commands::{
    CorrectArgs, EvaluateArgs, FeaturizeArgs, GenerateArgs, SignificanceArgs, SmokeArgs, SynthesizeArgs, TagArgs,
    TrainCrfArgs, TrainLmArgs, TrainS2SArgs,
};
use config::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "runon", version, about = "Run-on sentence detection and correction")]
struct Cli {
    /// TOML file with defaults for any option below. Flags and RUNON_*
    /// variables take precedence over it
    #[arg(long, global = true, env = "RUNON_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed; every random stage derives a named stream from it
    /// [default: 7]
    #[arg(long, global = true, env = "RUNON_SEED")]
    seed: Option<u64>,
    /// Worker threads for parallel stages [default: all cores]. Output does
    /// not depend on it
    #[arg(long, global = true, env = "RUNON_WORKERS")]
    workers: Option<usize>,
    /// Only report errors
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// More logging (repeat for debug output)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a corpus from the built-in toy grammar
    Generate(GenerateArgs),
    /// Build a labeled run-on dataset from clean text
    Synthesize(SynthesizeArgs),
    /// Train the n-gram model used by the CRF's perplexity features
    TrainLm(TrainLmArgs),
    /// Write CRF gap features for labeled sequences
    Featurize(FeaturizeArgs),
    /// Train the CRF gap labeler
    TrainCrf(TrainCrfArgs),
    /// Train the attention encoder-decoder gap labeler
    TrainS2s(TrainS2SArgs),
    /// Predict gap labels with a trained model
    Tag(TagArgs),
    /// Print corrected text with periods inserted
    Correct(CorrectArgs),
    /// Score predictions against gold labels
    Evaluate(EvaluateArgs),
    /// Paired bootstrap test between two systems
    Significance(SignificanceArgs),
    /// Run the whole pipeline on the bundled fixture corpus
    Smoke(SmokeArgs),
}

/// A failed run: usage problems exit 1, bad or missing data exits 2.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }

    /// An error tied to a file.
    pub fn data(path: &Path, e: impl fmt::Display) -> Self {
        Failure::Data(format!("{}: {e}", path.display()))
    }

    pub fn msg(msg: impl Into<String>) -> Self {
        Failure::Data(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) => f.write_str(m),
        }
    }
}

/// Settings every command sees after merging all sources.
pub struct Context {
    pub seed: u64,
    pub file: FileConfig,
}

fn init_logging(quiet: bool, verbose: u8) {
    let level = match (quiet, verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .init();
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(7);
    if let Some(n) = cli.workers.or(file.workers) {
        if n == 0 {
            return Err(Failure::usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    log::info!("seed {seed}, workers {}", rayon::current_num_threads());
    let ctx = Context { seed, file };
    match cli.command {
        Command::Generate(a) => commands::generate(&ctx, a),
        Command::Synthesize(a) => commands::synthesize(&ctx, a),
        Command::TrainLm(a) => commands::train_lm(&ctx, a),
        Command::Featurize(a) => commands::featurize(&ctx, a),
        Command::TrainCrf(a) => commands::train_crf(&ctx, a),
        Command::TrainS2s(a) => commands::train_s2s(&ctx, a),
        Command::Tag(a) => commands::tag(&ctx, a),
        Command::Correct(a) => commands::correct(&ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Significance(a) => commands::significance(&ctx, a),
        Command::Smoke(a) => commands::smoke(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging(cli.quiet, cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
