mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Settings;

/// Sentence-level VAD scoring and affective-polarization analyses of
/// parliamentary committee protocols.
#[derive(Debug, Parser)]
#[command(name = "polar", version, arg_required_else_help = true)]
struct Cli {
    /// TOML file with default settings (overridden by environment and flags)
    #[arg(long, global = true, env = "POLAR_CONFIG")]
    config: Option<PathBuf>,

    #[command(flatten)]
    settings: Settings,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a JSONL corpus, select committees and fix protocol order
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Fit the valence, arousal and dominance models
    Train(commands::TrainingInputs),
    /// Add model VAD scores to every sentence of a corpus
    Score {
        #[arg(long)]
        corpus: PathBuf,
        /// Directory written by `train`
        #[arg(long)]
        models: PathBuf,
        /// VAD lexicon, required when the models were trained with its features
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Pearson correlation of the models on held-out annotated texts
    Eval(commands::TrainingInputs),
    /// Generate best-worst scaling tuples
    BwsTuples {
        /// Item ids, one per line
        #[arg(long)]
        items: PathBuf,
        /// Number of tuples (default: twice the number of items)
        #[arg(long)]
        n_tuples: Option<usize>,
    },
    /// Score best-worst annotations into gold values
    BwsScore {
        #[arg(long)]
        tuples: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Per-protocol VAD metrics and corpus-wide high/low shares
    Metrics {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Highest- and lowest-scoring sentences per committee and dimension
    Extremes {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Government vs opposition t-tests per committee
    Compare {
        #[arg(long)]
        metrics: PathBuf,
    },
    /// Mann-Kendall trend tests per committee
    Trends {
        #[arg(long)]
        metrics: PathBuf,
    },
    /// Confound regressions of V_var and A_mean
    Ols {
        #[arg(long)]
        metrics: PathBuf,
    },
    /// Per-session averages
    Sessions {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Emotion-word ratios per protocol and their trends
    Emotions {
        #[arg(long)]
        corpus: PathBuf,
        /// `word<TAB>emotion[<TAB>flag]` rows
        #[arg(long)]
        emotion_lexicon: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let cfg = cli.settings.resolve(&file)?;
    match cli.command {
        Command::Ingest { corpus } => commands::ingest(&cfg, &corpus),
        Command::Train(inputs) => commands::train(&cfg, &inputs),
        Command::Score { corpus, models, lexicon } => commands::score(&cfg, &corpus, &models, lexicon.as_deref()),
        Command::Eval(inputs) => commands::eval(&cfg, &inputs),
        Command::BwsTuples { items, n_tuples } => commands::bws_tuples(&cfg, &items, n_tuples),
        Command::BwsScore { tuples, annotations } => commands::bws_score(&cfg, &tuples, &annotations),
        Command::Metrics { corpus } => commands::metrics(&cfg, &corpus),
        Command::Extremes { corpus } => commands::extremes(&cfg, &corpus),
        Command::Compare { metrics } => commands::compare(&cfg, &metrics),
        Command::Trends { metrics } => commands::trends(&cfg, &metrics),
        Command::Ols { metrics } => commands::ols(&cfg, &metrics),
        Command::Sessions { corpus } => commands::sessions(&cfg, &corpus),
        Command::Emotions { corpus, emotion_lexicon } => commands::emotions(&cfg, &corpus, &emotion_lexicon),
    }
}

fn main() -> ExitCode {
    // Usage errors exit with 2 inside `parse`; analysis failures exit with 1.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
