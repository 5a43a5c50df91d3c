//! Command-line pipeline for probabilistic cross-modal embeddings:
//! synthetic data generation, training, embedding, retrieval, evaluation,
//! and uncertainty analysis.
//!
//! Exit codes: 0 success, 1 validation failure (bad flags, missing or
//! malformed files, dimension mismatches), 2 numeric failure (non-finite
//! loss or overflow). Errors are a single machine-parsable line on stderr:
//! `error: <validation|numeric>: <message>`.

mod exec;
mod resolve;

use clap::{Args, Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "probemb",
    version,
    about = "Probabilistic cross-modal embedding pipeline",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a deterministic synthetic cross-modal dataset (JSON-lines).
    GenData(GenDataArgs),
    /// Train encoder heads on a dataset and write a model checkpoint.
    Train(TrainArgs),
    /// Encode every dataset item with a trained model into an embedding dump.
    Embed(EmbedArgs),
    /// Rank a gallery dump for every query under a similarity kind.
    Retrieve(RetrieveArgs),
    /// Compute retrieval metrics (R@k, R-Precision, PMRP) as a CSV report.
    Eval(EvalArgs),
    /// Uncertainty-bin and corruption-sweep tables for a trained model.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
pub struct GenDataArgs {
    /// Number of classes (default 3)
    #[arg(long)]
    pub classes: Option<usize>,
    /// Items per class per modality (default 20)
    #[arg(long)]
    pub items: Option<usize>,
    /// Feature dimension (default 32)
    #[arg(long = "feature-dim")]
    pub feature_dim: Option<usize>,
    /// Binary attribute vector length (default 8)
    #[arg(long = "attr-dim")]
    pub attr_dim: Option<usize>,
    /// Per-coordinate feature noise sigma (default 0.05)
    #[arg(long)]
    pub noise: Option<f64>,
    /// Fraction of modality-B items blended between two classes (default 0)
    #[arg(long)]
    pub ambiguity: Option<f64>,
    /// Seed controlling all randomness (required)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output dataset path (required)
    #[arg(long)]
    pub out: Option<String>,
    /// JSON file whose keys mirror the flags; explicit flags win
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Input dataset path (required)
    #[arg(long)]
    pub data: Option<String>,
    /// Training mode: prob | mu-only (default prob)
    #[arg(long)]
    pub mode: Option<String>,
    /// Objective: soft | mil | triplet (default soft)
    #[arg(long)]
    pub loss: Option<String>,
    /// Ground-truth pairs per step (default 8)
    #[arg(long)]
    pub batch: Option<usize>,
    /// Monte-Carlo samples per embedding (default 7)
    #[arg(long)]
    pub samples: Option<usize>,
    /// Training epochs (default 200)
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial learning rate (default 0.08)
    #[arg(long)]
    pub lr: Option<f64>,
    /// KL regularizer weight (default 0.001)
    #[arg(long = "lambda-kl")]
    pub lambda_kl: Option<f64>,
    /// Uniformity regularizer weight (default 0)
    #[arg(long = "lambda-unif")]
    pub lambda_unif: Option<f64>,
    /// Seed controlling all randomness (required)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output checkpoint path (required)
    #[arg(long)]
    pub out: Option<String>,
    /// Embedding dimension (default 16)
    #[arg(long = "embed-dim")]
    pub embed_dim: Option<usize>,
    /// SGD momentum (default 0.9)
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Triplet margin (default 0.2)
    #[arg(long)]
    pub margin: Option<f64>,
    /// Match-parameter preset: small (a=b=5) | large (a=b=15)
    #[arg(long = "match-init")]
    pub match_init: Option<String>,
    /// JSON file whose keys mirror the flags; explicit flags win
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Args)]
pub struct EmbedArgs {
    /// Model checkpoint path (required)
    #[arg(long)]
    pub model: Option<String>,
    /// Dataset path (required)
    #[arg(long)]
    pub data: Option<String>,
    /// Output embedding dump path (required)
    #[arg(long)]
    pub out: Option<String>,
    /// JSON file whose keys mirror the flags; explicit flags win
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Args)]
pub struct RetrieveArgs {
    /// Query embedding dump (required)
    #[arg(long)]
    pub queries: Option<String>,
    /// Gallery embedding dump (required)
    #[arg(long)]
    pub gallery: Option<String>,
    /// Similarity kind: mean | kl | js | elk | bk | w2 | avg-l2 | match-prob
    #[arg(long)]
    pub metric: Option<String>,
    /// Monte-Carlo samples per embedding for sampled kinds (default 7)
    #[arg(long)]
    pub samples: Option<usize>,
    /// Seed for sampled kinds (required when the metric samples)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep only the top-k entries per query (default: full ranking)
    #[arg(long)]
    pub topk: Option<usize>,
    /// Output ranked-list path (required)
    #[arg(long)]
    pub out: Option<String>,
    /// JSON file whose keys mirror the flags; explicit flags win
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Query embedding dump (required)
    #[arg(long)]
    pub queries: Option<String>,
    /// Gallery embedding dump (required)
    #[arg(long)]
    pub gallery: Option<String>,
    /// Dataset path supplying classes and attributes (required)
    #[arg(long)]
    pub data: Option<String>,
    /// Similarity kind (default mean)
    #[arg(long)]
    pub metric: Option<String>,
    /// Comma list of Hamming thresholds for PMRP (default 0,1,2)
    #[arg(long)]
    pub zeta: Option<String>,
    /// Monte-Carlo samples per embedding for sampled kinds (default 7)
    #[arg(long)]
    pub samples: Option<usize>,
    /// Seed for sampled kinds (required when the metric samples)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output metric CSV path (required)
    #[arg(long)]
    pub out: Option<String>,
    /// JSON file whose keys mirror the flags; explicit flags win
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Model checkpoint path (required)
    #[arg(long)]
    pub model: Option<String>,
    /// Dataset path (required)
    #[arg(long)]
    pub data: Option<String>,
    /// Embedding dump path (required)
    #[arg(long)]
    pub embeddings: Option<String>,
    /// Number of equal-count uncertainty bins (default 10)
    #[arg(long)]
    pub bins: Option<usize>,
    /// Comma list of erase ratios (default 0,0.25,0.5,0.75)
    #[arg(long)]
    pub ratios: Option<String>,
    /// Seed controlling all randomness (required)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for bins.csv and corruption.csv (required)
    #[arg(long)]
    pub out: Option<String>,
    /// JSON file whose keys mirror the flags; explicit flags win
    #[arg(long)]
    pub config: Option<String>,
}

/// CLI failure with the exit code it maps to.
pub enum CliError {
    Validation(String),
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Validation(msg) => format!("error: validation: {msg}"),
            CliError::Numeric(msg) => format!("error: numeric: {msg}"),
        }
    }
}

impl From<probemb::Error> for CliError {
    fn from(err: probemb::Error) -> Self {
        let msg = single_line(&err.to_string());
        if err.is_numeric() {
            CliError::Numeric(msg)
        } else {
            CliError::Validation(msg)
        }
    }
}

fn single_line(text: &str) -> String {
    text.lines().collect::<Vec<_>>().join("; ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            let first_line = err
                .to_string()
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .to_string();
            eprintln!("error: validation: {first_line}");
            return ExitCode::from(1);
        }
    };
    // the full invocation is embedded in every output file's metadata
    let invocation = std::env::args().skip(1).collect::<Vec<_>>().join(" ");
    let result = match cli.command {
        Command::GenData(args) => exec::gen_data(args, &invocation),
        Command::Train(args) => exec::train(args, &invocation),
        Command::Embed(args) => exec::embed(args, &invocation),
        Command::Retrieve(args) => exec::retrieve(args, &invocation),
        Command::Eval(args) => exec::eval(args, &invocation),
        Command::Analyze(args) => exec::analyze(args, &invocation),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
