use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use uniparser::corpus::{DEFAULT_CONTENT_COLUMN, DEFAULT_TEMPLATE_COLUMN};
use uniparser::model::{DEFAULT_EMBEDDING_DIM, DEFAULT_HIDDEN_DIM, DEFAULT_LAMBDA, DEFAULT_WINDOW};
use uniparser::runtime::DEFAULT_PARSE_BATCH;
use uniparser::trainer::{
    DEFAULT_EPOCHS, DEFAULT_FINE_TUNE_EPOCHS, DEFAULT_LEARNING_RATE, DEFAULT_NEGATIVES,
    DEFAULT_TRAIN_BATCH,
};

#[derive(Debug, Parser)]
#[command(name = "uniparser", version, about = "Token-classification log parser")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on labeled sources and write it as JSON.
    Train(TrainArgs),
    /// Parse raw log lines (one message per line) into JSONL.
    Parse(ParseArgs),
    /// Score a model (or the gold labels) on labeled sources.
    Evaluate(EvaluateArgs),
    /// Continue training a model on a small labeled sample.
    Finetune(FinetuneArgs),
    /// Show the token labels derived from a labeled CSV.
    Labels(LabelsArgs),
}

#[derive(Debug, Args)]
pub struct Columns {
    /// CSV column holding the raw message.
    #[arg(long, default_value = DEFAULT_CONTENT_COLUMN)]
    pub content_column: String,
    /// CSV column holding the ground-truth template.
    #[arg(long, default_value = DEFAULT_TEMPLATE_COLUMN)]
    pub template_column: String,
}

#[derive(Debug, Args)]
pub struct Optimizer {
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    pub learning_rate: f64,
    /// Token examples per optimizer step.
    #[arg(long, default_value_t = DEFAULT_TRAIN_BATCH)]
    pub batch_size: usize,
    /// Dissimilar messages per contrastive sample.
    #[arg(long, default_value_t = DEFAULT_NEGATIVES)]
    pub negatives: usize,
    /// Weight of the contrastive loss.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Drop the contrastive loss (same as --lambda 0).
    #[arg(long)]
    pub disable_similarity: bool,
    /// Also count the similar pair in the contrastive denominator.
    #[arg(long)]
    pub include_positive_in_denominator: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Threads for gradient computation; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Source directories (one subdirectory per source), directories of CSVs, or CSV files.
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// Leave this source out of training.
    #[arg(long)]
    pub exclude: Option<String>,
    /// Output model path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    /// Context window half-width.
    #[arg(short = 'k', long = "window", default_value_t = DEFAULT_WINDOW)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_EMBEDDING_DIM)]
    pub d_emb: usize,
    #[arg(long, default_value_t = DEFAULT_HIDDEN_DIM)]
    pub d_h: usize,
    /// Keep at most this many messages per source.
    #[arg(long)]
    pub max_per_source: Option<usize>,
    /// Token encoder only: the context vector is zero.
    #[arg(long)]
    pub disable_context: bool,
    #[command(flatten)]
    pub optimizer: Optimizer,
    #[command(flatten)]
    pub columns: Columns,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// File of raw log lines.
    #[arg(long)]
    pub input: PathBuf,
    /// Write JSONL here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Messages per work unit.
    #[arg(long, default_value_t = DEFAULT_PARSE_BATCH)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, required_unless_present = "oracle_labels")]
    pub model: Option<PathBuf>,
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// Evaluate only this source.
    #[arg(long)]
    pub source: Option<String>,
    /// Replay the gold labels instead of running a model.
    #[arg(long, conflicts_with = "model")]
    pub oracle_labels: bool,
    #[arg(long)]
    pub max_per_source: Option<usize>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub columns: Columns,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Base model.
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled sample CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Use only the first N labeled rows.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FINE_TUNE_EPOCHS)]
    pub epochs: usize,
    #[command(flatten)]
    pub optimizer: Optimizer,
    #[command(flatten)]
    pub columns: Columns,
}

#[derive(Debug, Args)]
pub struct LabelsArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub limit: Option<usize>,
    #[command(flatten)]
    pub columns: Columns,
}
