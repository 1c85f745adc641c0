use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "v2c", version, about = "Video-to-commonsense generation, evaluation and QA", arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus, or annotate captions against a knowledge table.
    BuildCorpus(BuildCorpus),
    /// Train a captioning + commonsense model.
    Train(Train),
    /// Decode commonsense for each record given its first caption.
    Complete(Decode),
    /// Decode a caption, then commonsense, for each record.
    Generate(Decode),
    /// Score predictions against references.
    EvalNlg(EvalNlg),
    /// Generate template questions from annotated records.
    QaGen(QaGen),
    /// Train the answering head.
    QaTrain(QaTrain),
    /// Top-k precision/recall of a trained answering head.
    QaEval(QaEval),
    /// Validity, agreement and spread of human ratings.
    RaterStats(RaterStats),
}

#[derive(Debug, Args)]
pub struct BuildCorpus {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Records (video_id, features_path, captions) to annotate instead of
    /// generating synthetic data.
    #[arg(long, requires = "knowledge")]
    pub captions: Option<PathBuf>,
    /// Knowledge events JSONL used with --captions.
    #[arg(long)]
    pub knowledge: Option<PathBuf>,
    /// File of activity verbs, one per line, replacing the built-in lexicon.
    #[arg(long)]
    pub verbs: Option<PathBuf>,
    /// Candidate scorer for re-ranking: overlap or jaccard.
    #[arg(long, default_value = "overlap")]
    pub scorer: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 30)]
    pub videos: usize,
    #[arg(long, default_value_t = 40)]
    pub frames: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub captions_per_video: usize,
    #[arg(long, default_value_t = 1)]
    pub strings_per_type: usize,
    /// Attach story sentences to synthetic records.
    #[arg(long)]
    pub stories: bool,
}

#[derive(Debug, Args)]
pub struct Train {
    /// Records JSONL; feature paths resolve relative to it.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Checkpoint directory to write.
    #[arg(long)]
    pub out: PathBuf,
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key (`key=value`); repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Loss CSV path; defaults to `<out>/loss.csv`.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Decode {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Beam width; greedy when omitted.
    #[arg(long)]
    pub beam: Option<usize>,
    /// Maximum output tokens; defaults to the model's limit.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Comma-separated subset of intention,effect,attribute.
    #[arg(long, value_delimiter = ',')]
    pub types: Vec<String>,
    /// Output JSONL; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalNlg {
    /// Keyed predictions, or generation output.
    pub predictions: PathBuf,
    /// Keyed references.
    pub references: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QaGen {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Distractors mined per question.
    #[arg(long, default_value_t = 3)]
    pub distractors: usize,
}

#[derive(Debug, Args)]
pub struct QaTrain {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub qa: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Captioning checkpoint whose video encoder initialises the head.
    #[arg(long)]
    pub init_from: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    /// Encoder width when not initialising from a checkpoint.
    #[arg(long, default_value_t = 64)]
    pub d_model: usize,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct QaEval {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub qa: PathBuf,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RaterStats {
    /// CSV with columns sample_id, rater_id, rating.
    pub ratings: PathBuf,
}
