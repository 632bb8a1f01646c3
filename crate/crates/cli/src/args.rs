use std::path::PathBuf;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use trustlens::active::Strategy;
use trustlens::features::Denominator;
use trustlens::ingest::UserFormat;
use trustlens::preprocess::DEFAULT_PERCENTILE;
use trustlens::sentiment::DEFAULT_DEAD_ZONE;
use trustlens::LearnerKind;

#[derive(Debug, Parser)]
#[command(name = "trustlens", version, about = "Trust scoring and active-learning classification of social-network users")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read exported users and tweets, apply the selection rule and max-id
    /// dedup, and write a canonical dataset directory.
    Ingest(IngestArgs),
    /// Compute the raw feature vector and influence score of every user.
    Score(ScoreArgs),
    /// Clip and min-max normalize scored feature vectors.
    Normalize(NormalizeArgs),
    /// Cross-validate a learner on labeled users and save the fitted model.
    Train(TrainArgs),
    /// Active learning.
    #[command(subcommand)]
    Al(AlCommand),
    /// Run the annotation service.
    Serve(ServeArgs),
    /// Descriptive statistics, feature correlations and learning curves.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum AlCommand {
    /// Run the loop over a dataset directory.
    Run(AlRunArgs),
    /// Run the loop on a generated cohort with a synthetic oracle.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub users: PathBuf,
    #[arg(long)]
    pub tweets: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep only tweets with id at or below this value.
    #[arg(long)]
    pub max_id: Option<u64>,
    /// Report sample rather than population standard deviations.
    #[arg(long)]
    pub sample_stddev: bool,
    /// User file format; guessed from the extension when omitted.
    #[arg(long)]
    pub user_format: Option<UserFormat>,
    /// Timestamp recorded in the manifest (RFC 3339); defaults to now.
    #[arg(long)]
    pub created_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Args)]
pub struct ScoringFlags {
    #[arg(long, default_value = "statuses")]
    pub denominator: Denominator,
    #[arg(long, default_value_t = DEFAULT_DEAD_ZONE)]
    pub dead_zone: f64,
    #[arg(long, default_value_t = DEFAULT_PERCENTILE)]
    pub clip_percentile: f64,
    /// Sentiment lexicon (TSV); the bundled one when omitted.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringFlags,
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    /// Raw vectors written by `score`.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PERCENTILE)]
    pub clip_percentile: f64,
    /// Apply previously fitted parameters instead of fitting new ones.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Where to write fitted parameters; next to `--out` by default.
    #[arg(long)]
    pub params_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LearnerFlags {
    #[arg(long, default_value = "rf")]
    pub learner: LearnerKind,
    /// TOML or JSON learner spec (`kind = "svm"`, hyperparameters); its
    /// kind takes precedence over `--learner`.
    #[arg(long)]
    pub learner_config: Option<PathBuf>,
    /// `paper_default`, `all`, or a comma-separated feature list.
    #[arg(long, default_value = "paper_default")]
    pub features: String,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Normalized vectors written by `normalize`.
    #[arg(long = "vectors")]
    pub vectors: PathBuf,
    /// `user_id,label` table (CSV or JSONL).
    #[arg(long)]
    pub labels: PathBuf,
    #[command(flatten)]
    pub learner: LearnerFlags,
    /// Model snapshot (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Cross-validation report; printed when omitted.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StopFlags {
    #[arg(long)]
    pub max_rounds: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub min_gain: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OracleKind {
    /// Answer from a table of known labels.
    Synthetic,
    /// Serve the loop over HTTP for human annotators.
    Service,
}

#[derive(Debug, Args)]
pub struct AlRunArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub seed_labels: PathBuf,
    #[arg(long, default_value = "margin")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 100)]
    pub batch: usize,
    #[arg(long, value_enum, default_value = "synthetic")]
    pub oracle: OracleKind,
    /// Known labels for the synthetic oracle.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub learner: LearnerFlags,
    #[command(flatten)]
    pub stop: StopFlags,
    #[command(flatten)]
    pub scoring: ScoringFlags,
    /// Learning curve CSV; printed when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Final model state (JSON).
    #[arg(long)]
    pub state_out: Option<PathBuf>,
    /// Service config for `--oracle service`; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub state_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML or JSON experiment config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "rf")]
    pub learner: LearnerKind,
    #[arg(long, default_value = "margin")]
    pub strategy: Strategy,
    /// Seeds the cohort, the seed set, selection, cross-validation and the
    /// learner.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub users: Option<usize>,
    /// Seed-set size, split by the cohort's trusted share.
    #[arg(long)]
    pub seed_size: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub min_gain: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Learning curve CSV; printed when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub state_dir: Option<PathBuf>,
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Known labels; enables the correlation table and learning curves.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub sample_stddev: bool,
    #[command(flatten)]
    pub scoring: ScoringFlags,
    #[command(flatten)]
    pub learner: LearnerFlags,
    /// Comma-separated strategies to chart.
    #[arg(long, default_value = "uncertainty,margin,entropy", value_delimiter = ',')]
    pub strategies: Vec<Strategy>,
    /// Rounds per learning curve; 0 skips the curves.
    #[arg(long, default_value_t = 0)]
    pub rounds: usize,
    #[arg(long, default_value_t = 100)]
    pub batch: usize,
    #[arg(long, default_value_t = 1000)]
    pub seed_size: usize,
}
