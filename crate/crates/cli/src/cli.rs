use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Record and mine the trail of a data-mining project.
#[derive(Debug, Parser)]
#[command(name = "rastro", version)]
pub struct Cli {
    /// Project directory (defaults to $RASTRO_DIR).
    #[arg(long, global = true, env = "RASTRO_DIR", hide_env_values = true)]
    pub dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a trail in the project directory (current directory if unset).
    Init {
        #[arg(long)]
        name: Option<String>,
    },
    /// Register action definitions.
    #[command(subcommand)]
    Action(ActionCmd),
    /// Register lessons learned.
    #[command(subcommand)]
    Lesson(LessonCmd),
    /// Register training records given as JSON.
    #[command(subcommand)]
    Training(TrainingCmd),
    /// Run a command and register it as one training.
    Run(RunArgs),
    /// List records of one kind matching a predicate.
    Query {
        /// action, training or lesson
        kind: String,
        /// `path op value` atoms, e.g. training_params.algorithm = MLP
        #[arg(allow_negative_numbers = true)]
        predicate: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Summary statistics of a metric per group.
    Stats {
        #[arg(long)]
        group_by: String,
        #[arg(long, default_value = "results.accuracy")]
        metric: String,
        /// Only trainings matching this predicate.
        #[arg(long = "where")]
        filter: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Best trainings by a metric.
    Top {
        #[arg(long)]
        metric: String,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        json: bool,
    },
    /// Render a task report or the chronology.
    Report(ReportArgs),
    /// Propose lessons mined from the trainings.
    Synthesize(SynthArgs),
    /// Check an evaluation series against a baseline accuracy.
    Monitor {
        #[arg(long)]
        baseline: f64,
        #[arg(long)]
        threshold: f64,
        /// CSV file of `timestamp,accuracy` rows.
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Export a training record.
    Export {
        /// Training code to export as an ML Schema JSON document.
        #[arg(long, value_name = "CODE")]
        mlschema: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum ActionCmd {
    Add {
        #[arg(short, long)]
        message: String,
        #[arg(long)]
        task: Option<String>,
        /// Free-text notes on people, time or other resources.
        #[arg(long)]
        resources: Option<String>,
        #[arg(long, default_value = "defined")]
        status: String,
        /// Registration time (ISO-8601); now if omitted.
        #[arg(long)]
        at: Option<String>,
        /// Refuse to register when similar actions or lessons exist.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum LessonCmd {
    Add {
        #[arg(short, long)]
        message: String,
        #[arg(long)]
        task: Option<String>,
        #[arg(long, default_value = "human")]
        origin: String,
        /// Related training codes.
        #[arg(long, value_delimiter = ',')]
        related: Vec<u64>,
        #[arg(long)]
        at: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum TrainingCmd {
    Add {
        /// JSON file holding one training record (`-` for stdin).
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Hyperparameter as name=value; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub selection: Option<String>,
    #[arg(long = "feature")]
    pub features: Vec<String>,
    /// Cross-validation as PARTITIONS,REPETITIONS.
    #[arg(long, value_name = "P,R", conflicts_with = "holdout")]
    pub cv: Option<String>,
    /// Holdout fraction, optionally followed by `,stratified`.
    #[arg(long, value_name = "FRACTION")]
    pub holdout: Option<String>,
    #[arg(required = true, last = true)]
    pub command: Vec<String>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ReportArgs {
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub chronology: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    EqualMetrics,
    Improvement,
    BestSetting,
    Redundancy,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Detectors to run; all applicable ones when omitted.
    #[arg(long, value_enum)]
    pub kind: Vec<SynthKind>,
    #[arg(long, default_value = "results.accuracy")]
    pub metric: String,
    /// Setting whose effect the improvement detector measures.
    #[arg(long)]
    pub varied_key: Option<String>,
    /// Setting the best-setting detector ranks.
    #[arg(long)]
    pub param: Option<String>,
    /// Draft text checked against existing actions and lessons.
    #[arg(long)]
    pub draft: Option<String>,
    #[arg(long)]
    pub json: bool,
}
