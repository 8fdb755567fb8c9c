//! Command-line driver: data preparation, model training, explanation runs
//! and reports.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod output;
pub mod targets;

use config::ExplainFlags;
use output::ReportFormat;

#[derive(Parser)]
#[command(name = "seqcf", version)]
#[command(about = "Counterfactual explanations for sequential recommenders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic interaction log and category file
    Synth(SynthArgs),
    /// k-core filter an interaction log and write a leave-one-out split
    Preprocess(PreprocessArgs),
    /// Fit a reference scorer on a split's training sequences
    Train(TrainArgs),
    /// Explain sampled users and write one record per line
    Explain(ExplainArgs),
    /// Aggregate explanation records into a Fidelity/distance report
    Evaluate(EvaluateArgs),
    /// Exhaustive optimal counterfactuals for small instances
    Oracle(OracleArgs),
    /// Check the vertex-cover reduction on a graph
    ReduceVc(ReduceVcArgs),
    /// Merge per-seed report CSVs and append seed means
    Report(ReportArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub users: usize,
    #[arg(long, default_value_t = 100)]
    pub items: usize,
    #[arg(long, default_value_t = 6)]
    pub categories: usize,
    #[arg(long, default_value_t = 15)]
    pub min_len: usize,
    #[arg(long, default_value_t = 40)]
    pub max_len: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Receives interactions.tsv and categories.tsv
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DelimiterArg {
    Auto,
    Tab,
    Comma,
    DoubleColon,
}

#[derive(Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// item<TAB>label|label file
    #[arg(long)]
    pub categories: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub k_core: usize,
    #[arg(long, default_value_t = 50)]
    pub max_len: usize,
    #[arg(long, value_enum, default_value_t = DelimiterArg::Auto)]
    pub delimiter: DelimiterArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerArg {
    Markov,
    Popularity,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long, value_enum, default_value_t = ScorerArg::Markov)]
    pub scorer: ScorerArg,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta: f64,
    /// Let items already in the history be recommended
    #[arg(long)]
    pub no_mask_seen: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    /// JSON file with any subset of the run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Never changes the output.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flags: ExplainFlags,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Cut-offs to report; defaults to the records' k_eval
    #[arg(long, value_delimiter = ',')]
    pub k_list: Option<Vec<usize>>,
    /// Dataset column; defaults to the split file stem
    #[arg(long)]
    pub dataset: Option<String>,
    /// Model column; defaults to the scorer kind
    #[arg(long)]
    pub model_name: Option<String>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
    /// Defaults to stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Largest Hamming distance enumerated
    #[arg(long, default_value_t = 2)]
    pub max_distance: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Setting, target, k, seed and sampling flags as for explain; search
    /// flags are ignored
    #[command(flatten)]
    pub flags: ExplainFlags,
}

#[derive(Args)]
pub struct ReduceVcArgs {
    /// `n` on the first line, then one 1-indexed `u v` edge per line
    #[arg(long)]
    pub graph: PathBuf,
    /// Comma-separated cover sizes; defaults to 0..=n
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Report CSVs written by evaluate
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => commands::cmd_synth(&a),
        Command::Preprocess(a) => commands::cmd_preprocess(&a),
        Command::Train(a) => commands::cmd_train(&a),
        Command::Explain(a) => commands::cmd_explain(&a),
        Command::Evaluate(a) => commands::cmd_evaluate(&a),
        Command::Oracle(a) => commands::cmd_oracle(&a),
        Command::ReduceVc(a) => commands::cmd_reduce_vc(&a),
        Command::Report(a) => commands::cmd_report(&a),
    }
}
