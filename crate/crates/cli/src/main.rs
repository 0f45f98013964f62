use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metval::analysis::GroupBy;
use metval::correlation::{CoefficientKind, Level};
use metval::judgments::StandardizeMode;
use metval::metrics::{Aggregate, Tokenizer};
use metval::report::Format;

mod commands;

#[derive(Parser)]
#[command(name = "metval", version, about = "Metric validation studies against human judgments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Test set, references and system outputs.
#[derive(Args, Clone)]
pub struct CorpusArgs {
    /// Source file, one segment per line
    #[arg(long)]
    pub source: PathBuf,
    /// Reference file(s), line-aligned with the source
    #[arg(long = "refs", num_args = 1.., required = true)]
    pub refs: Vec<PathBuf>,
    /// Directory with one output file per system (file stem = system id)
    #[arg(long)]
    pub outputs: PathBuf,
    #[arg(long = "lp", default_value = "xx-en")]
    pub language_pair: String,
    /// CSV with columns system_id,system_type,track
    #[arg(long)]
    pub metadata: Option<PathBuf>,
}

/// Metric scores plus segment-level DA.
#[derive(Args, Clone)]
pub struct ScoredArgs {
    /// Score TSV as written by `metval score` (or an external metric)
    #[arg(long)]
    pub scores: PathBuf,
    /// Segment DA TSV as written by `metval da`
    #[arg(long)]
    pub da: PathBuf,
}

#[derive(Args, Clone)]
pub struct OutputArgs {
    #[arg(long, value_parser = clap::value_parser!(Format))]
    pub format: Option<Format>,
}

#[derive(Args, Clone, Default)]
pub struct ScoringArgs {
    /// Built-in metrics to compute
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    #[arg(long, value_parser = clap::value_parser!(Tokenizer))]
    pub tokenizer: Option<Tokenizer>,
    #[arg(long)]
    pub lowercase: bool,
    /// none, add-<k>, add-<k>+uni or exp
    #[arg(long)]
    pub smoothing: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(Aggregate))]
    pub aggregate: Option<Aggregate>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a corpus against study-design rules
    Validate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Standardize judgments and write segment-level DA
    Da {
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(StandardizeMode), default_value = "zscore")]
        standardize: StandardizeMode,
        #[arg(long, default_value_t = 1)]
        min_count: usize,
        /// Write system-level DA instead
        #[arg(long)]
        system: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Assessor-count simulation on raw judgments
    SimulateN {
        #[arg(long)]
        judgments: PathBuf,
        /// Judgment counts to simulate, e.g. 1,2,5,10
        #[arg(long = "i", value_delimiter = ',', required = true)]
        i_values: Vec<usize>,
        #[arg(long)]
        n_total: usize,
        #[arg(long)]
        target_r: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Score system outputs with built-in metrics
    Score {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Correlate metric scores with DA
    Correlate {
        #[command(flatten)]
        input: ScoredArgs,
        #[arg(long, value_parser = clap::value_parser!(Level), default_value = "system")]
        level: Level,
        #[arg(long, value_parser = clap::value_parser!(CoefficientKind), default_value = "pearson")]
        coef: CoefficientKind,
        /// Restrict to these systems
        #[arg(long, value_delimiter = ',')]
        systems: Vec<String>,
        /// Only this metric (default: all)
        #[arg(long)]
        metric: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Williams significance matrix and winner set at system level
    Signif {
        #[command(flatten)]
        input: ScoredArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        two_sided: bool,
        #[arg(long)]
        bonferroni: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// DA tertile bins and per-bin metric score distributions
    Bins {
        #[command(flatten)]
        input: ScoredArgs,
        #[arg(long)]
        metric: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Segments where the metric and DA disagree most
    Failures {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        input: ScoredArgs,
        #[arg(long)]
        metric: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Correlation within system type or track groups
    Groups {
        #[command(flatten)]
        input: ScoredArgs,
        #[arg(long)]
        metadata: PathBuf,
        #[arg(long)]
        metric: String,
        #[arg(long, value_parser = clap::value_parser!(GroupBy), default_value = "system_type")]
        by: GroupBy,
        #[arg(long, value_parser = clap::value_parser!(CoefficientKind), default_value = "pearson")]
        coef: CoefficientKind,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Kendall tau agreement report at system level
    Agreement {
        #[command(flatten)]
        input: ScoredArgs,
        #[arg(long)]
        metric: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a full study from a TOML config
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir`)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_parser = clap::value_parser!(CoefficientKind), value_delimiter = ',')]
        coef: Vec<CoefficientKind>,
        #[arg(long, value_parser = clap::value_parser!(StandardizeMode))]
        standardize: Option<StandardizeMode>,
        #[command(flatten)]
        scoring: ScoringArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Re-emit a saved bundle in another format
    Report {
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({
                "error": {
                    "kind": e.kind(),
                    "message": e.to_string(),
                    "exit_code": e.exit_code(),
                }
            });
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
