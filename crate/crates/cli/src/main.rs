//! `cer`: simulate, train, evaluate and compare consensus-trained emotion
//! predictors from the command line.
//!
//! Exit status is 0 on success, 1 for usage, configuration or data errors
//! (printed as one `error[<kind>]: <message>` line) and 2 for internal
//! failures. `CER_LOG` sets log verbosity (`error` .. `trace`).

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cer_core::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Core(e) => e.kind(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_user_error() => 2,
            _ => 1,
        }
    }
}

const OVERRIDE_HELP: &str = "\
Config overrides:
  --<section>.<field> <value>   Set any config field by dotted path, e.g.
                                --train.alpha 0.7 or --synth.feature_snr=4.
                                Sections: train, synth, eval. Values are
                                parsed as JSON, falling back to strings.
                                Flags win over config-file values.

Exit status: 0 success, 1 usage/config/data error, 2 internal error.
Environment: CER_LOG=error|warn|info|debug|trace";

#[derive(Debug, Parser)]
#[command(name = "cer", version, about = "Multi-annotator consensus learning for continuous emotion recognition", after_help = OVERRIDE_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-annotator dataset directory.
    #[command(after_help = OVERRIDE_HELP)]
    Simulate(SimulateArgs),
    /// Train one model (baseline or consensus) and write a run directory.
    #[command(after_help = OVERRIDE_HELP)]
    Train(TrainArgs),
    /// Score a checkpoint against the gold standard of a dataset.
    #[command(after_help = OVERRIDE_HELP)]
    Evaluate(EvaluateArgs),
    /// Aggregate a wide annotation CSV into a consensus trace.
    Aggregate(AggregateArgs),
    /// Run a checkpoint's predictor over a feature CSV.
    Predict(PredictArgs),
    /// CCC and CCC loss between two `time,value` traces.
    Metrics(MetricsArgs),
    /// Cross-validate baseline and consensus training on a dataset.
    #[command(after_help = OVERRIDE_HELP)]
    Cv(CvArgs),
    /// Paired baseline-vs-consensus comparison over several seeds.
    #[command(after_help = OVERRIDE_HELP)]
    Ab(AbArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArg {
    /// JSON config file (schema_version required; unknown keys rejected).
    #[arg(long, value_name = "JSON")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Root seed of the generator (synth.seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output dataset directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Baseline,
    Acn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DimensionArg {
    Arousal,
    Valence,
    Both,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Dataset directory with a manifest.json (dataset_dir).
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Training objective (train.mode).
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Affect dimension(s) to train (train.dimensions).
    #[arg(long, value_enum)]
    pub dimension: Option<DimensionArg>,
    /// Root seed for initialization and batch order (train.seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated validation source ids; default is the last source.
    #[arg(long, value_name = "IDS", value_delimiter = ',')]
    pub val: Option<Vec<String>>,
    /// Run directory to create (run_dir).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoolingArg {
    Pooled,
    PerWindowMean,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Checkpoint written by `train`.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// Dataset directory.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Comma-separated source ids to score; default all.
    #[arg(long, value_name = "IDS", value_delimiter = ',')]
    pub sources: Option<Vec<String>>,
    /// CCC reduction over the test frames.
    #[arg(long, value_enum, default_value = "pooled")]
    pub pooling: PoolingArg,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Mean,
    Median,
    Weighted,
    Acn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SingleDimensionArg {
    Arousal,
    Valence,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// Annotation CSV (wide or long format).
    #[arg(long, value_name = "CSV")]
    pub annotations: PathBuf,
    /// Dimension the annotations describe.
    #[arg(long, value_enum, default_value = "arousal")]
    pub dimension: SingleDimensionArg,
    #[arg(long, value_enum, default_value = "mean")]
    pub method: MethodArg,
    /// Comma-separated weights for `weighted`, in sorted annotator order;
    /// default is reliability weights against the leave-one-out mean.
    #[arg(long, value_name = "W", value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Checkpoint providing the ACN for `acn`.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Output `time,value` CSV.
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// Feature CSV (`time,f0,f1,...`).
    #[arg(long, value_name = "CSV")]
    pub features: PathBuf,
    /// Output CSV with one column per predicted dimension.
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// First trace (`time,value`).
    #[arg(long, value_name = "CSV")]
    pub x: PathBuf,
    /// Second trace (`time,value`).
    #[arg(long, value_name = "CSV")]
    pub y: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Dataset directory (dataset_dir).
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Train all six table arms: both modes on valence, arousal and both.
    #[arg(long)]
    pub full_table: bool,
    /// Report directory (run_dir).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AbArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Dataset directory; without it each seed simulates its own corpus
    /// from the synth section.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Comma-separated seeds (eval.seeds), at least 3.
    #[arg(long, value_name = "SEEDS", value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Report directory (run_dir).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("CER_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn main() -> ExitCode {
    init_logging();
    let args: Vec<String> = std::env::args().collect();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(args: Vec<String>) -> Result<(), CliError> {
    let (rest, overrides) = config::split_dotted(args)?;
    let cli = match Cli::try_parse_from(rest) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return Err(CliError::usage(first.to_string()));
        }
    };
    commands::dispatch(cli.command, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    fn render_help(cmd: &mut clap::Command) -> String {
        cmd.render_long_help().to_string()
    }

    #[test]
    fn help_lists_every_flag() {
        let mut root = Cli::command();
        root.build();
        let names: Vec<String> = root.get_subcommands().map(|s| s.get_name().to_string()).collect();
        let root_help = render_help(&mut root.clone());
        for name in &names {
            assert!(root_help.contains(name.as_str()), "root help misses {name}");
        }
        for sub in root.get_subcommands_mut() {
            let help = render_help(&mut sub.clone());
            for arg in sub.get_arguments() {
                if let Some(long) = arg.get_long() {
                    assert!(help.contains(&format!("--{long}")), "{} help misses --{long}", sub.get_name());
                }
                assert!(!arg.is_hide_set(), "hidden flag {:?}", arg.get_id());
            }
        }
        assert!(root_help.contains("--<section>.<field>"));
    }

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
