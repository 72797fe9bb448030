//! `sgnet`: build tactile graphs, generate synthetic event datasets, train and evaluate
//! spiking graph classifiers.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{FeatureKind, GraphKind};

#[derive(Debug, Parser)]
#[command(name = "sgnet", version, about = "Spiking graph networks for event-based tactile recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a tactile graph over a taxel layout and report its degree structure.
    Graph(GraphArgs),
    /// Generate a labeled synthetic event dataset.
    Synth(SynthArgs),
    /// Train over several rounds and report mean (std) test accuracy.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset manifest.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Layout file (`index x_mm y_mm [name]` per line).
    #[arg(long, required_unless_present = "example_layout")]
    pub layout: Option<PathBuf>,
    /// Use the built-in 39-taxel radial example layout.
    #[arg(long, conflicts_with = "layout")]
    pub example_layout: bool,
    #[arg(long, value_enum, default_value = "mst")]
    pub method: GraphKind,
    /// Neighbors selected per taxel (knn).
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Distance threshold in mm added on top of the spanning tree (mst).
    #[arg(long, default_value_t = 0.0)]
    pub sigma_d: f64,
    /// Edge list file (manual).
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Where to write the graph export.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; receives manifest.txt, layout.txt and samples/.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 40)]
    pub samples_per_class: usize,
    /// Taxel count of a generated jittered-grid layout.
    #[arg(long, default_value_t = 10, conflicts_with = "layout")]
    pub taxels: usize,
    /// Use this layout instead of a generated grid.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub channels: usize,
    /// Sample window in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0.02)]
    pub bin_width: f64,
    /// Background events per taxel per second.
    #[arg(long, default_value_t = 0.0)]
    pub noise_rate: f64,
    /// Spatial-patch templates with this many taxels per class instead of disjoint subsets.
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long, default_value_t = 20.0)]
    pub rate_min: f64,
    #[arg(long, default_value_t = 60.0)]
    pub rate_max: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Flat `key = value` run configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<GraphKind>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub sigma_d: Option<f64>,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub feature: Option<FeatureKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Graph export the checkpoint must have been trained on.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Directory for confusion.txt and eval.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Data(msg) => f.write_str(msg),
        }
    }
}

impl From<sgnet_core::Error> for CliError {
    fn from(e: sgnet_core::Error) -> Self {
        use sgnet_core::Error as E;
        match e {
            E::InvalidParameter(_) | E::KOutOfRange { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
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
    let result = match cli.command {
        Command::Graph(args) => commands::graph(&args),
        Command::Synth(args) => commands::synth(&args),
        Command::Train(args) => commands::train(&args),
        Command::Eval(args) => commands::eval(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
