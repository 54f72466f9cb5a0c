//! Argument parsing. Each subcommand writes into `--out` and leaves a
//! `manifest.json` there.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "csf", version, about = "Causal streamflow forecasting on river graphs")]
pub struct Cli {
    /// Seed overriding the config's.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat `key = value` config file (training or scenario keys).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a river graph from station/edge tables or a DEM.
    BuildGraph(BuildGraphArgs),
    /// Generate a synthetic basin dataset.
    Simulate,
    /// Train a model and score it on the test split.
    Train(TrainArgs),
    /// Rolling forecasts from a trained run.
    Forecast(ForecastArgs),
    /// Score predictions against observed flow.
    Evaluate(EvaluateArgs),
    /// kNN alignment between embeddings and reference runoff.
    Align(AlignArgs),
    /// Train the four ablation arms.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct BuildGraphArgs {
    #[arg(long)]
    pub stations: Option<PathBuf>,
    #[arg(long, requires = "stations", conflicts_with = "dem")]
    pub edges: Option<PathBuf>,
    /// Elevation grid: `rows cols` then row-major values.
    #[arg(long)]
    pub dem: Option<PathBuf>,
    /// Station mask in the DEM's format; every cell when omitted.
    #[arg(long, requires = "dem")]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory with forcings.csv and streamflow.csv.
    #[arg(long)]
    pub data: PathBuf,
    /// Directory with stations.csv and edges.csv; defaults to `--data`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Neighbours for the alignment entry of the report.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// First forecast date (YYYY-MM-DD); history ends the day before.
    #[arg(long, conflicts_with = "split")]
    pub origin: Option<String>,
    /// Roll from every origin of a split (`train`, `val` or `test`) and
    /// keep the last step of each.
    #[arg(long)]
    pub split: Option<String>,
    /// Comma-separated station ids; all stations when omitted.
    #[arg(long)]
    pub targets: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub horizon: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// `station_id,date,flow` rows.
    #[arg(long)]
    pub predictions: PathBuf,
    /// `station_id,date,flow_cms` (or `flow`) rows.
    #[arg(long)]
    pub observed: PathBuf,
    /// Also write an SVG hydrograph per station.
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value = "custom")]
    pub task: String,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// `station_id,date,runoff_mm` rows.
    #[arg(long)]
    pub runoff: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Align per-station means instead of averaging daily alignments.
    #[arg(long)]
    pub per_station_mean: bool,
    /// Also score seed-matched standard-normal embeddings.
    #[arg(long)]
    pub random_baseline: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Comma-separated seeds; the config seed when omitted.
    #[arg(long)]
    pub seeds: Option<String>,
}

impl Cli {
    pub fn out_dir(&self) -> Result<&PathBuf> {
        self.out.as_ref().ok_or_else(|| CliError::input("--out is required"))
    }
}

/// Parse `args` (program name first) and run the command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let text = e.to_string();
            return Err(CliError::input(text.trim_start_matches("error: ").trim_end()));
        }
    };
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    commands::dispatch(&cli, &argv)
}
