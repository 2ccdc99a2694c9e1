//! `dvrisk`: generate, preprocess, explore, train, evaluate, aggregate, serve.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dvrisk", version, about = "Repeat-victimization risk modelling and risk-map pipeline")]
pub struct Cli {
    /// Master seed; overrides the seed from presets and config files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat `key = value` settings file. Keys may be prefixed with a
    /// command name (`train.trees_per_forest = 20`) to scope them.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for training (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Skip malformed CSV rows with a warning instead of failing.
    #[arg(long, global = true)]
    pub lenient: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic case extract as CSV.
    Generate(GenerateArgs),
    /// Build an encoded feature frame from a case CSV.
    Preprocess(PreprocessArgs),
    /// Exploratory report: report counts, reporter scores, rank tests, correlations.
    Eda(EdaArgs),
    /// Split off a holdout, train the ensemble, evaluate, and save the model.
    Train(TrainArgs),
    /// Score labelled data with a saved model.
    Evaluate(EvaluateArgs),
    /// Village and district aggregates, GeoJSON layers and the per-category summary table.
    Aggregate(AggregateArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    /// 8,850 cases across all four case types.
    Map,
    /// 3,759 intimate-partner cases.
    Model,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "map")]
    pub preset: Preset,
    #[arg(long)]
    pub out: PathBuf,
    /// Override one generator setting, e.g. `--set positive_rate=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Also write the synthetic village boundaries as GeoJSON.
    #[arg(long)]
    pub boundaries_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated model variables (default: the six model variables).
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    #[arg(long, default_value_t = dvrisk_core::preprocess::DEFAULT_RARE_THRESHOLD)]
    pub rare_threshold: f64,
    /// Replay the encoding stored in a frame or model file instead of fitting.
    #[arg(long)]
    pub schema_from: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EdaArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub frame: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// 20 outer x 5 inner x 50 trees, 200 per class (default).
    #[arg(long, conflicts_with = "paper_scale")]
    pub desk_scale: bool,
    /// 200 outer x 50 inner x 200 trees, 500 per class.
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long, default_value_t = dvrisk_core::pipeline::DEFAULT_HOLDOUT)]
    pub holdout: usize,
    /// Keep the class ratio in the holdout.
    #[arg(long)]
    pub stratified: bool,
    /// Override one ensemble setting, e.g. `--set trees_per_forest=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Encoded frame built with the model's schema.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    pub frame: Option<PathBuf>,
    /// Case CSV, encoded with the model's schema.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Aggregates JSON consumed by `serve`.
    #[arg(long)]
    pub out: PathBuf,
    /// Village boundaries GeoJSON (default: bundled synthetic grid).
    #[arg(long)]
    pub boundaries: Option<PathBuf>,
    /// `raw,category` CSV (default: bundled mapping).
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// `case_id,address` CSV for records without village or coordinates.
    #[arg(long, requires = "geocoder_table")]
    pub addresses: Option<PathBuf>,
    /// `address,lat,lon` CSV used to resolve addresses.
    #[arg(long, requires = "addresses")]
    pub geocoder_table: Option<PathBuf>,
    /// Count predicted high-risk cases with this model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Write one GeoJSON layer per view into this directory.
    #[arg(long)]
    pub geojson_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = dvrisk_service::DEFAULT_LISTEN)]
    pub listen: std::net::SocketAddr,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub aggregates: Option<PathBuf>,
    #[arg(long)]
    pub boundaries: Option<PathBuf>,
    /// Accept POST /api/reload from any address.
    #[arg(long)]
    pub allow_remote_reload: bool,
}

/// Bad flags or settings: exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match std::panic::catch_unwind(|| commands::run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
        Err(_) => ExitCode::from(3),
    }
}
