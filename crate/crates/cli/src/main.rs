mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sensorlab::timeseries::TimeSeriesError;

use crate::config::FileConfig;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "sensorlab", version, about = "Sensor-record analytics toolkit")]
struct Cli {
    /// TOML file with flat settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Sensor-record CSV file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory for reports and tables.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Missing-value policy: drop_row or impute_mean.
    #[arg(long)]
    pub missing: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a sensor-record file against the schema.
    Validate(commands::validate::ValidateArgs),
    /// Write a synthetic dataset.
    Generate(commands::generate::GenerateArgs),
    /// Stratified k-fold evaluation of one classifier.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Feature importances of a tree model.
    Importance(commands::importance::ImportanceArgs),
    /// Predict the person present at a timestamp.
    PredictTime(commands::predict_time::PredictTimeArgs),
    /// Stationarity and causality diagnostics plus VAR forecasting.
    Forecast(commands::forecast::ForecastArgs),
    /// Replay records through the edge-filtered pipeline.
    Simulate(commands::simulate::SimulateArgs),
}

/// Failure inside a numerical routine rather than in the input (exit code 3).
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "numerical failure: {}", self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<NumericalFailure>().is_some() {
            return EXIT_NUMERICAL;
        }
        if let Some(e) = cause.downcast_ref::<TimeSeriesError>() {
            if matches!(e, TimeSeriesError::Numerical(_)) {
                return EXIT_NUMERICAL;
            }
        }
    }
    EXIT_INPUT
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let file = match &cli.config {
        Some(path) => match FileConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(EXIT_INPUT);
            }
        },
        None => FileConfig::default(),
    };
    let result = match cli.command {
        Command::Validate(a) => commands::validate::run(a, &file),
        Command::Generate(a) => commands::generate::run(a, &file),
        Command::Evaluate(a) => commands::evaluate::run(a, &file),
        Command::Importance(a) => commands::importance::run(a, &file),
        Command::PredictTime(a) => commands::predict_time::run(a, &file),
        Command::Forecast(a) => commands::forecast::run(a, &file),
        Command::Simulate(a) => commands::simulate::run(a, &file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
