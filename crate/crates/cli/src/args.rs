use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "lift",
    version,
    about = "Truck trajectory risk prediction with literature-informed LLMs"
)]
pub struct Cli {
    /// Harness configuration (JSON). Relative paths inside it resolve against its directory.
    #[arg(long, global = true, default_value = "lift.json")]
    pub config: PathBuf,
    /// Overrides the configured seed for splitting, sampling and decoding.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Answer every chat request from this mock script instead of the endpoint.
    #[arg(long, global = true, value_name = "SCRIPT")]
    pub mock: Option<PathBuf>,
    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskArg {
    Predict,
    Interpret,
    Both,
}

impl TaskArg {
    pub fn predict(self) -> bool {
        matches!(self, TaskArg::Predict | TaskArg::Both)
    }

    pub fn interpret(self) -> bool {
        matches!(self, TaskArg::Interpret | TaskArg::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Toggle {
    On,
    Off,
}

fn temperature(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=2.0).contains(&t) {
        Ok(t)
    } else {
        Err(format!("temperature {t} is outside [0, 2]"))
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Write a synthetic trajectory dataset as CSV.
    Synth {
        /// Number of trips (defaults to the configured size).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: Option<u64>,
        /// Output CSV (defaults to paths.dataset).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Screen the markdown corpus and aggregate a knowledge base.
    BuildKb,
    /// Export the balanced training split as SFT JSONL plus a training config.
    ExportSft,
    /// Evaluate prediction and/or interpretation on the held-out split.
    Eval {
        #[arg(long, value_enum, default_value_t = TaskArg::Both)]
        task: TaskArg,
    },
    /// Dispersion of key-variable counts across temperatures and of RF importance across resamples.
    Stability {
        #[arg(long, value_delimiter = ',', value_parser = temperature, default_values_t = [0.01, 0.5, 1.0])]
        temps: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        resamples: usize,
    },
    /// Evaluation with the knowledge base switched on or off against a named model.
    Ablate {
        #[arg(long, value_enum)]
        kb: Toggle,
        /// Key into the configured adapters map, naming the served model.
        #[arg(long)]
        adapter: String,
        #[arg(long, value_enum, default_value_t = TaskArg::Both)]
        task: TaskArg,
    },
    /// Print the summary of saved run reports (several reports print a comparison).
    Report {
        /// Report JSON files (defaults to paths.report_out).
        paths: Vec<PathBuf>,
    },
}
