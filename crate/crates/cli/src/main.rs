//! `oscomb`: order-statistic combiner toolkit.

mod cache;
mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use commands::{BenchArgs, MomentsArgs, ReduceArgs, SimulateArgs};
use report::ReportEnvelope;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "oscomb",
    version,
    about = "Order-statistic classifier combiners"
)]
struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    /// Moment table cache file.
    #[arg(long, global = true, value_name = "PATH")]
    cache: Option<PathBuf>,
    /// Write a JSON report to this file.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(untagged)]
enum Command {
    /// Print the Gaussian order-statistic moment table.
    Moments(MomentsArgs),
    /// Analytic reduction factor and model error of a rule.
    Reduce(ReduceArgs),
    /// Monte Carlo check of a reduction factor.
    Simulate(SimulateArgs),
    /// Train MLP ensembles and score combiners over repeated runs.
    Bench(BenchArgs),
}

pub struct Context {
    pub quiet: bool,
    pub cache: Option<PathBuf>,
}

impl Context {
    pub fn progress(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

/// What a command produced: its payload and, if a check failed, why.
pub struct Outcome {
    pub results: serde_json::Value,
    pub violation: Option<String>,
}

fn parameters(cli: &Cli) -> serde_json::Value {
    let mut params = serde_json::to_value(&cli.command).unwrap_or_default();
    if let Some(map) = params.as_object_mut() {
        map.insert("quiet".into(), cli.quiet.into());
        map.insert(
            "cache".into(),
            serde_json::to_value(&cli.cache).unwrap_or_default(),
        );
        map.insert(
            "out".into(),
            serde_json::to_value(&cli.out).unwrap_or_default(),
        );
    }
    params
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Context {
        quiet: cli.quiet,
        cache: cli.cache.clone(),
    };
    let (name, outcome) = match &cli.command {
        Command::Moments(a) => ("moments", commands::moments(a, &ctx)?),
        Command::Reduce(a) => ("reduce", commands::reduce(a, &ctx)?),
        Command::Simulate(a) => ("simulate", commands::simulate(a, &ctx)?),
        Command::Bench(a) => ("bench", commands::bench(a, &ctx)?),
    };
    if let Some(path) = &cli.out {
        ReportEnvelope::new(name, parameters(&cli), outcome.results).write(path)?;
    }
    match outcome.violation {
        Some(v) => Err(CliError::Numeric(v)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
