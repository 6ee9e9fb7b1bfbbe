//! `dca`: fit, inspect and evaluate discrete component models from the command line.

mod data;
mod eval;
mod fit;
mod options;
mod topics;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use data::{IngestArgs, SynthArgs};
use eval::EvalArgs;
use fit::FitArgs;
use topics::TopicsArgs;

#[derive(Debug, Parser)]
#[command(name = "dca", version, about = "Discrete component analysis of count data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model to a docword corpus.
    Fit(FitArgs),
    /// Show the top words of each component, or the group membership table.
    Topics(TopicsArgs),
    /// Score documents under a fitted model, or compare several K.
    Eval(EvalArgs),
    /// Sample a corpus from a random model.
    Synth(SynthArgs),
    /// Convert a roll-call vote table into a grouped corpus.
    IngestRollcall(IngestArgs),
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag combinations.
    Usage(String),
    Run(dca::Error),
}

impl From<dca::Error> for CliError {
    fn from(e: dca::Error) -> Self {
        CliError::Run(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(e) if e.is_numeric() => 4,
            CliError::Run(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit::run(a),
        Command::Topics(a) => topics::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Synth(a) => data::synth(a),
        Command::IngestRollcall(a) => data::ingest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dca: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
