//! Command-line frontend and file formats for activation-to-parameter
//! prediction experiments.
//!
//! The heavy lifting lives in `actpred-core`; this crate owns everything
//! that touches the filesystem or a terminal: the binary activation and
//! checkpoint formats, report writers, configuration resolution, and the
//! `gen` / `train` / `eval` / `episodes` / `analyze` subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

use clap::{Parser, Subcommand};

use crate::error::CmdError;

#[derive(Debug, Parser)]
#[command(
    name = "actpred",
    version,
    about = "Predict classifier parameters from activation statistics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic activation dataset and split it.
    Gen(config::GenArgs),
    /// Train a parameter predictor on an activation store.
    Train(config::TrainArgs),
    /// Evaluate the mixed classifier and the cosine baseline.
    Eval(config::EvalArgs),
    /// Run N-way K-shot episodes and report mean accuracy with a 95% CI.
    Episodes(config::EpisodesArgs),
    /// Inspect a trained linear predictor's channel impacts.
    Analyze(config::AnalyzeArgs),
}

pub fn run(cli: &Cli) -> Result<(), CmdError> {
    match &cli.command {
        Command::Gen(args) => commands::gen::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Episodes(args) => commands::episodes::run(args),
        Command::Analyze(args) => commands::analyze::run(args),
    }
}
