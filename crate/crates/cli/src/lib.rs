//! Batch front end for the `levelcross` library.
//!
//! Each subcommand resolves its settings from flags, an optional TOML file
//! and defaults (in that order of precedence), runs one pipeline and emits
//! plot-ready columns as CSV or JSON.

// `!(x > 0.0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::commands::{
    ClosedFormArgs, CompareArgs, DetuningArgs, FloquetArgs, HeunMapArgs, Report, SimulateArgs, TerminateArgs,
};
use crate::config::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "levelcross", version, about, long_about = None)]
pub struct Cli {
    /// TOML file with optional [field] and [run] tables; flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the detuning into (t, delta_t) columns, optionally over a Δ1 sweep
    Detuning(DetuningArgs),
    /// Integrate the two-state equations numerically
    Simulate(SimulateArgs),
    /// Evaluate the exact solution matched to an initial state
    ClosedForm(ClosedFormArgs),
    /// Analytic Floquet exponents against the numerical monodromy
    Floquet(FloquetArgs),
    /// Parameters of the associated general Heun equation for both signs
    HeunMap(HeunMapArgs),
    /// Termination of the Beta-function series for Δ2 = N, N = 0..n-max
    Terminate(TerminateArgs),
    /// Exact solution against numerical integration, with a verdict
    Compare(CompareArgs),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Numerical(#[from] levelcross::Error),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    /// A library error raised while validating user input.
    pub fn invalid(e: levelcross::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) | CliError::Internal(_) => 1,
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }
}

/// Successful runs end in one of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    ComparisonFailed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::ComparisonFailed => 4,
        }
    }
}

/// Runs the command without touching the filesystem or stdout.
pub fn execute(command: Command, file: &FileConfig) -> Result<Report, CliError> {
    match command {
        Command::Detuning(a) => commands::detuning(a, file),
        Command::Simulate(a) => commands::simulate(a, file),
        Command::ClosedForm(a) => commands::closed_form(a, file),
        Command::Floquet(a) => commands::floquet(a, file),
        Command::HeunMap(a) => commands::heun_map(a, file),
        Command::Terminate(a) => commands::terminate(a, file),
        Command::Compare(a) => commands::compare(a, file),
    }
}

/// Runs the command and writes its documents: files atomically, the rest to stdout.
pub fn run(cli: Cli) -> Result<Status, CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let report = execute(cli.command, &file)?;
    let mut files = Vec::new();
    let mut stdout = Vec::new();
    for out in &report.outputs {
        let bytes = out.doc.render(report.format)?;
        match &out.path {
            Some(p) => files.push((p.clone(), bytes)),
            None => stdout.extend(bytes),
        }
    }
    output::write_all(&files)?;
    std::io::stdout().lock().write_all(&stdout)?;
    Ok(if report.failed { Status::ComparisonFailed } else { Status::Success })
}
