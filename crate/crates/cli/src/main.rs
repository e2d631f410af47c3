//! `claimcheck` — operator entry point for the verification pipeline.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 transport
//! error.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Transport(String),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self::Config(message.into())
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::Data(message.into())
    }

    pub fn transport(message: impl Into<String>) -> Self {
        Self::Transport(message.into())
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Transport(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Transport(m) => m,
        }
    }
}

impl From<claimcheck_core::gateway::GatewayError> for CliError {
    fn from(err: claimcheck_core::gateway::GatewayError) -> Self {
        use claimcheck_core::gateway::GatewayError::*;
        match &err {
            TransportError { .. } => CliError::transport(err.to_string()),
            BackendUnconfigured(_) | Config(_) => CliError::config(err.to_string()),
            Io(_) => CliError::data(err.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "claimcheck", version, about = "Program-guided claim verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a retrieval index artifact from a JSON-lines corpus.
    Index(commands::IndexArgs),
    /// Verify one claim and print True or False.
    Verify(commands::VerifyArgs),
    /// Run a benchmark dataset and write a metric report.
    Bench(commands::BenchArgs),
    /// Strategy and demonstration bootstrapping.
    Bootstrap {
        #[command(subcommand)]
        action: BootstrapAction,
    },
    /// Inspect persisted run artifacts.
    Trace {
        #[command(subcommand)]
        action: TraceAction,
    },
}

#[derive(Subcommand)]
enum BootstrapAction {
    /// Run the critique-refine bootstrapping loop.
    Run(commands::BootstrapArgs),
}

#[derive(Subcommand)]
enum TraceAction {
    /// Print the execution trace recorded for one claim of a run.
    Show(commands::TraceShowArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Index(args) => commands::cmd_index(args),
        Command::Verify(args) => commands::cmd_verify(args),
        Command::Bench(args) => commands::cmd_bench(args),
        Command::Bootstrap {
            action: BootstrapAction::Run(args),
        } => commands::cmd_bootstrap(args),
        Command::Trace {
            action: TraceAction::Show(args),
        } => commands::cmd_trace_show(args),
    };
    if let Err(err) = result {
        eprintln!("error: {}", err.message());
        std::process::exit(err.exit_code());
    }
}

/// Shared `--config` argument.
#[derive(clap::Args)]
pub struct ConfigArg {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
}
