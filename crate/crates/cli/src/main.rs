//! `restamp` — amplify, execute, measure and report REST API test suites.
//!
//! Exit-code policy: test failures and low coverage are data (exit 0);
//! configuration and I/O problems exit 1; workflow aborts exit 2 with the
//! partial bundle kept on disk.

mod bundle;
mod cmd_amplify;
mod cmd_coverage;
mod cmd_exec;
mod cmd_report;
mod cmd_stub;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use restamp_core::clock::{fixed_clock, system_clock, SharedClock};

/// Instant used by `--fixed-clock`: 2025-01-01T00:00:00Z.
pub const FIXED_CLOCK_MS: i64 = 1_735_689_600_000;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Workflow(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Workflow(_) => 2,
        }
    }

    pub fn config(message: impl fmt::Display) -> CliError {
        CliError::Config(message.to_string())
    }

    pub fn workflow(message: impl fmt::Display) -> CliError {
        CliError::Workflow(message.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Workflow(m) => write!(f, "{m}"),
        }
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(
    name = "restamp",
    version,
    about = "REST API test amplification workbench",
    propagate_version = true
)]
struct Cli {
    /// Freeze timestamps and durations for byte-reproducible artifacts.
    #[arg(long, global = true)]
    fixed_clock: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Amplify a baseline suite over one or more endpoints with an LLM workflow.
    Amplify(cmd_amplify::AmplifyArgs),
    /// Execute a suite against a target and write results plus the exchange log.
    Exec(cmd_exec::ExecArgs),
    /// Compute structural coverage of execution logs against a spec.
    Coverage(cmd_coverage::CoverageArgs),
    /// Serve a spec-driven mock API.
    Stub(cmd_stub::StubArgs),
    /// Assemble a run bundle into report tables.
    Report(cmd_report::ReportArgs),
}

fn main() {
    let cli = Cli::parse();
    let clock: SharedClock = if cli.fixed_clock {
        fixed_clock(FIXED_CLOCK_MS)
    } else {
        system_clock()
    };
    let outcome = match cli.command {
        Command::Amplify(args) => cmd_amplify::run(args, &clock),
        Command::Exec(args) => cmd_exec::run(args, &clock),
        Command::Coverage(args) => cmd_coverage::run(args),
        Command::Stub(args) => cmd_stub::run(args, &clock),
        Command::Report(args) => cmd_report::run(args),
    };
    if let Err(e) = outcome {
        eprintln!("restamp: {e}");
        std::process::exit(e.exit_code());
    }
}

/// Read a file with a config-oriented error message.
pub fn read_config(path: &PathBuf) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))
}
