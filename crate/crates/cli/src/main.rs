mod commands;
mod config;
mod figures;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kicked_rotor::scenario::ScenarioError;
use kicked_rotor::series::Engine;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical adequacy failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Verify(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

/// Double-pulse excitation of unidirectional rotation in thermal ensembles of
/// linear molecules.
#[derive(Debug, Parser)]
#[command(name = "kicked-rotor", version)]
struct Cli {
    /// Worker threads for the parallel core (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Flags that override keys of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Output directory (`output.dir`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Propagation engine (`engine.kind`).
    #[arg(long, value_parser = parse_engine)]
    pub engine: Option<Engine>,
    /// Temperature in kelvin (`temperature_k`).
    #[arg(long, value_name = "K")]
    pub temperature_k: Option<f64>,
    /// Samples per revival period (`engine.points_per_revival`).
    #[arg(long, value_name = "N")]
    pub points_per_revival: Option<usize>,
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    match s {
        "spectral" => Ok(Engine::Spectral),
        "fdtd" => Ok(Engine::Fdtd),
        _ => Err(format!("unknown engine `{s}` (spectral, fdtd)")),
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a single double-pulse protocol.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the parameter sweep described by the config's `[scan]` block.
    Scan {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Reproduce the bundled reference figures and report their verdicts.
    Figures {
        #[arg(long, value_name = "DIR", default_value = "figures")]
        out: PathBuf,
        /// Skip the finite-difference cross-check (the slowest figure).
        #[arg(long)]
        skip_fdtd: bool,
        /// Only these bundled configs (repeatable), e.g. `--only fig2`.
        #[arg(long, value_name = "NAME")]
        only: Vec<String>,
        /// List the bundled configs and exit.
        #[arg(long)]
        list: bool,
    },
    /// Run the oracle and invariant suite.
    Check {
        /// Only checks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        /// Write the outcomes as JSON.
        #[arg(long, value_name = "FILE")]
        json: Option<PathBuf>,
    },
    /// Re-hash the files of an output directory against its manifest.
    Verify {
        dir: PathBuf,
        /// Also require the manifest to match this config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Run { config, overrides } => commands::run(&config, &overrides),
        Command::Scan { config, overrides } => commands::scan(&config, &overrides),
        Command::Figures { out, skip_fdtd, only, list } => {
            if list {
                figures::list();
                Ok(())
            } else {
                figures::run(&out, skip_fdtd, &only)
            }
        }
        Command::Check { filter, json } => commands::check(filter.as_deref(), json.as_deref()),
        Command::Verify { dir, config } => commands::verify(&dir, config.as_deref()),
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
