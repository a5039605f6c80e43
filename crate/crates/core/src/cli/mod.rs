//! The `peeksched` experiment runner.
//!
//! `run` writes one CSV row per (sweep value, scheduler, trial) with the
//! columns in [`CSV_HEADER`]; floats use 9 significant digits. `oracle-check`
//! compares planned utilities with the exhaustive solvers. `scenarios` lists
//! the built-in workloads. Configuration errors exit with status 2 and a
//! `path:line:column` message; runtime failures exit with status 1.

mod config;
mod run;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{parse_config, ConfigError, ExperimentConfig, Point, Sweep, SweepParam, SweepValue};
pub use run::{fmt_float, oracle_check, oracle_csv, run, to_csv, OracleRow, OracleStatus, Row, CSV_HEADER, ORACLE_HEADER};

use crate::oracle::OracleBudget;
use crate::workload::{builtin, BUILTIN_NAMES};

#[derive(Debug)]
pub enum CliError {
    Config { path: Option<PathBuf>, error: ConfigError },
    Io { path: PathBuf, error: std::io::Error },
    Runtime(crate::Error),
    /// oracle-check found a scheduler disagreeing with an exact solver.
    Mismatch(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { path: Some(p), error } => write!(f, "{}:{error}", p.display()),
            CliError::Config { path: None, error } => write!(f, "config:{error}"),
            CliError::Io { path, error } => write!(f, "{}: {error}", path.display()),
            CliError::Runtime(e) => write!(f, "{e}"),
            CliError::Mismatch(n) => write!(f, "{n} oracle mismatches"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "peeksched", version, about = "Deadline-aware inference scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run trials (and the sweep, if configured) and write CSV.
    Run(RunArgs),
    /// Compare schedulers against the exhaustive solvers.
    OracleCheck(RunArgs),
    /// List the built-in scenarios.
    Scenarios,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output path; overrides the config's `output`. Stdout when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `trials`.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
}

/// Parses a configuration and applies command-line overrides.
pub fn load_config(text: &str, seed: Option<u64>, trials: Option<u64>) -> Result<ExperimentConfig, ConfigError> {
    let mut config = parse_config(text)?;
    if let Some(seed) = seed {
        config.base_seed = seed;
    }
    if let Some(trials) = trials {
        config.trials = trials;
    }
    Ok(config)
}

/// Runs a configuration given as text and returns the CSV.
pub fn run_config_str(text: &str) -> Result<String, CliError> {
    let config = parse_config(text).map_err(|error| CliError::Config { path: None, error })?;
    Ok(to_csv(&run(&config)?))
}

fn read_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|error| CliError::Io {
        path: args.config.clone(),
        error,
    })?;
    load_config(&text, args.seed, args.trials).map_err(|error| CliError::Config {
        path: Some(args.config.clone()),
        error,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|error| CliError::Io {
            path: path.to_path_buf(),
            error,
        }),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|error| CliError::Io {
            path: PathBuf::from("<stdout>"),
            error,
        }),
    }
}

fn scenarios_listing() -> Result<String, CliError> {
    let mut out = String::from("name,apps,request_count,window_ms,deadline_mean_ms\n");
    for name in BUILTIN_NAMES {
        let s = builtin(name)?;
        let apps: Vec<&str> = s.apps.iter().map(|a| a.id.as_str()).collect();
        out.push_str(&format!(
            "{name},{},{},{},{}\n",
            apps.join(" "),
            s.request_count,
            fmt_float(s.window_ms),
            fmt_float(s.deadline.mean())
        ));
    }
    Ok(out)
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => {
            let config = read_config(&args)?;
            let csv = to_csv(&run(&config)?);
            emit(args.out.as_deref().or(config.output.as_deref()), &csv)
        }
        Command::OracleCheck(args) => {
            let config = read_config(&args)?;
            let rows = oracle_check(&config, OracleBudget::default())?;
            emit(args.out.as_deref().or(config.output.as_deref()), &oracle_csv(&rows))?;
            match rows.iter().filter(|r| r.status == OracleStatus::Mismatch).count() {
                0 => Ok(()),
                n => Err(CliError::Mismatch(n)),
            }
        }
        Command::Scenarios => emit(None, &scenarios_listing()?),
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("peeksched: {e}");
            e.exit_code()
        }
    }
}
