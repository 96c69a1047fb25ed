//! `trapbec`: configuration-driven runs of the trapped Bose gas solvers.
//!
//! Exit status: 0 success, 1 failed property suite or other runtime error,
//! 2 invalid configuration, 3 solver non-convergence, 4 potential fails the
//! standing assumption.

mod artifacts;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;
use trapbec_core::Error as CoreError;

use crate::config::{Command, ConfigError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "trapbec", version, about = "Mean-field trapped Bose gas solvers", long_about = None)]
struct Cli {
    /// Computation to run.
    #[arg(value_enum)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
    /// Print the fully resolved configuration as JSON and exit.
    #[arg(long)]
    dump_config: bool,
}

pub(crate) fn exit_code_for(e: &CoreError) -> i32 {
    match e {
        CoreError::Validation(_) => 4,
        CoreError::NonConvergence { .. }
        | CoreError::Bracket { .. }
        | CoreError::CutoffTooLow(_)
        | CoreError::Divergence { .. }
        | CoreError::Quadrature(_)
        | CoreError::Truncation(_)
        | CoreError::Admissibility(_) => 3,
        CoreError::Domain { .. } | CoreError::Precondition(_) | CoreError::Parse(_) => 2,
        CoreError::Io(_) => 1,
    }
}

fn classify(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<CoreError>() {
        Some(core) => exit_code_for(core),
        None => 1,
    }
}

fn run(config: &RunConfig) -> anyhow::Result<i32> {
    let key = artifacts::cache_key(config)?;
    let cached = if config.cache {
        artifacts::load_cached(config, &key)
    } else {
        None
    };
    let output = match cached {
        Some(output) => {
            eprintln!("cache hit {key}");
            output
        }
        None => {
            let output = commands::run(config)?;
            if config.cache && output.exit_code == 0 {
                artifacts::store_cached(config, &key, &output)?;
            }
            output
        }
    };
    for path in artifacts::write_artifacts(config, &key, &output)? {
        println!("{}", path.display());
    }
    Ok(output.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match RunConfig::resolve(cli.command, &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.dump_config {
        match serde_json::to_string_pretty(&config) {
            Ok(text) => {
                println!("{text}");
                return ExitCode::SUCCESS;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
    }
    match run(&config) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let code = classify(&e);
            eprintln!("error: {e:#}");
            if code == 3 || code == 4 {
                match artifacts::write_diagnostics(&config, &format!("{e:#}"), code) {
                    Ok(path) => eprintln!("diagnostics written to {}", path.display()),
                    Err(w) => eprintln!("could not write diagnostics: {w:#}"),
                }
            }
            ExitCode::from(code as u8)
        }
    }
}
