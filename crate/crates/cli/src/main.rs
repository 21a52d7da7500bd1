mod args;
mod commands;
mod overlay;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use crate::args::{Cli, Command};

/// Why a command stopped.
pub enum Failure {
    /// Arguments rejected before any work started.
    Invalid(Vec<String>),
    /// Clap usage error, or help and version output.
    Usage(clap::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let argv: Vec<OsString> = std::env::args_os().collect();
    match run(argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(errs)) => {
            eprintln!("error: invalid arguments:");
            for e in errs {
                eprintln!("  {e}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Usage(e)) => {
            let _ = e.print();
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn parse(argv: &[OsString]) -> Result<clap::ArgMatches, Failure> {
    Cli::command()
        .try_get_matches_from(argv)
        .map_err(Failure::Usage)
}

fn run(argv: Vec<OsString>) -> Result<(), Failure> {
    let argv = match overlay::config_path(&argv) {
        Some((name, path)) => {
            overlay::apply(&Cli::command(), &argv, &name, &path).map_err(Failure::Invalid)?
        }
        None => argv,
    };
    let matches = parse(&argv)?;
    let cli = Cli::from_arg_matches(&matches).map_err(|e| Failure::Invalid(vec![e.to_string()]))?;
    if !matches!(cli.command, Command::Campaign(_)) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()?;
    }
    match cli.command {
        Command::Index(a) => commands::index(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Couple(a) => commands::couple(a),
        Command::Profile(a) => commands::profile(a),
        Command::Verify(a) => commands::verify(a),
        Command::Campaign(a) => commands::campaign(a),
    }
}
