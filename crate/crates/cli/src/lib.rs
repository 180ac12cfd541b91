//! `needlet`: batch front-end for window design, needlet analysis and
//! Monte-Carlo evaluation. Every run writes `manifest.json` into `--out`.

pub mod args;
mod commands;
pub mod config;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;
use needlet::ErrorClass;

use args::{Cli, Command};
use commands::Output;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(needlet::Error),
}

impl From<needlet::Error> for CliError {
    fn from(e: needlet::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) => match e.class() {
                ErrorClass::Usage => 2,
                ErrorClass::Precondition => 3,
                ErrorClass::Numeric => 4,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

fn run(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    let mut out = Output::new(&cli.out)?;
    match &cli.command {
        Command::Design(kind) => commands::design(kind, cli.seed, &mut out)?,
        Command::Analyze(a) => commands::analyze_cmd(a, &mut out)?,
        Command::Synthesize(a) => commands::synthesize_cmd(a, &mut out)?,
        Command::Simulate(a) => commands::simulate_cmd(a, cli.seed, &mut out)?,
        Command::Evaluate(kind) => commands::evaluate(kind, cli.seed, &mut out)?,
    }
    out.finish(cli, argv)
}

/// Runs the tool on raw arguments and maps errors to exit statuses.
pub fn main_with_args(raw: Vec<OsString>) -> ExitCode {
    let argv = match config::resolve_args(raw) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("needlet: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let shown: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(&cli, &shown) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("needlet: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
