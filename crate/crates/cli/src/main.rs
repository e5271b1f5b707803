mod cli;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use cli::Cli;
use commands::{run, Ctx};

const EXIT_VALIDATION: i32 = 2;
const EXIT_DEGENERATE: i32 = 3;
const EXIT_USAGE: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Core(cylbill_core::Error),
}

impl From<cylbill_core::Error> for CliError {
    fn from(e: cylbill_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn status(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Core(e) if e.is_degeneracy() => EXIT_DEGENERATE,
            CliError::Core(_) => EXIT_VALIDATION,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("CYLBILL_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("CYLBILL_THREADS must be a positive integer, got {v:?}")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn exit(status: i32) -> ExitCode {
    ExitCode::from(u8::try_from(status).unwrap_or(1))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => exit(EXIT_USAGE),
            };
        }
    };
    let result = configure_threads().and_then(|()| run(&cli.command, &Ctx::new(&cli.global)));
    match result {
        Ok(Some(report)) => {
            print!("{}", report.json);
            for line in &report.footer {
                println!("{line}");
            }
            exit(report.status)
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cylbill: {e}");
            exit(e.status())
        }
    }
}
