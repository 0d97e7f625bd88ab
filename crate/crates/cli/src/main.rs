//! `warpdiff` command-line driver.

mod commands;
mod config;
mod data;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use config::Command;

#[derive(Parser, Debug)]
#[command(
    name = "warpdiff",
    version,
    about = "Toy-scale warp-conditioned novel view diffusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Bad arguments discovered after parsing.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<warpdiff::Error>() {
            return match e {
                e if e.is_numerical() => EXIT_NUMERICAL,
                e if e.is_io() => EXIT_IO,
                warpdiff::Error::Format { .. } => EXIT_IO,
                _ => EXIT_USAGE,
            };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_USAGE
}

/// `WARPDIFF_THREADS` caps the worker pool; 0 selects the sequential path.
fn configure_threads() -> anyhow::Result<bool> {
    let Ok(raw) = std::env::var("WARPDIFF_THREADS") else {
        return Ok(true);
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        usage(format!(
            "WARPDIFF_THREADS must be a non-negative integer, got '{raw}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .map_err(|e| usage(format!("cannot configure thread pool: {e}")))?;
    Ok(n != 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|parallel| commands::run(&cli.command, parallel));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
