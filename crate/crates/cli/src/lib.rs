//! The `sdlformer` command line.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod images;

use std::ffi::OsString;

use clap::Parser;

pub use error::{CliError, Kind, Result};

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let parsed = match cli::Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::new(Kind::Usage, first.trim_start_matches("error: ").to_string()));
        }
    };
    commands::dispatch(parsed.command)
}
