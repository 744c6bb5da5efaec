//! Front end for `replicate-core`: argument parsing, config merging, output
//! files and run manifests.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;
pub use commands::{execute, Report};
pub use error::CliError;
pub use manifest::RunManifest;

/// Parses `argv` (with any config file), runs the command and writes its
/// outputs. Returns the process exit code.
pub fn run(argv: Vec<OsString>) -> Result<i32, CliError> {
    let cli = Cli::try_parse_from(config::merge_config(argv)?)?;
    let level = if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .try_init();
    let report = execute(&cli)?;
    commands::write_outputs(&cli, &report, cli.out.as_deref())?;
    if !cli.quiet {
        for line in &report.summary {
            eprintln!("{line}");
        }
    }
    Ok(report.exit_code)
}
