//! `morphforge` command-line pipeline.
//!
//! Every subcommand reads only the paths it is given, writes its outputs
//! atomically and leaves a `run.json` provenance record next to them.
//! Exit codes: 0 on success, 1 for usage or validation errors, 2 for
//! runtime failures.

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub mod args;
mod commands;
pub mod index;
mod plots;
pub mod provenance;

pub use args::{Cli, Command};
pub use index::{MorphEntry, MorphIndex};
pub use plots::{emit_plots, PlotData, PlotSpec};
pub use provenance::RunRecord;

/// Fallback for `--backend-cmd`.
pub const BACKEND_CMD_ENV: &str = "MORPHFORGE_BACKEND_CMD";

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match commands::execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("morphforge {}: {e}", cli.command.name());
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
