//! Library side of the `hidden` command-line tool.

pub mod commands;
pub mod config;
pub mod files;

use clap::Parser;
use hidden_core::ErrorClass;

pub use config::{Cli, RunConfig};

/// Exit status for an error: 2 configuration, 3 data, 4 budget.
pub fn exit_code(e: &hidden_core::Error) -> i32 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Budget => 4,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.resolve().and_then(commands::run) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
