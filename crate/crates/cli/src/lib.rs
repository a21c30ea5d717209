//! Command-line front end for `bayesbin`.

pub mod args;
pub mod commands;
pub mod report;

use std::io::Write;

use bayesbin::{ErrorClass, Result};

use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Usage => EXIT_USAGE,
        ErrorClass::Data => EXIT_DATA,
        ErrorClass::Numerical => EXIT_NUMERICAL,
        ErrorClass::Mismatch => EXIT_MISMATCH,
    }
}

/// Run a parsed command, writing reports to `out`. Returns the exit status
/// for a run that completed; errors carry their own class.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Fit(a) => commands::fit(a, out).map(|_| EXIT_OK),
        Command::Diagnose(a) => commands::diagnose(a, out).map(|_| EXIT_OK),
        Command::Compare(a) => commands::compare_cmd(a, out).map(|_| EXIT_OK),
        Command::Predict(a) => commands::predict(a, out).map(|_| EXIT_OK),
        Command::Verify(a) => commands::verify(a, out).map(|ok| if ok { EXIT_OK } else { EXIT_NUMERICAL }),
    }
}
