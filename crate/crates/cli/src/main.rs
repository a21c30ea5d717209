use std::io::{self, Write};
use std::process::ExitCode;

use bayesbin_cli::args::Cli;
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let code = match bayesbin_cli::run(&cli, &mut out) {
        Ok(code) => code,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            bayesbin_cli::exit_code(e.class())
        }
    };
    let _ = out.flush();
    ExitCode::from(code as u8)
}
