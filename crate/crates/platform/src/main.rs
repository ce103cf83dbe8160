use std::process::ExitCode;

use clap::Parser;
use tomtalk_platform::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let mut out = std::io::stdout().lock();
    match run(cli, &mut input, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = e.lines().next().unwrap_or_default();
            eprintln!("tomtalk: {line}");
            ExitCode::FAILURE
        }
    }
}
