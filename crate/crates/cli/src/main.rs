use std::process::ExitCode;

use clap::Parser;
use offsetcal_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = offsetcal_cli::configure_threads().and_then(|()| offsetcal_cli::run(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
