//! Command-line front end for `offsetcal`.

pub mod args;
pub mod bounds_cmd;
pub mod error;
pub mod estimate_cmd;
pub mod io;
pub mod manifest;
pub mod noise;
pub mod reproduce_cmd;
pub mod svg;

use std::io::Write;

pub use error::{CliError, CliResult};

use args::{Cli, Command};
use manifest::RunManifest;

fn echo_manifest(manifest: &Option<RunManifest>) -> CliResult<()> {
    if let Some(m) = manifest {
        eprintln!("{}", serde_json::to_string_pretty(m)?);
    }
    Ok(())
}

/// Runs one parsed invocation, writing the primary output to stdout.
pub fn run(cli: &Cli) -> CliResult<()> {
    let mut stdout = std::io::stdout().lock();
    match &cli.command {
        Command::Bounds(a) => stdout.write_all(bounds_cmd::run(a)?.as_bytes())?,
        Command::Estimate(a) => {
            let r = estimate_cmd::run(a)?;
            stdout.write_all(r.rendered.as_bytes())?;
            echo_manifest(&r.manifest)?;
        }
        Command::Reproduce(a) => {
            let r = reproduce_cmd::run(a)?;
            if r.manifest.is_none() {
                stdout.write_all(r.rendered.as_bytes())?;
            }
            echo_manifest(&r.manifest)?;
        }
    }
    Ok(())
}

/// Sizes the global thread pool from `OFFSETCAL_THREADS` when set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("OFFSETCAL_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("OFFSETCAL_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}
