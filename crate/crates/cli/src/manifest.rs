use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

/// Version of the sweep CSV column layout.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct OutputChecksum {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub wall_seconds: f64,
}

/// Everything needed to regenerate the artifacts of one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub csv_schema_version: u32,
    pub master_seed: Option<u64>,
    pub threads: usize,
    pub config: serde_json::Value,
    pub outputs: Vec<OutputChecksum>,
    pub timings: Timings,
}

impl RunManifest {
    pub fn new(command: &str, master_seed: Option<u64>, config: serde_json::Value) -> Self {
        Self {
            tool: "offsetcal",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            csv_schema_version: CSV_SCHEMA_VERSION,
            master_seed,
            threads: rayon::current_num_threads(),
            config,
            outputs: Vec::new(),
            timings: Timings { wall_seconds: 0.0 },
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes each artifact into `dir`, records its checksum, then writes
/// `manifest.json` alongside.
pub fn write_artifacts(
    dir: &Path,
    artifacts: &[(String, Vec<u8>)],
    manifest: &mut RunManifest,
) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in artifacts {
        std::fs::write(dir.join(name), bytes)?;
        manifest.outputs.push(OutputChecksum {
            path: name.clone(),
            sha256: sha256_hex(bytes),
        });
    }
    let json = serde_json::to_vec_pretty(manifest)?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}
