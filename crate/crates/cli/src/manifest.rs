use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const TOOL: &str = "egen";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    output: String,
    records: usize,
    sha256: String,
    config_sha256: String,
    config: &'a RunConfig,
    /// Wall-clock measurements; the only nondeterministic part.
    timing: Value,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// Writes `<output>.manifest.json` next to an output file.
pub fn write_manifest(
    output: &Path,
    command: &str,
    cfg: &RunConfig,
    records: usize,
    timing: Value,
) -> Result<(), CliError> {
    let bytes = std::fs::read(output).map_err(|e| CliError::Runtime(format!("{}: {e}", output.display())))?;
    let m = Manifest {
        tool: TOOL,
        version: VERSION,
        command,
        output: output.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        records,
        sha256: hex::encode(Sha256::digest(&bytes)),
        config_sha256: cfg.digest(),
        config: cfg,
        timing,
    };
    let path = manifest_path(output);
    let mut text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}
