use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{hex_digest, RunConfig};
use crate::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance record written into every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Input file name → SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the directory) → SHA-256.
    pub outputs: BTreeMap<String, String>,
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex_digest(&bytes))
}

fn display_name(path: &Path) -> String {
    path.file_name().map_or_else(
        || path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

pub fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    inputs: &[&Path],
    outputs: &[String],
) -> Result<Manifest> {
    let mut m = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed: cfg.seed,
        config_sha256: cfg.digest()?,
        inputs: BTreeMap::new(),
        outputs: BTreeMap::new(),
    };
    for p in inputs {
        m.inputs.insert(display_name(p), file_digest(p)?);
    }
    for name in outputs {
        m.outputs
            .insert(name.clone(), file_digest(&dir.join(name))?);
    }
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")
        .map_err(|e| CliError::io(&path, e))?;
    Ok(m)
}
