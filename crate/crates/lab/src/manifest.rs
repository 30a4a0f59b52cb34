//! Run manifests: one JSON file per command invocation, written
//! atomically at run end, listing every output file.

use crate::error::Result;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub run_id: String,
    pub scenario_hash: String,
    pub tool_version: String,
    pub wall_time_ms: u128,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(run_id: String, scenario_hash: String) -> RunManifest {
        RunManifest {
            run_id,
            scenario_hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_ms: 0,
            outputs: Vec::new(),
        }
    }
}

/// Writes the manifest via a temp file and rename, so readers never see
/// a partial manifest.
pub fn write_manifest(dir: &Path, name: &str, manifest: &RunManifest) -> Result<PathBuf> {
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    let body = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&tmp, body)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}
