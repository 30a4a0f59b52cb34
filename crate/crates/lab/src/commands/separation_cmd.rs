//! `separation`: the coverage-without-identifiability demonstration as a
//! CLI command with CSV and JSON outputs.

use super::ensure_out_dir;
use crate::csvfmt::{fmt6, write_csv};
use crate::error::{LabError, Result};
use crate::manifest::{write_manifest, RunManifest};
use crate::separation::{default_catalog, run_separation, SeparationReport};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

const HEADER: &[&str] = &[
    "run_id", "seed", "trials", "critic", "world", "rejection_edge", "soundness_violations",
];

#[derive(Serialize)]
struct SeparationParams {
    worlds: u32,
    trials: u64,
    transcript_samples: u32,
    seed: u64,
}

pub fn cmd_separation(
    worlds: u32,
    trials: u64,
    transcript_samples: u32,
    seed: u64,
    out_dir: &Path,
) -> Result<(SeparationReport, Vec<PathBuf>)> {
    if worlds < 2 {
        return Err(LabError::config("separation needs --worlds >= 2"));
    }
    if trials == 0 || transcript_samples == 0 {
        return Err(LabError::config("separation needs trials and transcript samples >= 1"));
    }
    let started = Instant::now();
    ensure_out_dir(out_dir)?;

    let params = SeparationParams { worlds, trials, transcript_samples, seed };
    let canonical = serde_json::to_string(&params).expect("params serialize");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let hash: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    let run_id = hash[..12].to_string();

    let report = run_separation(worlds, trials, transcript_samples, seed, &default_catalog());

    let mut rows = Vec::new();
    for critic in &report.critics {
        for world in &critic.worlds {
            rows.push(vec![
                run_id.clone(),
                seed.to_string(),
                trials.to_string(),
                critic.critic.clone(),
                world.world.to_string(),
                fmt6(world.edge()),
                world.soundness_violations.to_string(),
            ]);
        }
    }
    let csv_path = out_dir.join("separation.csv");
    write_csv(&csv_path, HEADER, &rows)?;

    let json_path = out_dir.join("separation_report.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&report).expect("report serializes"))?;

    let mut manifest = RunManifest::new(run_id.clone(), hash);
    manifest.outputs.push("separation.csv".into());
    manifest.outputs.push("separation_report.json".into());
    manifest.wall_time_ms = started.elapsed().as_millis();
    let manifest_path = write_manifest(out_dir, "separation_manifest.json", &manifest)?;

    for critic in &report.critics {
        println!(
            "separation {run_id}: {} worst-world edge {} violations {}",
            critic.critic,
            fmt6(critic.worst_world_edge),
            critic.violates_soundness
        );
    }
    if !report.transcripts_identical {
        return Err(LabError::Violation(
            "transcripts differ across worlds under stream replay".into(),
        ));
    }
    if let Some(critic) = report.critics.iter().find(|c| !c.exhibits_dichotomy()) {
        return Err(LabError::Violation(format!(
            "critic {} has a uniform edge {} without soundness violations",
            critic.critic, critic.worst_world_edge
        )));
    }
    Ok((report, vec![csv_path, json_path, manifest_path]))
}
