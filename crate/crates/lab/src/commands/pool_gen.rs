//! `pool-gen`: generate a fixed candidate-pool file for offline selector
//! ablations.

use super::{ensure_out_dir, with_pool};
use crate::error::Result;
use crate::manifest::{write_manifest, RunManifest};
use crate::scenario::Scenario;
use committee_core::pool::{generate_pool, write_pools, CandidatePool};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Generates the scenario's pool set in task-id order.
pub fn generate_pools(scenario: &Scenario, workers: Option<usize>) -> Result<Vec<CandidatePool>> {
    let (gen, count) = scenario.pool_gen_config()?;
    let suite = scenario.build_suite();
    let model = scenario.build_model()?;
    let seed = scenario.seed;
    with_pool(workers, || {
        (0..count)
            .into_par_iter()
            .map(|task| generate_pool(&suite, &model, &gen, task, seed))
            .collect()
    })
}

pub fn pool_set_id(pools: &[CandidatePool]) -> String {
    let mut bytes = Vec::new();
    write_pools(pools, &mut bytes).expect("in-memory write");
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let hash: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    hash[..12].to_string()
}

pub fn cmd_pool_gen(
    scenario: &Scenario,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    ensure_out_dir(out_dir)?;
    let pools = generate_pools(scenario, workers)?;
    let path = out_dir.join("pools.jsonl");
    let mut bytes = Vec::new();
    write_pools(&pools, &mut bytes)?;
    std::fs::write(&path, &bytes)?;

    let run_id = scenario.run_id();
    let mut manifest = RunManifest::new(run_id.clone(), scenario.hash());
    manifest.outputs.push("pools.jsonl".into());
    manifest.wall_time_ms = started.elapsed().as_millis();
    let manifest_path = write_manifest(out_dir, "pool_gen_manifest.json", &manifest)?;

    println!(
        "pool-gen {run_id}: {} pools, set id {} -> {}",
        pools.len(),
        pool_set_id(&pools),
        path.display()
    );
    Ok(vec![path, manifest_path])
}
