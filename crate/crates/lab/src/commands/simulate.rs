//! `simulate`: run the protocol on one scenario and emit the failure
//! estimate, event-rate breakdown, and role-call totals.

use super::{ensure_out_dir, with_pool};
use crate::csvfmt::{fmt6, write_csv};
use crate::error::Result;
use crate::manifest::{write_manifest, RunManifest};
use crate::scenario::Scenario;
use committee_core::estimators::{mc_err, Estimate};
use std::path::{Path, PathBuf};
use std::time::Instant;

const HEADER: &[&str] = &["run_id", "seed", "trials", "metric", "value", "ci_lo", "ci_hi"];

pub fn cmd_simulate(
    scenario: &Scenario,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    ensure_out_dir(out_dir)?;
    let system = scenario.build_system()?;
    let suite = scenario.build_suite();
    let config = scenario.build_protocol()?;
    let model = scenario.build_model()?;
    let (trials, seed) = (scenario.trials, scenario.seed);

    let summary =
        with_pool(workers, || mc_err(&system, &config, &suite, &model, trials, seed))?;

    let run_id = scenario.run_id();
    let estimate_row = |e: &Estimate| -> Vec<String> {
        vec![
            run_id.clone(),
            seed.to_string(),
            trials.to_string(),
            e.metric.to_string(),
            fmt6(e.point),
            fmt6(e.lo),
            fmt6(e.hi),
        ]
    };
    let count_row = |name: &str, value: u64| -> Vec<String> {
        vec![
            run_id.clone(),
            seed.to_string(),
            trials.to_string(),
            name.to_string(),
            value.to_string(),
            String::new(),
            String::new(),
        ]
    };
    let rows = vec![
        estimate_row(&summary.err),
        estimate_row(&summary.success),
        estimate_row(&summary.prop_miss),
        estimate_row(&summary.id_miss),
        estimate_row(&summary.local_failure),
        estimate_row(&summary.eps_loc),
        count_row("calls_proposer", summary.calls.proposer),
        count_row("calls_critic", summary.calls.critic),
        count_row("calls_comparator", summary.calls.comparator),
    ];

    let csv_path = out_dir.join("simulate.csv");
    write_csv(&csv_path, HEADER, &rows)?;

    let mut manifest = RunManifest::new(run_id.clone(), scenario.hash());
    manifest.outputs.push("simulate.csv".into());
    manifest.wall_time_ms = started.elapsed().as_millis();
    let manifest_path = write_manifest(out_dir, "simulate_manifest.json", &manifest)?;

    println!(
        "simulate {run_id}: err {} [{}, {}] over {trials} trials",
        fmt6(summary.err.point),
        fmt6(summary.err.lo),
        fmt6(summary.err.hi)
    );
    Ok(vec![csv_path, manifest_path])
}
