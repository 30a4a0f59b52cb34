//! `curves`: oracle best-of-k, implemented-system success, single-call
//! baseline, and oracle-gap recovery over a k grid.

use super::{ensure_out_dir, with_pool};
use crate::csvfmt::{fmt6, fmt6_opt, write_csv};
use crate::error::{LabError, Result};
use crate::manifest::{write_manifest, RunManifest};
use crate::scenario::Scenario;
use committee_core::bounds::recovery;
use committee_core::estimators::{mc_err, mc_oracle_curve, Estimate};
use committee_core::protocol::ProtocolConfig;
use std::path::{Path, PathBuf};
use std::time::Instant;

const HEADER: &[&str] = &[
    "run_id", "seed", "trials", "k", "p1", "p_oracle", "p_oracle_lo", "p_oracle_hi", "p_system",
    "p_system_lo", "p_system_hi", "recovery",
];

/// One curve grid point.
#[derive(Debug, Clone)]
pub struct CurveRow {
    pub k: u64,
    pub p1: f64,
    pub p_oracle: Estimate,
    pub p_system: Estimate,
    /// `None` when the oracle gap is not positive.
    pub recovery: Option<f64>,
}

pub fn compute_curves(scenario: &Scenario, workers: Option<usize>) -> Result<Vec<CurveRow>> {
    let grid = scenario
        .k_grid
        .clone()
        .ok_or_else(|| LabError::config("curves needs a k_grid in the scenario"))?;
    if grid.is_empty() {
        return Err(LabError::config("k_grid must be nonempty"));
    }
    let system = scenario.build_system()?;
    let suite = scenario.build_suite();
    let base_config = scenario.build_protocol()?;
    let model = scenario.build_model()?;
    let (trials, seed) = (scenario.trials, scenario.seed);

    // Oracle curve over the grid plus k = 1 for the baseline; coupled
    // prefix sampling shares streams with the protocol's first step.
    let mut oracle_grid = grid.clone();
    if !oracle_grid.contains(&1) {
        oracle_grid.insert(0, 1);
    }
    let curve = with_pool(workers, || {
        mc_oracle_curve(&model, suite.portfolio, &oracle_grid, trials, seed)
    })??;
    let p1 = curve
        .points
        .iter()
        .find(|p| p.k == 1)
        .expect("grid includes 1")
        .estimate
        .point;

    let mut rows = Vec::with_capacity(grid.len());
    for &k in &grid {
        let config = ProtocolConfig { k: k as usize, ..base_config };
        config.validate()?;
        let summary =
            with_pool(workers, || mc_err(&system, &config, &suite, &model, trials, seed))?;
        let p_oracle = curve
            .points
            .iter()
            .find(|p| p.k == k)
            .expect("grid point present")
            .estimate;
        let rec = recovery(p1, p_oracle.point, summary.success.point).ok();
        rows.push(CurveRow { k, p1, p_oracle, p_system: summary.success, recovery: rec });
    }
    Ok(rows)
}

pub fn cmd_curves(
    scenario: &Scenario,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    ensure_out_dir(out_dir)?;
    let rows = compute_curves(scenario, workers)?;
    let run_id = scenario.run_id();
    let (trials, seed) = (scenario.trials, scenario.seed);

    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            vec![
                run_id.clone(),
                seed.to_string(),
                trials.to_string(),
                row.k.to_string(),
                fmt6(row.p1),
                fmt6(row.p_oracle.point),
                fmt6(row.p_oracle.lo),
                fmt6(row.p_oracle.hi),
                fmt6(row.p_system.point),
                fmt6(row.p_system.lo),
                fmt6(row.p_system.hi),
                fmt6_opt(row.recovery),
            ]
        })
        .collect();
    let csv_path = out_dir.join("curves.csv");
    write_csv(&csv_path, HEADER, &csv_rows)?;

    let mut manifest = RunManifest::new(run_id.clone(), scenario.hash());
    manifest.outputs.push("curves.csv".into());
    manifest.wall_time_ms = started.elapsed().as_millis();
    let manifest_path = write_manifest(out_dir, "curves_manifest.json", &manifest)?;

    println!("curves {run_id}: {} grid points", csv_rows.len());
    Ok(vec![csv_path, manifest_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(beta: f64, sigma: f64, masses: &str) -> Scenario {
        serde_json::from_str(&format!(
            r#"{{
                "name": "curves-test",
                "task": {{ "depth": 1, "arity": 3, "sound_count": 1 }},
                "latent": {{ "kind": "point_mass", "masses": {masses} }},
                "roles": {{ "portfolio": 1, "beta": {beta}, "sigma": {sigma} }},
                "protocol": {{ "k": 4, "m": 1, "r": 1 }},
                "k_grid": [1, 2, 4, 8, 16],
                "trials": 20000,
                "seed": 21
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn perfect_identification_matches_oracle_exactly() {
        // With a certain critic and maximal comparator edge on a depth-1
        // task, the protocol succeeds exactly when a sound candidate was
        // proposed; shared streams make the two estimates identical.
        let s = scenario(1.0, 0.5, r#"[ { "q": 0.0, "weight": 0.4 }, { "q": 0.35, "weight": 0.6 } ]"#);
        let rows = compute_curves(&s, None).unwrap();
        for row in &rows {
            assert_eq!(
                row.p_system.hits, row.p_oracle.hits,
                "k={}: system and oracle tallies differ",
                row.k
            );
        }
    }

    #[test]
    fn recovery_is_null_at_k_one_and_oracle_plateaus() {
        let s = scenario(0.8, 0.3, r#"[ { "q": 0.0, "weight": 0.3 }, { "q": 0.5, "weight": 0.7 } ]"#);
        let rows = compute_curves(&s, None).unwrap();
        assert_eq!(rows[0].k, 1);
        assert!(rows[0].recovery.is_none(), "zero denominator must yield a null recovery");
        let last = rows.last().unwrap();
        assert!(
            (last.p_oracle.point - 0.7).abs() <= 2.0 * last.p_oracle.half_width() + 0.01,
            "oracle plateau {}",
            last.p_oracle.point
        );
        for row in &rows {
            if let Some(rec) = row.recovery {
                assert!((-0.1..=1.1).contains(&rec));
            }
        }
    }

    #[test]
    fn missing_k_grid_is_a_config_error() {
        let mut s = scenario(0.8, 0.3, r#"[ { "q": 0.5, "weight": 1.0 } ]"#);
        s.k_grid = None;
        let err = compute_curves(&s, None).unwrap_err();
        assert!(err.to_string().contains("k_grid"));
    }
}
