//! `ablate`: the fixed-pool selector table, critic-threshold sweep,
//! tournament-rule comparison, budget and vote-count curves, and the
//! failure decomposition, all over one cached pool set.

use super::{ensure_out_dir, with_pool};
use crate::csvfmt::{fmt6, write_csv};
use crate::error::{LabError, Result};
use crate::manifest::{write_manifest, RunManifest};
use crate::scenario::{hybrid_gate_threshold, Scenario};
use committee_core::pool::{
    budget_ablation, decompose_pools, read_pools, select_binary_majority,
    select_comparator_copeland, select_confidence_weighted, select_hybrid, tournament_variants,
    vote_subset_ablation, CandidatePool, GateThreshold, SelectorResult, SelectorView, VoteKind,
};
use committee_core::protocol::{DebiasMode, TournamentRule};
use committee_core::stats::wilson99;
use rayon::prelude::*;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

const DEBIAS: DebiasMode = DebiasMode::BothOrdersConservative;

const ABLATION_HEADER: &[&str] = &[
    "selector", "k_or_votes", "solve_rate", "ci_lo", "ci_hi", "pools", "seed", "run_id",
    "pool_set_id",
];

/// The standing selector table.
pub fn selector_catalog(gate: GateThreshold) -> Vec<(String, SelectorFn)> {
    vec![
        ("binary_majority".into(), Box::new(select_binary_majority)),
        ("confidence_weighted".into(), Box::new(select_confidence_weighted)),
        ("comparator_copeland".into(), Box::new(|v| select_comparator_copeland(v, DEBIAS))),
        ("hybrid".into(), Box::new(move |v| select_hybrid(v, gate, DEBIAS))),
    ]
}

pub type SelectorFn = Box<dyn Fn(&SelectorView) -> SelectorResult + Sync>;

/// Solve tally of a selector over a pool set.
pub fn solves(pools: &[CandidatePool], selector: &(impl Fn(&SelectorView) -> SelectorResult + Sync)) -> u64 {
    pools
        .par_iter()
        .map(|pool| pool.verdicts[selector(&pool.view).chosen] as u64)
        .sum()
}

pub fn load_pools(path: &Path) -> Result<Vec<CandidatePool>> {
    if !path.exists() {
        return Err(LabError::config(format!(
            "pool file {} not found; generate one with `committee-lab pool-gen --scenario <file> --out <dir>`",
            path.display()
        )));
    }
    let file = std::fs::File::open(path)?;
    Ok(read_pools(BufReader::new(file))?)
}

pub fn cmd_ablate(
    scenario: &Scenario,
    pools_path: Option<&Path>,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    ensure_out_dir(out_dir)?;
    let pools = match pools_path {
        Some(path) => load_pools(path)?,
        None => super::pool_gen::generate_pools(scenario, workers)?,
    };
    if pools.is_empty() {
        return Err(LabError::config("pool set is empty"));
    }
    let pool_set = super::pool_gen::pool_set_id(&pools);
    let run_id = scenario.run_id();
    let seed = scenario.seed;
    let n = pools.len() as u64;
    let k = pools[0].view.k;
    let judge_votes = pools[0].view.judge_votes.first().map(Vec::len).unwrap_or(0);
    let comparator_votes = pools[0].view.ballots(0, 1).len();
    let gate = scenario
        .pools
        .as_ref()
        .and_then(|p| p.hybrid_gate.as_ref())
        .map(hybrid_gate_threshold)
        .transpose()?
        .unwrap_or(GateThreshold::YesRate { rate: 0.5 });

    let tag = |selector: &str, x: u64, hits: u64, total: u64| -> Vec<String> {
        let (lo, hi) = wilson99(hits, total);
        vec![
            selector.to_string(),
            x.to_string(),
            fmt6(hits as f64 / total as f64),
            fmt6(lo),
            fmt6(hi),
            n.to_string(),
            seed.to_string(),
            run_id.clone(),
            pool_set.clone(),
        ]
    };

    let oracle_hits: u64 = pools.iter().map(|p| p.oracle_solved() as u64).sum();
    let mut outputs = Vec::new();

    // Selector table.
    let mut rows = Vec::new();
    let catalog = selector_catalog(gate);
    for (name, selector) in &catalog {
        let hits = with_pool(workers, || solves(&pools, selector))?;
        if hits > oracle_hits {
            return Err(LabError::Violation(format!(
                "selector {name} beat the verdict oracle: {hits} > {oracle_hits}"
            )));
        }
        rows.push(tag(name, k as u64, hits, n));
    }
    rows.push(tag("oracle_best_of_k", k as u64, oracle_hits, n));
    let selectors_csv = out_dir.join("selectors.csv");
    write_csv(&selectors_csv, ABLATION_HEADER, &rows)?;
    outputs.push(selectors_csv);

    // Critic-threshold sweep: integer yes-count gates plus the default
    // yes-rate gate.
    let mut rows = Vec::new();
    for tau in 0..=judge_votes as u32 {
        let hits = with_pool(workers, || {
            solves(&pools, &|v: &SelectorView| {
                select_hybrid(v, GateThreshold::YesCount { count: tau }, DEBIAS)
            })
        })?;
        rows.push(tag(&format!("hybrid_tau_ge_{tau}"), tau as u64, hits, n));
    }
    let hits = with_pool(workers, || {
        solves(&pools, &|v: &SelectorView| {
            select_hybrid(v, GateThreshold::YesRate { rate: 0.5 }, DEBIAS)
        })
    })?;
    rows.push(tag("hybrid_rate_0.5", 0, hits, n));
    let thresholds_csv = out_dir.join("thresholds.csv");
    write_csv(&thresholds_csv, ABLATION_HEADER, &rows)?;
    outputs.push(thresholds_csv);

    // Tournament rules.
    let mut rows = Vec::new();
    for (name, rule) in [
        ("copeland", TournamentRule::Copeland),
        ("sequential_king", TournamentRule::SequentialKing),
        ("strict_dominance", TournamentRule::StrictDominance),
        ("single_elim", TournamentRule::SingleElim),
    ] {
        let hits =
            with_pool(workers, || solves(&pools, &|v: &SelectorView| tournament_variants(v, rule)))?;
        rows.push(tag(name, k as u64, hits, n));
    }
    let tournaments_csv = out_dir.join("tournaments.csv");
    write_csv(&tournaments_csv, ABLATION_HEADER, &rows)?;
    outputs.push(tournaments_csv);

    // Proposal-budget curves (prefix windows averaged over rotations);
    // the oracle column comes from the same windows.
    let budget_grid = scenario
        .pools
        .as_ref()
        .and_then(|p| p.budget_grid.clone())
        .unwrap_or_else(|| default_budget_grid(k));
    let mut rows = Vec::new();
    let mut oracle_points = None;
    for (name, selector) in &catalog {
        let points = with_pool(workers, || budget_ablation(&pools, selector, &budget_grid))??;
        for point in &points {
            rows.push(tag(name, point.x, point.successes, point.total));
        }
        oracle_points.get_or_insert(points);
    }
    for point in oracle_points.iter().flatten() {
        rows.push(tag("oracle_best_of_k", point.x, point.oracle_successes, point.total));
    }
    let budget_csv = out_dir.join("budget.csv");
    write_csv(&budget_csv, ABLATION_HEADER, &rows)?;
    outputs.push(budget_csv);

    // Vote-count curves: judge votes for judge-backed selectors,
    // comparator ballots for tournament-backed ones.
    let by_name = |name: &str| -> &SelectorFn {
        &catalog.iter().find(|(n, _)| n == name).expect("catalog entry").1
    };
    let mut rows = Vec::new();
    let judge_grid = scenario
        .pools
        .as_ref()
        .and_then(|p| p.vote_grid.clone())
        .unwrap_or_else(|| (1..=judge_votes).collect());
    for name in ["binary_majority", "hybrid"] {
        let selector = by_name(name);
        let points = with_pool(workers, || {
            vote_subset_ablation(&pools, selector, VoteKind::Judge, &judge_grid)
        })??;
        for point in &points {
            rows.push(tag(&format!("{name}_judge_votes"), point.x, point.successes, point.total));
        }
    }
    let comparator_grid = scenario
        .pools
        .as_ref()
        .and_then(|p| p.vote_grid.clone())
        .unwrap_or_else(|| (0..=comparator_votes).collect());
    for name in ["comparator_copeland", "hybrid"] {
        let selector = by_name(name);
        let points = with_pool(workers, || {
            vote_subset_ablation(&pools, selector, VoteKind::Comparator, &comparator_grid)
        })??;
        for point in &points {
            rows.push(tag(
                &format!("{name}_comparator_votes"),
                point.x,
                point.successes,
                point.total,
            ));
        }
    }
    let votes_csv = out_dir.join("votes.csv");
    write_csv(&votes_csv, ABLATION_HEADER, &rows)?;
    outputs.push(votes_csv);

    // Failure decomposition per selector.
    let mut rows = Vec::new();
    for (name, selector) in &catalog {
        let d = with_pool(workers, || decompose_pools(&pools, selector))?;
        debug_assert_eq!(d.total(), n);
        for (category, count) in [
            ("solved", d.solved),
            ("oracle_reachable_missed", d.oracle_reachable_missed),
            ("oracle_unreachable", d.oracle_unreachable),
        ] {
            rows.push(vec![
                name.clone(),
                category.to_string(),
                count.to_string(),
                fmt6(count as f64 / n as f64),
                n.to_string(),
                seed.to_string(),
                run_id.clone(),
                pool_set.clone(),
            ]);
        }
    }
    let decomposition_csv = out_dir.join("decomposition.csv");
    write_csv(
        &decomposition_csv,
        &["selector", "category", "count", "fraction", "pools", "seed", "run_id", "pool_set_id"],
        &rows,
    )?;
    outputs.push(decomposition_csv);

    let mut manifest = RunManifest::new(run_id.clone(), scenario.hash());
    manifest.outputs = outputs
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    manifest.wall_time_ms = started.elapsed().as_millis();
    let manifest_path = write_manifest(out_dir, "ablate_manifest.json", &manifest)?;
    outputs.push(manifest_path);

    println!("ablate {run_id}: pool set {pool_set}, {n} pools, oracle rate {}", fmt6(oracle_hits as f64 / n as f64));
    Ok(outputs)
}

fn default_budget_grid(k: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut x = 1;
    while x < k {
        grid.push(x);
        x *= 2;
    }
    grid.push(k);
    grid
}
