//! Fixed-pool offline selector laboratory.
//!
//! Candidate pools hold hidden verdicts plus cached judge and comparator
//! votes; every selector consumes the same cached pool, so solve-rate
//! differences come from the selection rule alone. Selectors take a
//! [`SelectorView`], which carries no verdicts, so verdict leakage into a
//! selector is a type error.
//!
//! Pool judges are two-sided with accuracy `beta` (yes with probability
//! `beta` on passing candidates, `1 - beta` on failing ones), unlike the
//! protocol critic, which never rejects a sound action.

use crate::error::{CoreError, Result};
use crate::estimators::{failure_decomposition, Decomposition};
use crate::protocol::{
    copeland_scores, debiased_pair, majority_vote, run_tournament, DebiasMode, PairOutcome,
    PairResults, TournamentRule,
};
use crate::role_models::{comparator_call, propose, sample_world, Candidate, LatentModel, PairVote, RoleSuite};
use crate::streams::{pair_unit, StreamRole, TrialStreams};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

/// One cached binary judgment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVote {
    pub resolves: bool,
    pub confidence: u8,
}

/// One cached pairwise ballot for an ordered presentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairBallot {
    pub winner: PairVote,
    pub confidence: u8,
}

/// The selector-visible slice of a pool: cached votes, no verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorView {
    pub k: usize,
    /// Judge votes per candidate; uniform length per pool.
    pub judge_votes: Vec<Vec<JudgeVote>>,
    /// Ballots for every ordered pair `(first, second)`.
    pub pair_votes: BTreeMap<(u32, u32), Vec<PairBallot>>,
}

impl SelectorView {
    pub fn ballots(&self, first: usize, second: usize) -> &[PairBallot] {
        self.pair_votes
            .get(&(first as u32, second as u32))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    fn yes_count(&self, idx: usize) -> u32 {
        self.judge_votes[idx].iter().filter(|v| v.resolves).count() as u32
    }

    /// Aggregated outcome of the unordered pair `(i, j)`, `i < j`.
    pub fn pair_outcome(&self, i: usize, j: usize, debias: DebiasMode) -> PairOutcome {
        let forward: Vec<PairVote> = self.ballots(i, j).iter().map(|b| b.winner).collect();
        match debias {
            DebiasMode::SingleOrder => match majority_vote(&forward) {
                PairVote::First => PairOutcome::WinFirst,
                PairVote::Second => PairOutcome::WinSecond,
                PairVote::Tie => PairOutcome::Tie,
            },
            DebiasMode::BothOrdersConservative => {
                let backward: Vec<PairVote> = self.ballots(j, i).iter().map(|b| b.winner).collect();
                debiased_pair(&forward, &backward)
            }
        }
    }

    /// Restriction to a candidate subset, indices remapped to `0..len`.
    pub fn subset(&self, indices: &[usize]) -> SelectorView {
        let judge_votes = indices.iter().map(|&i| self.judge_votes[i].clone()).collect();
        let mut pair_votes = BTreeMap::new();
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                if a == b {
                    continue;
                }
                if let Some(votes) = self.pair_votes.get(&(i as u32, j as u32)) {
                    pair_votes.insert((a as u32, b as u32), votes.clone());
                }
            }
        }
        SelectorView { k: indices.len(), judge_votes, pair_votes }
    }

    /// Restriction to vote prefixes of the given kind.
    pub fn truncate_votes(&self, kind: VoteKind, count: usize) -> SelectorView {
        let mut view = self.clone();
        match kind {
            VoteKind::Judge => {
                for votes in &mut view.judge_votes {
                    votes.truncate(count);
                }
            }
            VoteKind::Comparator => {
                for votes in view.pair_votes.values_mut() {
                    votes.truncate(count);
                }
            }
        }
        view
    }
}

/// Which cached vote kind an ablation truncates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteKind {
    Judge,
    Comparator,
}

/// A fixed candidate pool: hidden verdicts plus the selector view.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub task_id: u64,
    pub verdicts: Vec<bool>,
    pub view: SelectorView,
}

impl CandidatePool {
    pub fn oracle_solved(&self) -> bool {
        self.verdicts.iter().any(|v| *v)
    }
}

/// Pool generation parameters.
#[derive(Debug, Clone, Copy)]
pub struct PoolGenConfig {
    pub k: usize,
    pub judge_votes: u32,
    pub comparator_votes: u32,
}

/// Generates one pool: verdicts drawn through the latent model with
/// round-robin proposer families, judge votes with the two-sided judge
/// edge, and pairwise ballots with comparator edges and position bias in
/// the order shown.
pub fn generate_pool(
    suite: &RoleSuite,
    model: &LatentModel,
    gen: &PoolGenConfig,
    task_id: u64,
    seed: u64,
) -> CandidatePool {
    let streams = TrialStreams::new(seed, task_id);
    let mut world_rng = streams.stream(0, StreamRole::World, 0, 0);
    let world = sample_world(model, &mut world_rng);

    let verdicts: Vec<bool> = (0..gen.k)
        .map(|i| {
            let mut rng = streams.stream(0, StreamRole::Proposer, i as u32, 0);
            propose(&world, i % suite.portfolio, &mut rng).sound
        })
        .collect();

    let judge_votes: Vec<Vec<JudgeVote>> = (0..gen.k)
        .map(|i| {
            (0..gen.judge_votes)
                .map(|v| {
                    let mut rng = streams.stream(0, StreamRole::Critic, i as u32, v);
                    let p_yes = if verdicts[i] { suite.beta } else { 1.0 - suite.beta };
                    let resolves = rng.chance(p_yes);
                    let confidence = 1 + rng.index(5) as u8;
                    JudgeVote { resolves, confidence }
                })
                .collect()
        })
        .collect();

    let mut pair_votes = BTreeMap::new();
    for i in 0..gen.k {
        for j in 0..gen.k {
            if i == j {
                continue;
            }
            let first = Candidate { sound: verdicts[i] };
            let second = Candidate { sound: verdicts[j] };
            let ballots: Vec<PairBallot> = (0..gen.comparator_votes)
                .map(|v| {
                    let mut rng = streams.stream(0, StreamRole::Comparator, pair_unit(i, j), v);
                    let winner = comparator_call(first, second, suite, &mut rng);
                    let confidence = 1 + rng.index(5) as u8;
                    PairBallot { winner, confidence }
                })
                .collect();
            pair_votes.insert((i as u32, j as u32), ballots);
        }
    }

    CandidatePool {
        task_id,
        verdicts,
        view: SelectorView { k: gen.k, judge_votes, pair_votes },
    }
}

/// A selector's decision on one pool.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorResult {
    pub chosen: usize,
    /// Gate survivors, for gated selectors.
    pub survivors: Option<Vec<usize>>,
    /// Copeland scores aligned with `survivors` (or all candidates when
    /// no gate ran), for tournament-based selectors.
    pub scores: Option<Vec<u32>>,
    /// Set when the cached votes were insufficient to discriminate
    /// (for example zero comparator ballots).
    pub degenerate: bool,
}

impl SelectorResult {
    fn plain(chosen: usize) -> SelectorResult {
        SelectorResult { chosen, survivors: None, scores: None, degenerate: false }
    }
}

/// Argmax of positive-judgment counts, ties to the lowest index.
pub fn select_binary_majority(view: &SelectorView) -> SelectorResult {
    let mut best = 0usize;
    let mut best_count = view.yes_count(0);
    for idx in 1..view.k {
        let count = view.yes_count(idx);
        if count > best_count {
            best = idx;
            best_count = count;
        }
    }
    SelectorResult {
        degenerate: view.judge_votes.iter().all(|v| v.is_empty()),
        ..SelectorResult::plain(best)
    }
}

/// Argmax of confidence mass over positive judgments, ties to the lowest
/// index.
pub fn select_confidence_weighted(view: &SelectorView) -> SelectorResult {
    let score = |idx: usize| -> u32 {
        view.judge_votes[idx]
            .iter()
            .filter(|v| v.resolves)
            .map(|v| v.confidence as u32)
            .sum()
    };
    let mut best = 0usize;
    let mut best_score = score(0);
    for idx in 1..view.k {
        let s = score(idx);
        if s > best_score {
            best = idx;
            best_score = s;
        }
    }
    SelectorResult::plain(best)
}

fn copeland_over(view: &SelectorView, members: &[usize], debias: DebiasMode) -> (usize, Vec<u32>) {
    let n = members.len();
    let mut results = PairResults::new(n);
    for a in 0..n {
        for b in (a + 1)..n {
            results.set(a, b, view.pair_outcome(members[a], members[b], debias));
        }
    }
    let scores = copeland_scores(&results);
    let mut best = 0;
    for (idx, score) in scores.iter().enumerate() {
        if *score > scores[best] {
            best = idx;
        }
    }
    (members[best], scores)
}

/// Copeland tournament over cached pairwise votes.
pub fn select_comparator_copeland(view: &SelectorView, debias: DebiasMode) -> SelectorResult {
    let members: Vec<usize> = (0..view.k).collect();
    let (chosen, scores) = copeland_over(view, &members, debias);
    SelectorResult {
        chosen,
        survivors: None,
        scores: Some(scores),
        degenerate: view.pair_votes.values().all(|v| v.is_empty()),
    }
}

/// Hybrid gate threshold: a fraction of positive votes or an absolute
/// count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GateThreshold {
    YesRate { rate: f64 },
    YesCount { count: u32 },
}

/// Judge-gated Copeland: retain candidates passing the yes threshold,
/// fall back to the binary-majority winner when none passes, otherwise
/// run the tournament among the retained candidates only.
pub fn select_hybrid(
    view: &SelectorView,
    threshold: GateThreshold,
    debias: DebiasMode,
) -> SelectorResult {
    let retained: Vec<usize> = (0..view.k)
        .filter(|&idx| {
            let yes = view.yes_count(idx);
            match threshold {
                GateThreshold::YesRate { rate } => {
                    let votes = view.judge_votes[idx].len() as f64;
                    votes > 0.0 && yes as f64 / votes >= rate
                }
                GateThreshold::YesCount { count } => yes >= count,
            }
        })
        .collect();
    if retained.is_empty() {
        let fallback = select_binary_majority(view);
        return SelectorResult { survivors: Some(Vec::new()), ..fallback };
    }
    let (chosen, scores) = copeland_over(view, &retained, debias);
    SelectorResult { chosen, survivors: Some(retained), scores: Some(scores), degenerate: false }
}

/// Alternative tournament rules over conservatively debiased pair
/// results.
pub fn tournament_variants(view: &SelectorView, rule: TournamentRule) -> SelectorResult {
    let debias = DebiasMode::BothOrdersConservative;
    let winner = run_tournament(view.k, rule, &mut |i, j| view.pair_outcome(i, j, debias));
    SelectorResult {
        chosen: winner,
        survivors: None,
        scores: None,
        degenerate: view.pair_votes.values().all(|v| v.is_empty()),
    }
}

/// One grid point of an ablation curve: raw success tallies for the
/// selector and the verdict oracle over `total` evaluations.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AblationPoint {
    pub x: u64,
    pub successes: u64,
    pub oracle_successes: u64,
    pub total: u64,
}

/// Proposal-budget ablation: evaluates the selector on contiguous
/// wrap-around windows of each size in `k_grid`, averaged over all `k`
/// window rotations, alongside the oracle best-of-`k'` rate on the same
/// windows.
pub fn budget_ablation(
    pools: &[CandidatePool],
    selector: impl Fn(&SelectorView) -> SelectorResult,
    k_grid: &[usize],
) -> Result<Vec<AblationPoint>> {
    if k_grid.is_empty() {
        return Err(CoreError::config("budget ablation needs a nonempty k grid"));
    }
    let mut points = Vec::with_capacity(k_grid.len());
    for &k_sub in k_grid {
        let mut successes = 0u64;
        let mut oracle = 0u64;
        let mut total = 0u64;
        for pool in pools {
            let k = pool.view.k;
            if k_sub == 0 || k_sub > k {
                return Err(CoreError::config(format!(
                    "budget ablation point {k_sub} outside 1..={k}"
                )));
            }
            for rotation in 0..k {
                let window: Vec<usize> = (0..k_sub).map(|o| (rotation + o) % k).collect();
                let sub = pool.view.subset(&window);
                let result = selector(&sub);
                successes += pool.verdicts[window[result.chosen]] as u64;
                oracle += window.iter().any(|&i| pool.verdicts[i]) as u64;
                total += 1;
            }
        }
        points.push(AblationPoint { x: k_sub as u64, successes, oracle_successes: oracle, total });
    }
    Ok(points)
}

/// Vote-count ablation: recomputes the selector with vote prefixes of
/// the given kind.
pub fn vote_subset_ablation(
    pools: &[CandidatePool],
    selector: impl Fn(&SelectorView) -> SelectorResult,
    kind: VoteKind,
    vote_grid: &[usize],
) -> Result<Vec<AblationPoint>> {
    if vote_grid.is_empty() {
        return Err(CoreError::config("vote ablation needs a nonempty grid"));
    }
    let mut points = Vec::with_capacity(vote_grid.len());
    for &votes in vote_grid {
        let mut successes = 0u64;
        let mut oracle = 0u64;
        for pool in pools {
            let view = pool.view.truncate_votes(kind, votes);
            let result = selector(&view);
            successes += pool.verdicts[result.chosen] as u64;
            oracle += pool.oracle_solved() as u64;
        }
        points.push(AblationPoint {
            x: votes as u64,
            successes,
            oracle_successes: oracle,
            total: pools.len() as u64,
        });
    }
    Ok(points)
}

/// Solved / oracle-reachable-missed / oracle-unreachable partition of a
/// pool set under a selector.
pub fn decompose_pools(
    pools: &[CandidatePool],
    selector: impl Fn(&SelectorView) -> SelectorResult,
) -> Decomposition {
    failure_decomposition(pools.iter().map(|pool| {
        let result = selector(&pool.view);
        (pool.verdicts[result.chosen], pool.oracle_solved())
    }))
}

// ---------------------------------------------------------------------------
// Pool file format: a version header line, then one JSON object per task.
// Verdicts sit in their own field so the blind loading mode can skip them.
// ---------------------------------------------------------------------------

pub const POOL_FORMAT: &str = "candidate-pools";
pub const POOL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PoolHeader {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct PoolRecord {
    task_id: u64,
    k: usize,
    verdicts: Vec<bool>,
    judge_votes: Vec<Vec<JudgeVote>>,
    pair_votes: BTreeMap<String, Vec<PairBallot>>,
}

/// Selector-blind record: the verdicts field is never materialized.
#[derive(Deserialize)]
struct BlindPoolRecord {
    task_id: u64,
    k: usize,
    judge_votes: Vec<Vec<JudgeVote>>,
    pair_votes: BTreeMap<String, Vec<PairBallot>>,
}

fn pair_key(first: u32, second: u32) -> String {
    format!("{first},{second}")
}

fn parse_pair_key(key: &str) -> Result<(u32, u32)> {
    let (a, b) = key
        .split_once(',')
        .ok_or_else(|| CoreError::PoolFile(format!("bad pair key {key:?}")))?;
    let first = a.parse().map_err(|_| CoreError::PoolFile(format!("bad pair key {key:?}")))?;
    let second = b.parse().map_err(|_| CoreError::PoolFile(format!("bad pair key {key:?}")))?;
    Ok((first, second))
}

fn view_from_parts(
    k: usize,
    judge_votes: Vec<Vec<JudgeVote>>,
    pair_votes: BTreeMap<String, Vec<PairBallot>>,
) -> Result<SelectorView> {
    let mut pairs = BTreeMap::new();
    for (key, ballots) in pair_votes {
        pairs.insert(parse_pair_key(&key)?, ballots);
    }
    Ok(SelectorView { k, judge_votes, pair_votes: pairs })
}

/// Writes pools as line-delimited JSON with a version header.
pub fn write_pools(pools: &[CandidatePool], out: &mut impl Write) -> Result<()> {
    let io_err = |e: std::io::Error| CoreError::PoolFile(e.to_string());
    let header = PoolHeader { format: POOL_FORMAT.into(), version: POOL_VERSION };
    writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes"))
        .map_err(io_err)?;
    for pool in pools {
        let record = PoolRecord {
            task_id: pool.task_id,
            k: pool.view.k,
            verdicts: pool.verdicts.clone(),
            judge_votes: pool.view.judge_votes.clone(),
            pair_votes: pool
                .view
                .pair_votes
                .iter()
                .map(|((a, b), v)| (pair_key(*a, *b), v.clone()))
                .collect(),
        };
        writeln!(out, "{}", serde_json::to_string(&record).expect("record serializes"))
            .map_err(io_err)?;
    }
    Ok(())
}

fn read_header(lines: &mut impl Iterator<Item = std::io::Result<String>>) -> Result<()> {
    let line = lines
        .next()
        .ok_or_else(|| CoreError::PoolFile("empty pool file".into()))?
        .map_err(|e| CoreError::PoolFile(e.to_string()))?;
    let header: PoolHeader = serde_json::from_str(&line)
        .map_err(|e| CoreError::PoolFile(format!("bad header: {e}")))?;
    if header.format != POOL_FORMAT || header.version != POOL_VERSION {
        return Err(CoreError::PoolFile(format!(
            "unsupported pool format {}/{}",
            header.format, header.version
        )));
    }
    Ok(())
}

/// Reads a pool file, verdicts included.
pub fn read_pools(input: impl BufRead) -> Result<Vec<CandidatePool>> {
    let mut lines = input.lines();
    read_header(&mut lines)?;
    let mut pools = Vec::new();
    for line in lines {
        let line = line.map_err(|e| CoreError::PoolFile(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PoolRecord = serde_json::from_str(&line)
            .map_err(|e| CoreError::PoolFile(format!("bad pool record: {e}")))?;
        if record.verdicts.len() != record.k || record.judge_votes.len() != record.k {
            return Err(CoreError::PoolFile(format!(
                "pool {} has inconsistent candidate counts",
                record.task_id
            )));
        }
        pools.push(CandidatePool {
            task_id: record.task_id,
            verdicts: record.verdicts,
            view: view_from_parts(record.k, record.judge_votes, record.pair_votes)?,
        });
    }
    Ok(pools)
}

/// Selector-blind loading: returns views only; the verdicts field never
/// reaches selector-visible types.
pub fn read_pools_blind(input: impl BufRead) -> Result<Vec<(u64, SelectorView)>> {
    let mut lines = input.lines();
    read_header(&mut lines)?;
    let mut views = Vec::new();
    for line in lines {
        let line = line.map_err(|e| CoreError::PoolFile(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: BlindPoolRecord = serde_json::from_str(&line)
            .map_err(|e| CoreError::PoolFile(format!("bad pool record: {e}")))?;
        views.push((
            record.task_id,
            view_from_parts(record.k, record.judge_votes, record.pair_votes)?,
        ));
    }
    Ok(views)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::role_models::PointMass;
    use crate::stats::wilson99;

    fn yes(confidence: u8) -> JudgeVote {
        JudgeVote { resolves: true, confidence }
    }

    fn no(confidence: u8) -> JudgeVote {
        JudgeVote { resolves: false, confidence }
    }

    fn ballots(winner: PairVote, count: usize) -> Vec<PairBallot> {
        vec![PairBallot { winner, confidence: 3 }; count]
    }

    /// View where candidate `i`'s judge votes are `judges[i]` and each
    /// ordered pair's ballots are looked up from the table.
    fn view(judges: Vec<Vec<JudgeVote>>, pairs: Vec<((u32, u32), Vec<PairBallot>)>) -> SelectorView {
        SelectorView { k: judges.len(), judge_votes: judges, pair_votes: pairs.into_iter().collect() }
    }

    fn gen_config() -> PoolGenConfig {
        PoolGenConfig { k: 8, judge_votes: 5, comparator_votes: 5 }
    }

    #[test]
    fn generated_verdicts_follow_latent_model() {
        let suite = RoleSuite { portfolio: 1, beta: 1.0, sigma: 0.5, ..RoleSuite::default() };
        let certain = LatentModel::PointMass { masses: vec![PointMass { q: 1.0, weight: 1.0 }] };
        let pool = generate_pool(&suite, &certain, &gen_config(), 0, 1);
        assert!(pool.verdicts.iter().all(|v| *v));

        // beta = 1 judges: yes votes track verdicts exactly.
        let half = LatentModel::PointMass { masses: vec![PointMass { q: 0.5, weight: 1.0 }] };
        for task in 0..50 {
            let pool = generate_pool(&suite, &half, &gen_config(), task, 2);
            for (idx, verdict) in pool.verdicts.iter().enumerate() {
                assert!(pool.view.judge_votes[idx].iter().all(|v| v.resolves == *verdict));
            }
        }

        // Mean verdict-true count is k * q.
        let pools = 10_000u64;
        let mut total = 0u64;
        for task in 0..pools {
            let pool = generate_pool(&suite, &half, &gen_config(), task, 3);
            total += pool.verdicts.iter().filter(|v| **v).count() as u64;
        }
        let (lo, hi) = wilson99(total, pools * 8);
        assert!(lo <= 0.5 && 0.5 <= hi, "verdict rate CI [{lo}, {hi}]");
    }

    #[test]
    fn binary_majority_cases() {
        let v = view(
            vec![
                vec![yes(1), yes(1), yes(1), no(1), no(1)],
                vec![yes(1); 5],
                vec![yes(1), no(1), no(1), no(1), no(1)],
            ],
            vec![],
        );
        assert_eq!(select_binary_majority(&v).chosen, 1);

        let tied = view(vec![vec![yes(1), yes(1)], vec![yes(1), yes(1)]], vec![]);
        assert_eq!(select_binary_majority(&tied).chosen, 0);

        let zeros = view(vec![vec![no(1)], vec![no(1)], vec![no(1)]], vec![]);
        assert_eq!(select_binary_majority(&zeros).chosen, 0);
    }

    #[test]
    fn confidence_weighted_cases() {
        // A's single confident yes (5) outweighs B's two at 2 + 2.
        let v = view(vec![vec![yes(5), no(2)], vec![yes(2), yes(2)]], vec![]);
        assert_eq!(select_confidence_weighted(&v).chosen, 0);

        let none = view(vec![vec![no(5)], vec![no(5)]], vec![]);
        assert_eq!(select_confidence_weighted(&none).chosen, 0);

        let equal = view(vec![vec![yes(2), yes(2)], vec![yes(4), no(1)]], vec![]);
        assert_eq!(select_confidence_weighted(&equal).chosen, 0);
    }

    #[test]
    fn comparator_copeland_cases() {
        use PairVote::*;
        // Candidate 1 wins both orders against everyone.
        let v = view(
            vec![vec![], vec![], vec![]],
            vec![
                ((0, 1), ballots(Second, 3)),
                ((1, 0), ballots(First, 3)),
                ((0, 2), ballots(First, 3)),
                ((2, 0), ballots(Second, 3)),
                ((1, 2), ballots(First, 3)),
                ((2, 1), ballots(Second, 3)),
            ],
        );
        let result = select_comparator_copeland(&v, DebiasMode::BothOrdersConservative);
        assert_eq!(result.chosen, 1);
        // Hand-computed scores: 0 beats 2, loses to 1; 1 beats both; 2 none.
        assert_eq!(result.scores, Some(vec![1, 2, 0]));

        // Every pair disagrees across orders: all ties, lowest index.
        let v = view(
            vec![vec![], vec![], vec![]],
            vec![
                ((0, 1), ballots(First, 3)),
                ((1, 0), ballots(First, 3)),
                ((0, 2), ballots(First, 3)),
                ((2, 0), ballots(First, 3)),
                ((1, 2), ballots(First, 3)),
                ((2, 1), ballots(First, 3)),
            ],
        );
        let result = select_comparator_copeland(&v, DebiasMode::BothOrdersConservative);
        assert_eq!(result.chosen, 0);
        assert_eq!(result.scores, Some(vec![0, 0, 0]));
    }

    #[test]
    fn hybrid_gate_cases() {
        use PairVote::*;
        let judges = vec![
            vec![yes(3), no(3), no(3), no(3), no(3)], // rate 0.2
            vec![yes(3), yes(3), yes(3), yes(3), no(3)], // rate 0.8
            vec![yes(3), yes(3), yes(3), no(3), no(3)], // rate 0.6
        ];
        // Candidate 2 beats candidate 1 in both orders.
        let pairs = vec![
            ((1u32, 2u32), ballots(Second, 3)),
            ((2u32, 1u32), ballots(First, 3)),
            ((0u32, 1u32), ballots(First, 3)),
            ((1u32, 0u32), ballots(Second, 3)),
            ((0u32, 2u32), ballots(First, 3)),
            ((2u32, 0u32), ballots(Second, 3)),
        ];
        let v = view(judges, pairs);
        let result = select_hybrid(
            &v,
            GateThreshold::YesRate { rate: 0.5 },
            DebiasMode::BothOrdersConservative,
        );
        assert_eq!(result.survivors, Some(vec![1, 2]));
        assert_eq!(result.chosen, 2);

        // Nothing passes the gate: binary-majority fallback.
        let result = select_hybrid(
            &v,
            GateThreshold::YesRate { rate: 0.9 },
            DebiasMode::BothOrdersConservative,
        );
        assert_eq!(result.survivors, Some(vec![]));
        assert_eq!(result.chosen, 1); // highest yes count

        // Vacuous gate: identical to comparator-only Copeland.
        let gated = select_hybrid(
            &v,
            GateThreshold::YesCount { count: 0 },
            DebiasMode::BothOrdersConservative,
        );
        let plain = select_comparator_copeland(&v, DebiasMode::BothOrdersConservative);
        assert_eq!(gated.chosen, plain.chosen);
    }

    #[test]
    fn tournament_variants_on_two_candidates_reduce_to_the_pair() {
        use PairVote::*;
        let v = view(
            vec![vec![], vec![]],
            vec![((0, 1), ballots(Second, 3)), ((1, 0), ballots(First, 3))],
        );
        for rule in [
            TournamentRule::Copeland,
            TournamentRule::SequentialKing,
            TournamentRule::StrictDominance,
            TournamentRule::SingleElim,
        ] {
            assert_eq!(tournament_variants(&v, rule).chosen, 1, "{rule:?}");
        }
    }

    fn calibrated_pools(n: u64) -> Vec<CandidatePool> {
        let suite = RoleSuite { portfolio: 1, beta: 0.7, sigma: 0.35, ..RoleSuite::default() };
        let model = LatentModel::PointMass {
            masses: vec![PointMass { q: 0.0, weight: 0.2 }, PointMass { q: 0.55, weight: 0.8 }],
        };
        (0..n).map(|task| generate_pool(&suite, &model, &gen_config(), task, 101)).collect()
    }

    #[test]
    fn oracle_dominance_is_exact() {
        let pools = calibrated_pools(500);
        let oracle: u64 = pools.iter().map(|p| p.oracle_solved() as u64).sum();
        for selector in [
            |v: &SelectorView| select_binary_majority(v),
            |v: &SelectorView| select_comparator_copeland(v, DebiasMode::BothOrdersConservative),
            |v: &SelectorView| {
                select_hybrid(
                    v,
                    GateThreshold::YesRate { rate: 0.5 },
                    DebiasMode::BothOrdersConservative,
                )
            },
        ] {
            let solved: u64 =
                pools.iter().map(|p| p.verdicts[selector(&p.view).chosen] as u64).sum();
            assert!(solved <= oracle);
        }
    }

    #[test]
    fn perfect_signals_recover_the_oracle_exactly() {
        let suite = RoleSuite { portfolio: 1, beta: 1.0, sigma: 0.5, ..RoleSuite::default() };
        let model = LatentModel::PointMass {
            masses: vec![PointMass { q: 0.0, weight: 0.3 }, PointMass { q: 0.4, weight: 0.7 }],
        };
        let pools: Vec<CandidatePool> =
            (0..500).map(|task| generate_pool(&suite, &model, &gen_config(), task, 7)).collect();
        for pool in &pools {
            if !pool.oracle_solved() {
                continue;
            }
            let copeland =
                select_comparator_copeland(&pool.view, DebiasMode::BothOrdersConservative);
            assert!(pool.verdicts[copeland.chosen], "comparator missed on {}", pool.task_id);
            let hybrid = select_hybrid(
                &pool.view,
                GateThreshold::YesRate { rate: 0.5 },
                DebiasMode::BothOrdersConservative,
            );
            assert!(pool.verdicts[hybrid.chosen], "hybrid missed on {}", pool.task_id);
            // With perfect judges the count selectors also match the
            // oracle: passing candidates take every yes vote.
            assert!(pool.verdicts[select_binary_majority(&pool.view).chosen]);
            assert!(pool.verdicts[select_confidence_weighted(&pool.view).chosen]);
        }
    }

    #[test]
    fn budget_ablation_endpoints() {
        let pools = calibrated_pools(300);
        let points = budget_ablation(
            &pools,
            |v| select_comparator_copeland(v, DebiasMode::BothOrdersConservative),
            &[1, 2, 4, 8],
        )
        .unwrap();

        // k' = 1: selector rate equals the single-candidate rate p1.
        let verdict_total: u64 = pools
            .iter()
            .map(|p| p.verdicts.iter().filter(|v| **v).count() as u64)
            .sum();
        assert_eq!(points[0].successes, verdict_total);
        assert_eq!(points[0].oracle_successes, verdict_total);

        // Oracle curve nondecreasing in k' (as rates over equal totals).
        for w in points.windows(2) {
            assert!(
                w[0].oracle_successes * w[1].total <= w[1].oracle_successes * w[0].total,
                "oracle rate decreased"
            );
        }

        // k' = k: every rotation sees the full pool, so the rate matches
        // the unablated selector.
        let full: u64 = pools
            .iter()
            .map(|p| {
                let r = select_comparator_copeland(&p.view, DebiasMode::BothOrdersConservative);
                p.verdicts[r.chosen] as u64
            })
            .sum();
        assert_eq!(points[3].successes, full * 8);

        assert!(budget_ablation(&pools, select_binary_majority, &[9]).is_err());
        assert!(budget_ablation(&pools, select_binary_majority, &[]).is_err());
    }

    #[test]
    fn vote_subset_ablation_cases() {
        let pools = calibrated_pools(400);

        // Zero comparator votes: degenerate, index 0.
        for pool in pools.iter().take(20) {
            let truncated = pool.view.truncate_votes(VoteKind::Comparator, 0);
            let result =
                select_comparator_copeland(&truncated, DebiasMode::BothOrdersConservative);
            assert_eq!(result.chosen, 0);
            assert!(result.degenerate);
        }

        // Full counts reproduce the unablated run.
        let full = vote_subset_ablation(&pools, select_binary_majority, VoteKind::Judge, &[5])
            .unwrap();
        let direct: u64 = pools
            .iter()
            .map(|p| p.verdicts[select_binary_majority(&p.view).chosen] as u64)
            .sum();
        assert_eq!(full[0].successes, direct);

        // More judge votes do not hurt (within CI).
        let sweep =
            vote_subset_ablation(&pools, select_binary_majority, VoteKind::Judge, &[1, 5])
                .unwrap();
        let one = sweep[0].successes as f64 / sweep[0].total as f64;
        let five = sweep[1].successes as f64 / sweep[1].total as f64;
        let half = crate::stats::wilson99_half_width(sweep[0].successes, sweep[0].total);
        assert!(five >= one - 2.0 * half, "5-vote rate {five} below 1-vote rate {one}");
    }

    #[test]
    fn pools_are_byte_stable_across_reruns() {
        let a = calibrated_pools(50);
        let b = calibrated_pools(50);
        let mut bytes_a = Vec::new();
        let mut bytes_b = Vec::new();
        write_pools(&a, &mut bytes_a).unwrap();
        write_pools(&b, &mut bytes_b).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn pool_file_round_trip_and_blind_mode() {
        let pools = calibrated_pools(20);
        let mut bytes = Vec::new();
        write_pools(&pools, &mut bytes).unwrap();

        let loaded = read_pools(bytes.as_slice()).unwrap();
        assert_eq!(loaded, pools);

        let blind = read_pools_blind(bytes.as_slice()).unwrap();
        assert_eq!(blind.len(), pools.len());
        for ((task_id, view), pool) in blind.iter().zip(&pools) {
            assert_eq!(*task_id, pool.task_id);
            assert_eq!(*view, pool.view);
        }

        assert!(read_pools(b"not a header\n".as_slice()).is_err());
        assert!(read_pools(b"".as_slice()).is_err());
    }

    #[test]
    fn decomposition_covers_all_pools() {
        let pools = calibrated_pools(300);
        let d = decompose_pools(&pools, |v| {
            select_hybrid(v, GateThreshold::YesRate { rate: 0.5 }, DebiasMode::BothOrdersConservative)
        });
        assert_eq!(d.total(), 300);
    }
}
