//! Exact success probability for chain tasks by full enumeration.
//!
//! Per step, this enumerates the joint distribution over candidate tag
//! vectors, gate outcomes, and Copeland tournament winners, then chains
//! the per-step clean probability across the depth and mixes over the
//! latent variable. It shares no code with the sampling path in
//! `protocol`; it is the oracle that path is checked against.

use crate::error::{CoreError, Result};
use crate::protocol::{DebiasMode, GateMode, ProtocolConfig, TournamentRule};
use crate::role_models::{LatentModel, RoleSuite, WorldRates};
use crate::state_system::StateSystem;
use std::collections::HashMap;

/// Enumeration limits: beyond these the state space is too large for
/// exact evaluation.
pub const MAX_K: usize = 6;
pub const MAX_M: u32 = 3;
pub const MAX_R: u32 = 3;

/// Per-vote comparator law `(first, second, tie)` for an ordered
/// presentation, derived from the suite parameters.
fn vote_law(first_sound: bool, second_sound: bool, suite: &RoleSuite) -> (f64, f64, f64) {
    if suite.verifier_backed {
        // Enumerate the four verifier verdict combinations.
        let rej_first = if first_sound { 0.0 } else { 1.0 - suite.nu };
        let rej_second = if second_sound { 0.0 } else { 1.0 - suite.nu };
        let mut p_first = 0.0;
        let mut p_second = 0.0;
        for (first_rejected, pf) in [(true, rej_first), (false, 1.0 - rej_first)] {
            for (second_rejected, ps) in [(true, rej_second), (false, 1.0 - rej_second)] {
                let pr = pf * ps;
                match (first_rejected, second_rejected) {
                    (false, true) => p_first += pr,
                    (true, false) => p_second += pr,
                    _ => {
                        p_first += pr / 2.0;
                        p_second += pr / 2.0;
                    }
                }
            }
        }
        (p_first, p_second, 0.0)
    } else {
        let base = match (first_sound, second_sound) {
            (true, false) => 0.5 + suite.sigma,
            (false, true) => 0.5 - suite.sigma,
            _ => 0.5,
        };
        let live = 1.0 - suite.tie_prob;
        let p_first = (base * live + suite.position_bias).clamp(0.0, live);
        (p_first, live - p_first, suite.tie_prob)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Distribution of the strict-majority outcome of `r` votes with the
/// given per-vote law: `(first, second, tie)`.
fn majority_law(per_vote: (f64, f64, f64), r: u32) -> (f64, f64, f64) {
    let (pf, ps, pt) = per_vote;
    let (mut first, mut second, mut tie) = (0.0, 0.0, 0.0);
    for f in 0..=r {
        for s in 0..=(r - f) {
            let t = r - f - s;
            let coeff = binomial(r, f) * binomial(r - f, s);
            let pr = coeff * pf.powi(f as i32) * ps.powi(s as i32) * pt.powi(t as i32);
            match f.cmp(&s) {
                std::cmp::Ordering::Greater => first += pr,
                std::cmp::Ordering::Less => second += pr,
                std::cmp::Ordering::Equal => tie += pr,
            }
        }
    }
    (first, second, tie)
}

/// Unordered pair law `(win_i, win_j, tie)` for survivors with the given
/// tags, under the configured debias mode.
fn pair_law(sound_i: bool, sound_j: bool, suite: &RoleSuite, config: &ProtocolConfig) -> (f64, f64, f64) {
    let order1 = majority_law(vote_law(sound_i, sound_j, suite), config.r);
    match config.debias {
        DebiasMode::SingleOrder => order1,
        DebiasMode::BothOrdersConservative => {
            // In the swapped order, "first" is candidate j.
            let order2 = majority_law(vote_law(sound_j, sound_i, suite), config.r);
            let win_i = order1.0 * order2.1;
            let win_j = order1.1 * order2.0;
            (win_i, win_j, 1.0 - win_i - win_j)
        }
    }
}

fn pack_tags(tags: &[bool]) -> u32 {
    let mut key = 1u32; // length marker
    for &t in tags {
        key = (key << 1) | t as u32;
    }
    key
}

/// Probability that the Copeland winner (lowest-index tie-break) of the
/// survivor list with these tags is sound. Dynamic program over pair
/// outcomes with packed score vectors.
fn copeland_sound_win_prob(
    tags: &[bool],
    suite: &RoleSuite,
    config: &ProtocolConfig,
    memo: &mut HashMap<u32, f64>,
) -> f64 {
    let n = tags.len();
    if n == 1 {
        return if tags[0] { 1.0 } else { 0.0 };
    }
    let key = pack_tags(tags);
    if let Some(&p) = memo.get(&key) {
        return p;
    }
    // Scores fit in 3 bits each (score <= n - 1 <= 5).
    let mut states: HashMap<u32, f64> = HashMap::new();
    states.insert(0, 1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let (wi, wj, tie) = pair_law(tags[i], tags[j], suite, config);
            let mut next: HashMap<u32, f64> = HashMap::with_capacity(states.len() * 2);
            for (&scores, &pr) in &states {
                if wi > 0.0 {
                    *next.entry(scores + (1 << (3 * i))).or_insert(0.0) += pr * wi;
                }
                if wj > 0.0 {
                    *next.entry(scores + (1 << (3 * j))).or_insert(0.0) += pr * wj;
                }
                if tie > 0.0 {
                    *next.entry(scores).or_insert(0.0) += pr * tie;
                }
            }
            states = next;
        }
    }
    let mut sound_wins = 0.0;
    for (&scores, &pr) in &states {
        let mut best = 0usize;
        let mut best_score = scores & 0x7;
        for idx in 1..n {
            let score = (scores >> (3 * idx)) & 0x7;
            if score > best_score {
                best = idx;
                best_score = score;
            }
        }
        if tags[best] {
            sound_wins += pr;
        }
    }
    memo.insert(key, sound_wins);
    sound_wins
}

/// Probability that one unsound candidate survives the gate.
fn unsound_survival(suite: &RoleSuite, config: &ProtocolConfig) -> f64 {
    let accept = 1.0 - suite.critic_edge();
    match config.gate {
        GateMode::RejectAny => accept.powi(config.m as i32),
        GateMode::YesThreshold { tau } => {
            let m = config.m;
            (tau..=m)
                .map(|a| {
                    binomial(m, a)
                        * accept.powi(a as i32)
                        * (1.0 - accept).powi((m - a) as i32)
                })
                .sum()
        }
    }
}

/// Per-step clean probability: over tag vectors, gate outcomes, and
/// tournament winners, the probability that the selected action is
/// sound.
fn step_clean_prob(
    qs: &[f64],
    p_survive_unsound: f64,
    suite: &RoleSuite,
    config: &ProtocolConfig,
    memo: &mut HashMap<u32, f64>,
) -> f64 {
    let k = qs.len();
    let mut clean = 0.0;
    let mut survivor_tags: Vec<bool> = Vec::with_capacity(k);
    for tag_mask in 0u32..(1 << k) {
        let mut p_tags = 1.0;
        for (i, q) in qs.iter().enumerate() {
            p_tags *= if tag_mask >> i & 1 == 1 { *q } else { 1.0 - q };
        }
        if p_tags == 0.0 {
            continue;
        }
        let unsound: Vec<usize> = (0..k).filter(|i| tag_mask >> i & 1 == 0).collect();
        let u = unsound.len();
        for sub in 0u32..(1 << u) {
            let kept = sub.count_ones() as i32;
            let p_sub = p_survive_unsound.powi(kept)
                * (1.0 - p_survive_unsound).powi(u as i32 - kept);
            if p_sub == 0.0 {
                continue;
            }
            survivor_tags.clear();
            let mut next_unsound = 0usize;
            for i in 0..k {
                if tag_mask >> i & 1 == 1 {
                    survivor_tags.push(true);
                } else {
                    if sub >> next_unsound & 1 == 1 {
                        survivor_tags.push(false);
                    }
                    next_unsound += 1;
                }
            }
            if survivor_tags.is_empty() {
                continue; // local failure, not clean
            }
            let p_sound_wins = copeland_sound_win_prob(&survivor_tags, suite, config, memo);
            clean += p_tags * p_sub * p_sound_wins;
        }
    }
    clean
}

/// Exact success probability of the protocol on a chain task with a
/// finitely supported latent model.
pub fn exact_chain_success(
    system: &StateSystem,
    config: &ProtocolConfig,
    suite: &RoleSuite,
    model: &LatentModel,
) -> Result<f64> {
    config.validate()?;
    suite.validate()?;
    model.validate()?;
    if config.k > MAX_K || config.m > MAX_M || config.r > MAX_R {
        return Err(CoreError::EnumerationLimit(format!(
            "exact oracle supports k <= {MAX_K}, m <= {MAX_M}, r <= {MAX_R}; got ({}, {}, {})",
            config.k, config.m, config.r
        )));
    }
    if config.rule != TournamentRule::Copeland {
        return Err(CoreError::EnumerationLimit(
            "exact oracle supports the copeland rule only".into(),
        ));
    }
    let Some(worlds) = model.enumerate_worlds() else {
        return Err(CoreError::EnumerationLimit(
            "exact oracle needs a finitely supported latent model".into(),
        ));
    };

    // Proposals are grounded to actions of the drawn tag; a state with no
    // unsound action coerces every proposal to sound.
    let state = system.initial_state();
    let has_unsound_actions = !system.actions_with_soundness(state, false).is_empty();
    let p_survive_unsound = unsound_survival(suite, config);
    let mut memo = HashMap::new();

    let mut success = 0.0;
    for (weight, rates) in worlds {
        if weight == 0.0 {
            continue;
        }
        let qs: Vec<f64> = (0..config.k)
            .map(|i| {
                if !has_unsound_actions {
                    1.0
                } else {
                    match &rates {
                        WorldRates::Uniform(q) => *q,
                        WorldRates::PerFamily(row) => row[(i % suite.portfolio) % row.len()],
                    }
                }
            })
            .collect();
        let clean = step_clean_prob(&qs, p_survive_unsound, suite, config, &mut memo);
        success += weight * clean.powi(system.depth() as i32);
    }
    Ok(success)
}
