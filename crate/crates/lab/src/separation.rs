//! Separation experiment: coverage does not imply local identifiability.
//!
//! The construction is a one-step task family with actions `1..=M` and a
//! hidden world parameter `theta`; the proposer is uniform in every
//! world and the sound set is everything except `theta`. Catalog critics
//! observe only candidate actions and transcript samples from the
//! proposer, so their observable behavior cannot depend on the world.
//! The experiment measures, per world, one-sided-soundness violations
//! and the rejection edge on the unsound action, and verifies by stream
//! replay that transcripts are byte-identical across worlds.

use committee_core::streams::{StreamRole, TrialStreams};
use serde::Serialize;

/// Transcript-only critics evaluated by the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogCritic {
    /// Rejects one fixed action id regardless of evidence.
    RejectFixed { action: u32 },
    /// Rejects the modal action of the transcript sample (ties to the
    /// lowest action id).
    RejectMostFrequent,
    /// Never rejects.
    NeverReject,
}

impl CatalogCritic {
    pub fn name(&self) -> String {
        match self {
            CatalogCritic::RejectFixed { action } => format!("reject_fixed_{action}"),
            CatalogCritic::RejectMostFrequent => "reject_most_frequent".into(),
            CatalogCritic::NeverReject => "never_reject".into(),
        }
    }

    /// Whether the critic rejects `action` given the transcript sample.
    /// Nothing here may depend on the world parameter.
    fn rejects(&self, transcript: &[u32], m: u32, action: u32) -> bool {
        match self {
            CatalogCritic::RejectFixed { action: fixed } => action == *fixed,
            CatalogCritic::RejectMostFrequent => {
                let mut counts = vec![0u32; m as usize + 1];
                for &a in transcript {
                    counts[a as usize] += 1;
                }
                let modal = (1..=m).max_by_key(|&a| (counts[a as usize], std::cmp::Reverse(a)))
                    .expect("m >= 1");
                action == modal
            }
            CatalogCritic::NeverReject => false,
        }
    }
}

/// The default critic catalog.
pub fn default_catalog() -> Vec<CatalogCritic> {
    vec![
        CatalogCritic::RejectFixed { action: 1 },
        CatalogCritic::RejectMostFrequent,
        CatalogCritic::NeverReject,
    ]
}

/// Per-world measurements for one critic.
#[derive(Debug, Clone, Serialize)]
pub struct WorldReport {
    pub world: u32,
    /// Trials where the critic rejected the unsound action `theta`.
    pub rejections_of_unsound: u64,
    /// Trials where the critic rejected at least one sound action.
    pub soundness_violations: u64,
    pub trials: u64,
}

impl WorldReport {
    pub fn edge(&self) -> f64 {
        self.rejections_of_unsound as f64 / self.trials as f64
    }
}

/// Full report for one critic.
#[derive(Debug, Clone, Serialize)]
pub struct CriticReport {
    pub critic: String,
    pub worlds: Vec<WorldReport>,
    /// Minimum rejection edge over worlds.
    pub worst_world_edge: f64,
    /// Whether any world saw a sound action rejected.
    pub violates_soundness: bool,
}

impl CriticReport {
    /// The proposition's dichotomy: a transcript-only critic either
    /// violates one-sided soundness somewhere or has no uniform edge.
    pub fn exhibits_dichotomy(&self) -> bool {
        self.violates_soundness || self.worst_world_edge == 0.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub worlds: u32,
    pub trials: u64,
    pub transcript_samples: u32,
    /// Byte equality of the observable sequence across all worlds.
    pub transcripts_identical: bool,
    pub critics: Vec<CriticReport>,
}

/// One world's observable run: returns the serialized observable
/// sequence (transcript draws, candidate draws, critic decisions) plus
/// per-critic tallies. The world parameter is used for measurement only;
/// every observable quantity is derived from world-independent streams.
fn run_world(
    theta: u32,
    m: u32,
    trials: u64,
    transcript_samples: u32,
    seed: u64,
    catalog: &[CatalogCritic],
) -> (Vec<u8>, Vec<(u64, u64)>) {
    let mut observable = Vec::new();
    let mut tallies = vec![(0u64, 0u64); catalog.len()];
    let mut transcript = Vec::with_capacity(transcript_samples as usize);
    for trial in 0..trials {
        let streams = TrialStreams::new(seed, trial);
        transcript.clear();
        for call in 0..transcript_samples {
            let mut rng = streams.stream(0, StreamRole::Proposer, 0, call);
            let action = 1 + rng.index(m as usize) as u32;
            transcript.push(action);
            observable.push(action as u8);
        }
        for (slot, critic) in catalog.iter().enumerate() {
            let mut violated = false;
            for action in 1..=m {
                let rejected = critic.rejects(&transcript, m, action);
                observable.push(rejected as u8);
                if action == theta && rejected {
                    tallies[slot].0 += 1;
                }
                violated |= action != theta && rejected;
            }
            // Count violating trials once.
            tallies[slot].1 += violated as u64;
        }
    }
    (observable, tallies)
}

/// Runs the separation experiment over `worlds` hidden parameters.
pub fn run_separation(
    worlds: u32,
    trials: u64,
    transcript_samples: u32,
    seed: u64,
    catalog: &[CatalogCritic],
) -> SeparationReport {
    assert!(worlds >= 2, "separation needs M >= 2");
    assert!(trials >= 1);
    let mut reference: Option<Vec<u8>> = None;
    let mut transcripts_identical = true;
    let mut per_critic: Vec<Vec<WorldReport>> = vec![Vec::new(); catalog.len()];
    for theta in 1..=worlds {
        let (observable, tallies) =
            run_world(theta, worlds, trials, transcript_samples, seed, catalog);
        match &reference {
            None => reference = Some(observable),
            Some(bytes) => transcripts_identical &= *bytes == observable,
        }
        for (slot, (rejections, violations)) in tallies.into_iter().enumerate() {
            per_critic[slot].push(WorldReport {
                world: theta,
                rejections_of_unsound: rejections,
                soundness_violations: violations,
                trials,
            });
        }
    }
    let critics = catalog
        .iter()
        .zip(per_critic)
        .map(|(critic, worlds)| {
            let worst =
                worlds.iter().map(|w| w.edge()).fold(f64::INFINITY, f64::min);
            let violates = worlds.iter().any(|w| w.soundness_violations > 0);
            CriticReport {
                critic: critic.name(),
                worlds,
                worst_world_edge: worst,
                violates_soundness: violates,
            }
        })
        .collect();
    SeparationReport {
        worlds,
        trials,
        transcript_samples,
        transcripts_identical,
        critics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transcripts_replay_identically_across_worlds() {
        let report = run_separation(5, 500, 16, 99, &default_catalog());
        assert!(report.transcripts_identical);
    }

    #[test]
    fn every_catalog_critic_exhibits_the_dichotomy() {
        let report = run_separation(5, 2_000, 16, 7, &default_catalog());
        for critic in &report.critics {
            assert!(
                critic.exhibits_dichotomy(),
                "{} has edge {} without violations",
                critic.critic,
                critic.worst_world_edge
            );
        }
    }

    #[test]
    fn reject_fixed_violates_in_other_worlds() {
        let report = run_separation(4, 1_000, 8, 3, &[CatalogCritic::RejectFixed { action: 1 }]);
        let critic = &report.critics[0];
        // World 1: rejecting action 1 is rejecting the unsound action.
        assert_eq!(critic.worlds[0].rejections_of_unsound, 1_000);
        assert_eq!(critic.worlds[0].soundness_violations, 0);
        // Any other world: action 1 is sound and always rejected.
        assert_eq!(critic.worlds[1].soundness_violations, 1_000);
        assert_eq!(critic.worlds[1].rejections_of_unsound, 0);
        assert_eq!(critic.worst_world_edge, 0.0);
        assert!(critic.violates_soundness);
    }

    #[test]
    fn never_reject_has_zero_edge_everywhere() {
        let report = run_separation(3, 500, 8, 11, &[CatalogCritic::NeverReject]);
        let critic = &report.critics[0];
        assert_eq!(critic.worst_world_edge, 0.0);
        assert!(!critic.violates_soundness);
        assert!(critic.exhibits_dichotomy());
    }

    #[test]
    fn reject_most_frequent_rejects_sound_actions() {
        let report =
            run_separation(5, 2_000, 16, 13, &[CatalogCritic::RejectMostFrequent]);
        let critic = &report.critics[0];
        assert!(critic.violates_soundness);
        // The modal action is roughly uniform (lowest-id tie-breaking
        // skews it toward small ids), so every world has some rejection
        // mass on its unsound action and none is preferred.
        for w in &critic.worlds {
            let edge = w.edge();
            assert!(edge > 0.05 && edge < 0.45, "edge {edge}");
        }
        assert!(critic.worst_world_edge > 0.0);
    }
}
