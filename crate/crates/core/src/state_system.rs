//! Ranked valid-state search spaces with stored ground-truth soundness
//! labels.
//!
//! The canonical family is chain-shaped: one nonterminal state per rank
//! level, a single terminal at rank 0, and a single absorbing invalid
//! state. Sound actions decrease rank by exactly one; invalidating actions
//! jump to the invalid state. Labels are stored at construction, never
//! recomputed, so the same task replays identically across role
//! configurations.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// Ground-truth tag of one `(state, action)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionTag {
    /// Leads to a valid state of strictly smaller rank.
    Sound,
    /// Leads to a valid state without decreasing rank.
    UnsoundValid,
    /// Leads to the absorbing invalid state.
    Invalidating,
}

/// Reference to a valid state: its rank plus an opaque path id that
/// records how it was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateRef {
    pub rank: u32,
    pub path: u64,
}

impl StateRef {
    pub fn is_terminal(&self) -> bool {
        self.rank == 0
    }
}

/// Result of applying an action: a valid successor or the absorbing
/// invalid marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Successor {
    Valid(StateRef),
    Invalid,
}

/// A ranked search space with per-(state, action) ground-truth labels.
#[derive(Debug, Clone)]
pub struct StateSystem {
    depth: u32,
    arity: u32,
    /// `labels[rank - 1]` holds the action tags of the nonterminal state
    /// at that rank.
    labels: Vec<Vec<ActionTag>>,
}

impl StateSystem {
    /// Chain task: every nonterminal state has exactly `sound_count` sound
    /// actions and `arity - sound_count` invalidating ones.
    pub fn make_chain_task(depth: u32, arity: u32, sound_count: u32) -> Result<StateSystem> {
        if depth == 0 {
            return Err(CoreError::config("chain depth must be >= 1"));
        }
        if arity == 0 {
            return Err(CoreError::config("action arity must be >= 1"));
        }
        if sound_count == 0 || sound_count > arity {
            return Err(CoreError::config(format!(
                "sound_count must satisfy 1 <= sound_count <= arity, got {sound_count} of {arity}"
            )));
        }
        let per_state: Vec<ActionTag> = (0..arity)
            .map(|a| if a < sound_count { ActionTag::Sound } else { ActionTag::Invalidating })
            .collect();
        Ok(StateSystem {
            depth,
            arity,
            labels: vec![per_state; depth as usize],
        })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn arity(&self) -> u32 {
        self.arity
    }

    pub fn initial_state(&self) -> StateRef {
        StateRef { rank: self.depth, path: 0 }
    }

    /// Ground-truth tag of an action. Calling on a terminal state is a
    /// contract violation.
    pub fn tag(&self, s: StateRef, action: u32) -> ActionTag {
        assert!(!s.is_terminal(), "tag queried on a terminal state");
        assert!(action < self.arity, "action {action} out of range");
        self.labels[(s.rank - 1) as usize][action as usize]
    }

    /// Ground-truth membership in the sound set. Used by role models and
    /// evaluators only; the protocol's selection path never sees it.
    pub fn is_sound(&self, s: StateRef, action: u32) -> bool {
        self.tag(s, action) == ActionTag::Sound
    }

    /// Applies an action. Calling on a terminal state is a contract
    /// violation.
    pub fn apply_action(&self, s: StateRef, action: u32) -> Successor {
        let path = s.path.wrapping_mul(0x100_0000_01B3).wrapping_add(action as u64 + 1);
        match self.tag(s, action) {
            ActionTag::Sound => Successor::Valid(StateRef { rank: s.rank - 1, path }),
            ActionTag::UnsoundValid => Successor::Valid(StateRef { rank: s.rank, path }),
            ActionTag::Invalidating => Successor::Invalid,
        }
    }

    /// Action ids carrying (or not carrying) the sound tag at `s`.
    pub fn actions_with_soundness(&self, s: StateRef, sound: bool) -> Vec<u32> {
        (0..self.arity).filter(|&a| self.is_sound(s, a) == sound).collect()
    }
}
