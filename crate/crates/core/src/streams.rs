//! Deterministic random-stream derivation.
//!
//! Every role call draws from its own stream, keyed by
//! `(master seed, trial, step, role, unit, call)`. Streams are derived by
//! hashing the key, so trials are independent and replayable in any
//! execution order, and appending candidates (raising `k`) leaves the
//! streams of existing calls untouched.

use rand::RngCore;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Which role a stream feeds. Part of the stream key, so the same
/// `(step, unit, call)` triple never collides across roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    World,
    Proposer,
    Critic,
    Comparator,
    Verifier,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::World => 0,
            StreamRole::Proposer => 1,
            StreamRole::Critic => 2,
            StreamRole::Comparator => 3,
            StreamRole::Verifier => 4,
        }
    }
}

/// Maximum candidate count representable in a comparator pair unit.
pub const MAX_CANDIDATES: usize = 1 << 12;

/// Encodes an ordered comparator presentation `(first, second)` into a
/// stream unit. Requires both indices `< MAX_CANDIDATES`.
#[inline]
pub fn pair_unit(first: usize, second: usize) -> u32 {
    debug_assert!(first < MAX_CANDIDATES && second < MAX_CANDIDATES);
    ((first as u32) << 13) | ((second as u32) << 1)
}

/// Per-trial stream factory.
#[derive(Debug, Clone, Copy)]
pub struct TrialStreams {
    trial_key: u64,
}

impl TrialStreams {
    pub fn new(master_seed: u64, trial: u64) -> Self {
        TrialStreams {
            trial_key: mix64(master_seed ^ mix64(trial ^ 0xA076_1D64_78BD_642F)),
        }
    }

    /// Fresh stream for one role call.
    #[inline]
    pub fn stream(&self, step: u32, role: StreamRole, unit: u32, call: u32) -> Stream {
        debug_assert!(step < (1 << 16));
        debug_assert!(unit < (1 << 28));
        debug_assert!(call < (1 << 16));
        let key = ((step as u64) << 48) | (role.tag() << 44) | ((unit as u64) << 16) | call as u64;
        Stream {
            state: mix64(self.trial_key ^ mix64(key ^ 0xE703_7ED1_A0B4_28DB)),
        }
    }
}

/// A single derived stream. Counter-mode splitmix: each draw advances the
/// state by a fixed increment and returns the mixed value.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    /// Stream seeded directly from a key, for uses outside the trial
    /// structure (pool generation, standalone draws).
    pub fn from_key(key: u64) -> Self {
        Stream { state: mix64(key ^ 0x2545_F491_4F6C_DD1D) }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        mix64(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli draw.
    #[inline]
    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform index in `[0, n)`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Modulo bias is < 2^-50 for the index ranges used here (n << 2^12).
        (self.next_u64() % n as u64) as usize
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        Stream::next_u64(self)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}
