//! The committee protocol: per step, sample `k` candidate actions,
//! apply `m` critic calls to each, declare local failure if nothing
//! survives, otherwise select a tournament winner with `r` comparator
//! votes per ordered pair and apply it.
//!
//! Everything here is a pure function of explicit state and streams;
//! trials can run concurrently with no shared mutable state.

use crate::error::{CoreError, Result};
use crate::role_models::{
    comparator_call, critic_call, propose, Candidate, PairVote, RoleSuite, SampledWorld, Verdict,
};
use crate::state_system::{StateRef, StateSystem, Successor};
use crate::streams::{pair_unit, StreamRole, TrialStreams, MAX_CANDIDATES};
use serde::{Deserialize, Serialize};

/// Critic-gate semantics. The main protocol discards on any rejection;
/// the threshold mode keeps candidates with at least `tau` accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GateMode {
    RejectAny,
    YesThreshold { tau: u32 },
}

/// How survivors are aggregated into a winner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TournamentRule {
    Copeland,
    SequentialKing,
    StrictDominance,
    SingleElim,
}

/// Whether each unordered pair is played in one presentation order or in
/// both with conservative agreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DebiasMode {
    SingleOrder,
    BothOrdersConservative,
}

impl DebiasMode {
    pub fn orders(self) -> u64 {
        match self {
            DebiasMode::SingleOrder => 1,
            DebiasMode::BothOrdersConservative => 2,
        }
    }
}

/// Protocol parameters `(k, m, r)` plus gate, tournament, and debias
/// choices. Tie-breaks are always by lowest candidate index; proposer
/// families are assigned round-robin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub k: usize,
    pub m: u32,
    pub r: u32,
    pub gate: GateMode,
    pub rule: TournamentRule,
    pub debias: DebiasMode,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(CoreError::config("protocol.k must be >= 1"));
        }
        if self.k > MAX_CANDIDATES {
            return Err(CoreError::config(format!(
                "protocol.k must be <= {MAX_CANDIDATES}"
            )));
        }
        if let GateMode::YesThreshold { tau } = self.gate {
            if tau > self.m {
                return Err(CoreError::config(format!(
                    "protocol.gate.tau ({tau}) must be <= protocol.m ({})",
                    self.m
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of one unordered pair, indices in presentation order
/// (`first < second`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairOutcome {
    WinFirst,
    WinSecond,
    Tie,
}

/// Strict-majority aggregation of comparator votes on one ordered
/// presentation. Tie votes count toward neither side; a vote split with
/// no strict majority is a tie.
pub fn majority_vote(votes: &[PairVote]) -> PairVote {
    let firsts = votes.iter().filter(|v| **v == PairVote::First).count();
    let seconds = votes.iter().filter(|v| **v == PairVote::Second).count();
    match firsts.cmp(&seconds) {
        std::cmp::Ordering::Greater => PairVote::First,
        std::cmp::Ordering::Less => PairVote::Second,
        std::cmp::Ordering::Equal => PairVote::Tie,
    }
}

/// Conservative position-swap aggregation. `votes_ij` were collected
/// with candidate `i` shown first, `votes_ji` with `j` shown first; the
/// swapped order is mapped back to original indices before comparison.
/// `i` wins only if both orders' majorities pick `i`; disagreement or any
/// tie majority yields a tie.
pub fn debiased_pair(votes_ij: &[PairVote], votes_ji: &[PairVote]) -> PairOutcome {
    combine_orders(majority_vote(votes_ij), majority_vote(votes_ji))
}

/// Combines per-order majorities conservatively; `second_order` is the
/// majority with the pair presented swapped.
fn combine_orders(first_order: PairVote, second_order: PairVote) -> PairOutcome {
    match (first_order, second_order) {
        (PairVote::First, PairVote::Second) => PairOutcome::WinFirst,
        (PairVote::Second, PairVote::First) => PairOutcome::WinSecond,
        _ => PairOutcome::Tie,
    }
}

/// Strict majority of `r` fresh comparator votes on one ordered
/// presentation: candidate `i` shown first, `j` second.
pub fn majority_pair(
    (i, ci): (usize, Candidate),
    (j, cj): (usize, Candidate),
    r: u32,
    suite: &RoleSuite,
    streams: &TrialStreams,
    step: u32,
) -> PairVote {
    let mut votes = Vec::with_capacity(r as usize);
    for v in 0..r {
        let mut rng = streams.stream(step, StreamRole::Comparator, pair_unit(i, j), v);
        votes.push(comparator_call(ci, cj, suite, &mut rng));
    }
    majority_vote(&votes)
}

/// All-pairs results over `n` candidates, stored for `i < j`.
#[derive(Debug, Clone)]
pub struct PairResults {
    n: usize,
    cells: Vec<PairOutcome>,
}

impl PairResults {
    pub fn new(n: usize) -> Self {
        PairResults { n, cells: vec![PairOutcome::Tie; n * (n - 1) / 2] }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        // Row-major upper triangle.
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    pub fn set(&mut self, i: usize, j: usize, outcome: PairOutcome) {
        let slot = self.slot(i, j);
        self.cells[slot] = outcome;
    }

    pub fn get(&self, i: usize, j: usize) -> PairOutcome {
        self.cells[self.slot(i, j)]
    }

    /// True when `i` beat `j` (either orientation).
    pub fn beats(&self, i: usize, j: usize) -> bool {
        if i < j {
            self.get(i, j) == PairOutcome::WinFirst
        } else {
            self.get(j, i) == PairOutcome::WinSecond
        }
    }
}

/// Copeland scores: one point per pairwise win, ties score nothing.
pub fn copeland_scores(results: &PairResults) -> Vec<u32> {
    let mut scores = vec![0u32; results.n];
    for i in 0..results.n {
        for j in (i + 1)..results.n {
            match results.get(i, j) {
                PairOutcome::WinFirst => scores[i] += 1,
                PairOutcome::WinSecond => scores[j] += 1,
                PairOutcome::Tie => {}
            }
        }
    }
    scores
}

/// Copeland winner: highest score, ties broken by lowest index.
pub fn copeland_winner(results: &PairResults) -> usize {
    let scores = copeland_scores(results);
    let mut best = 0;
    for (idx, score) in scores.iter().enumerate() {
        if *score > scores[best] {
            best = idx;
        }
    }
    best
}

/// Number of pairwise matches a rule plays over `n` survivors.
pub fn matches_played(rule: TournamentRule, n: usize) -> u64 {
    if n <= 1 {
        return 0;
    }
    let n = n as u64;
    match rule {
        TournamentRule::Copeland | TournamentRule::StrictDominance => n * (n - 1) / 2,
        TournamentRule::SequentialKing | TournamentRule::SingleElim => n - 1,
    }
}

/// Runs a tournament over positions `0..n`, calling `play(i, j)` with
/// `i < j` for each match it needs. Returns the winning position.
pub fn run_tournament(
    n: usize,
    rule: TournamentRule,
    play: &mut impl FnMut(usize, usize) -> PairOutcome,
) -> usize {
    assert!(n >= 1, "tournament needs at least one survivor");
    if n == 1 {
        return 0;
    }
    match rule {
        TournamentRule::Copeland => {
            let results = all_pairs(n, play);
            copeland_winner(&results)
        }
        TournamentRule::StrictDominance => {
            let results = all_pairs(n, play);
            for i in 0..n {
                if (0..n).all(|j| j == i || results.beats(i, j)) {
                    return i;
                }
            }
            copeland_winner(&results)
        }
        TournamentRule::SequentialKing => {
            let mut champion = 0;
            for challenger in 1..n {
                // Champion index is always below the challenger's.
                if play(champion, challenger) == PairOutcome::WinSecond {
                    champion = challenger;
                }
            }
            champion
        }
        TournamentRule::SingleElim => {
            let size = n.next_power_of_two();
            let byes = size - n;
            // Byes go to the lowest indices: they skip the first round.
            let mut round: Vec<usize> = (0..byes).collect();
            let mut pending = byes;
            while pending + 1 < n {
                round.push(win_position(pending, pending + 1, play));
                pending += 2;
            }
            if pending < n {
                round.push(pending);
            }
            while round.len() > 1 {
                let mut next = Vec::with_capacity(round.len() / 2);
                let mut it = round.chunks_exact(2);
                for pair in &mut it {
                    next.push(win_position(pair[0], pair[1], play));
                }
                if let [odd] = it.remainder() {
                    next.push(*odd);
                }
                round = next;
            }
            round[0]
        }
    }
}

fn win_position(a: usize, b: usize, play: &mut impl FnMut(usize, usize) -> PairOutcome) -> usize {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    match play(lo, hi) {
        PairOutcome::WinSecond => hi,
        // Ties advance the lower index.
        PairOutcome::WinFirst | PairOutcome::Tie => lo,
    }
}

fn all_pairs(n: usize, play: &mut impl FnMut(usize, usize) -> PairOutcome) -> PairResults {
    let mut results = PairResults::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let outcome = play(i, j);
            results.set(i, j, outcome);
        }
    }
    results
}

/// Role-call counters, tracked per step and per trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RoleCallCounts {
    pub proposer: u64,
    pub critic: u64,
    pub comparator: u64,
}

impl RoleCallCounts {
    pub fn total(&self) -> u64 {
        self.proposer + self.critic + self.comparator
    }

    pub fn add(&mut self, other: &RoleCallCounts) {
        self.proposer += other.proposer;
        self.critic += other.critic;
        self.comparator += other.comparator;
    }
}

/// What happened at one step, from ground truth: the step is clean when
/// a sound action was selected, a prop-miss when no sound candidate was
/// even proposed, and an id-miss when a sound candidate was proposed but
/// an unsound one was selected (or everything was discarded).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepEvent {
    Clean,
    PropMiss,
    IdMiss,
}

/// Outcome of one protocol step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// Winning candidate index; `None` when no candidate survived the
    /// gate (local failure).
    pub selected: Option<usize>,
    /// Action id of the winning candidate.
    pub action: Option<u32>,
    pub event: StepEvent,
    /// How many of the `k` proposals were sound.
    pub sound_proposed: u32,
    /// Gate survivor count.
    pub survivors: u32,
    pub calls: RoleCallCounts,
}

/// Exact per-step call counts implied by the count formula:
/// `k` proposer calls, `m k` critic calls, and `r * orders * matches`
/// comparator calls for the configured rule and survivor count.
pub fn expected_step_calls(config: &ProtocolConfig, survivors: usize) -> RoleCallCounts {
    RoleCallCounts {
        proposer: config.k as u64,
        critic: config.m as u64 * config.k as u64,
        comparator: config.r as u64
            * config.debias.orders()
            * matches_played(config.rule, survivors),
    }
}

/// Worst-case role calls for a full trajectory:
/// `L (k + m k + 2 r C(k, 2))`.
pub fn trial_call_cap(depth: u32, config: &ProtocolConfig) -> u64 {
    let k = config.k as u64;
    depth as u64 * (k + config.m as u64 * k + 2 * config.r as u64 * k * (k - 1) / 2)
}

/// Whether a candidate with `accepts` accepting votes out of `m` passes
/// the gate.
pub fn gate_keeps(gate: GateMode, accepts: u32, m: u32) -> bool {
    match gate {
        GateMode::RejectAny => accepts == m,
        GateMode::YesThreshold { tau } => accepts >= tau,
    }
}

/// Critic gate: `m` independent critic calls per candidate, survivors by
/// gate mode. An empty result is a legal outcome signaling local failure
/// upstream.
pub fn critic_gate(
    candidates: &[Candidate],
    config: &ProtocolConfig,
    suite: &RoleSuite,
    streams: &TrialStreams,
    step: u32,
) -> (Vec<usize>, u64) {
    let mut survivors = Vec::with_capacity(candidates.len());
    let mut calls = 0u64;
    for (idx, candidate) in candidates.iter().enumerate() {
        let mut accepts = 0u32;
        for call in 0..config.m {
            let mut rng = streams.stream(step, StreamRole::Critic, idx as u32, call);
            if critic_call(*candidate, suite, &mut rng) == Verdict::Accept {
                accepts += 1;
            }
            calls += 1;
        }
        if gate_keeps(config.gate, accepts, config.m) {
            survivors.push(idx);
        }
    }
    (survivors, calls)
}

/// One protocol step at a valid nonterminal state.
pub fn run_step(
    system: &StateSystem,
    state: StateRef,
    config: &ProtocolConfig,
    suite: &RoleSuite,
    world: &SampledWorld,
    streams: &TrialStreams,
    step: u32,
) -> StepOutcome {
    debug_assert!(!state.is_terminal());
    let mut calls = RoleCallCounts::default();

    // (1) Propose k candidates, round-robin over the portfolio. The
    // proposer's tag draw is grounded to an action id with that tag; when
    // the state has no action of the drawn tag the ground truth of the
    // fallback pool wins.
    let mut candidates: Vec<Candidate> = Vec::with_capacity(config.k);
    let mut actions: Vec<u32> = Vec::with_capacity(config.k);
    let mut sound_proposed = 0u32;
    for i in 0..config.k {
        let family = i % suite.portfolio;
        let mut rng = streams.stream(step, StreamRole::Proposer, i as u32, 0);
        let mut candidate = propose(world, family, &mut rng);
        calls.proposer += 1;
        let mut pool = system.actions_with_soundness(state, candidate.sound);
        if pool.is_empty() {
            candidate.sound = !candidate.sound;
            pool = system.actions_with_soundness(state, candidate.sound);
        }
        let action = if pool.len() == 1 { pool[0] } else { pool[rng.index(pool.len())] };
        if candidate.sound {
            sound_proposed += 1;
        }
        candidates.push(candidate);
        actions.push(action);
    }

    // (2) Critic gate.
    let (survivors, critic_calls) = critic_gate(&candidates, config, suite, streams, step);
    calls.critic = critic_calls;

    // (3) No survivor: local failure.
    if survivors.is_empty() {
        let event = if sound_proposed > 0 { StepEvent::IdMiss } else { StepEvent::PropMiss };
        return StepOutcome { selected: None, action: None, event, sound_proposed, survivors: 0, calls };
    }

    // (4) Tournament among survivors.
    let mut play = |a: usize, b: usize| -> PairOutcome {
        let (i, j) = (survivors[a], survivors[b]);
        let (ci, cj) = (candidates[i], candidates[j]);
        let forward = majority_pair((i, ci), (j, cj), config.r, suite, streams, step);
        calls.comparator += config.r as u64;
        match config.debias {
            DebiasMode::SingleOrder => match forward {
                PairVote::First => PairOutcome::WinFirst,
                PairVote::Second => PairOutcome::WinSecond,
                PairVote::Tie => PairOutcome::Tie,
            },
            DebiasMode::BothOrdersConservative => {
                let swapped = majority_pair((j, cj), (i, ci), config.r, suite, streams, step);
                calls.comparator += config.r as u64;
                combine_orders(forward, swapped)
            }
        }
    };
    let winner_pos = run_tournament(survivors.len(), config.rule, &mut play);
    let winner = survivors[winner_pos];

    let event = if candidates[winner].sound {
        StepEvent::Clean
    } else if sound_proposed > 0 {
        StepEvent::IdMiss
    } else {
        StepEvent::PropMiss
    };
    StepOutcome {
        selected: Some(winner),
        action: Some(actions[winner]),
        event,
        sound_proposed,
        survivors: survivors.len() as u32,
        calls,
    }
}

/// How a trial ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialEnd {
    /// Terminal state reached.
    Success,
    /// Failed at a step where no sound candidate was proposed.
    PropMiss,
    /// An unsound candidate was selected despite a sound one being
    /// available.
    IdMiss,
    /// The gate discarded every candidate.
    LocalFailure,
}

/// Outcome of a full trajectory.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub success: bool,
    pub end: TrialEnd,
    /// Steps executed (at most the task depth).
    pub steps: u32,
    pub events: Vec<StepEvent>,
    pub calls: RoleCallCounts,
    /// Whether step 0 proposed at least one sound candidate.
    pub first_step_had_sound: bool,
}

/// Runs the protocol from the initial state: one world draw, then steps
/// until terminal, invalid, local failure, or the depth is consumed.
pub fn run_trajectory(
    system: &StateSystem,
    config: &ProtocolConfig,
    suite: &RoleSuite,
    model: &crate::role_models::LatentModel,
    master_seed: u64,
    trial: u64,
) -> TrialOutcome {
    let streams = TrialStreams::new(master_seed, trial);
    let mut world_rng = streams.stream(0, StreamRole::World, 0, 0);
    let world = crate::role_models::sample_world(model, &mut world_rng);

    let mut state = system.initial_state();
    let mut events = Vec::with_capacity(system.depth() as usize);
    let mut calls = RoleCallCounts::default();
    let mut first_step_had_sound = false;
    for step in 0..system.depth() {
        let outcome = run_step(system, state, config, suite, &world, &streams, step);
        calls.add(&outcome.calls);
        events.push(outcome.event);
        if step == 0 {
            first_step_had_sound = outcome.sound_proposed > 0;
        }
        let Some(_) = outcome.selected else {
            return TrialOutcome {
                success: false,
                end: TrialEnd::LocalFailure,
                steps: step + 1,
                events,
                calls,
                first_step_had_sound,
            };
        };
        match system.apply_action(state, outcome.action.expect("selected step has an action")) {
            Successor::Valid(next) => state = next,
            Successor::Invalid => {
                let end = match outcome.event {
                    StepEvent::PropMiss => TrialEnd::PropMiss,
                    _ => TrialEnd::IdMiss,
                };
                return TrialOutcome {
                    success: false,
                    end,
                    steps: step + 1,
                    events,
                    calls,
                    first_step_had_sound,
                };
            }
        }
        if state.is_terminal() {
            break;
        }
    }
    let success = state.is_terminal();
    let steps = events.len() as u32;
    TrialOutcome {
        success,
        // A trajectory that consumed its depth without reaching terminal
        // can only have selected unsound-valid actions along the way.
        end: if success { TrialEnd::Success } else { TrialEnd::IdMiss },
        steps,
        events,
        calls,
        first_step_had_sound,
    }
}

/// Exact per-trial role-call counts, asserting the trajectory cap
/// `L (k + m k + 2 r C(k, 2))`.
pub fn count_role_calls(
    outcome: &TrialOutcome,
    config: &ProtocolConfig,
    depth: u32,
) -> RoleCallCounts {
    let cap = trial_call_cap(depth, config);
    assert!(
        outcome.calls.total() <= cap,
        "role calls {} exceed the cap {cap}",
        outcome.calls.total()
    );
    outcome.calls
}
