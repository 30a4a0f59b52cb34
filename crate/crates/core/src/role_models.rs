//! Stochastic role models: proposer portfolios, critics, comparators, and
//! verifiers with exactly configurable edges.
//!
//! Edges are implemented with equality (a critic rejects an unsound
//! candidate with probability exactly `beta`, a comparator prefers the
//! sound side of a mixed pair with probability exactly `1/2 + sigma` per
//! vote) so that analytic bounds can be tested for tightness as well as
//! validity. Critics and verifiers are one-sided: a sound candidate is
//! never rejected.

use crate::error::{CoreError, Result};
use crate::streams::Stream;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

/// One latent point mass: success probability `q` with mixture weight
/// `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub q: f64,
    pub weight: f64,
}

/// Distribution of the latent variable `Z` and the per-family success
/// probabilities it induces. Closed-world: each kind corresponds to a
/// formula with an exact oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatentModel {
    /// `q` drawn from finitely many point masses, shared by all families.
    PointMass { masses: Vec<PointMass> },
    /// With probability `rho` all proposers share one fate (all succeed
    /// with probability `alpha`, else all fail); otherwise they act
    /// independently with marginal success probability `alpha`.
    CommonShock { rho: f64, alpha: f64 },
    /// `q = 0` with probability `blind_mass`, else `q ~ Beta(shape_a,
    /// shape_b)`, shared by all families.
    BetaMixture { shape_a: f64, shape_b: f64, blind_mass: f64 },
    /// Finite latent states with one success probability per proposer
    /// family: `rates[z][g]` is family `g`'s success probability in
    /// latent state `z`.
    PerFamily { weights: Vec<f64>, rates: Vec<Vec<f64>> },
}

const WEIGHT_TOL: f64 = 1e-12;

fn is_prob(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl LatentModel {
    /// Adversarial portfolio preset: family 0 succeeds with probability
    /// `alpha0` in every world, every other family has zero mass.
    pub fn adversarial_portfolio(alpha0: f64, portfolio: usize) -> LatentModel {
        let mut rates = vec![0.0; portfolio.max(1)];
        rates[0] = alpha0;
        LatentModel::PerFamily { weights: vec![1.0], rates: vec![rates] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LatentModel::PointMass { masses } => {
                if masses.is_empty() {
                    return Err(CoreError::config("point-mass model needs at least one mass"));
                }
                let total: f64 = masses.iter().map(|m| m.weight).sum();
                if (total - 1.0).abs() > WEIGHT_TOL {
                    return Err(CoreError::config(format!(
                        "point-mass weights sum to {total}, expected 1 within 1e-12"
                    )));
                }
                for m in masses {
                    if !is_prob(m.q) || !is_prob(m.weight) {
                        return Err(CoreError::config("point masses need q, weight in [0,1]"));
                    }
                }
                Ok(())
            }
            LatentModel::CommonShock { rho, alpha } => {
                if !is_prob(*rho) || !is_prob(*alpha) {
                    return Err(CoreError::config("common-shock rho, alpha must be in [0,1]"));
                }
                Ok(())
            }
            LatentModel::BetaMixture { shape_a, shape_b, blind_mass } => {
                if !(*shape_a > 0.0 && *shape_b > 0.0) {
                    return Err(CoreError::config("beta shapes must be positive"));
                }
                if !is_prob(*blind_mass) {
                    return Err(CoreError::config("blind mass must be in [0,1]"));
                }
                Ok(())
            }
            LatentModel::PerFamily { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return Err(CoreError::config(
                        "per-family model needs one rate row per latent weight",
                    ));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > WEIGHT_TOL {
                    return Err(CoreError::config(format!(
                        "per-family weights sum to {total}, expected 1 within 1e-12"
                    )));
                }
                let width = rates[0].len();
                if width == 0 {
                    return Err(CoreError::config("per-family model needs at least one family"));
                }
                for (w, row) in weights.iter().zip(rates) {
                    if !is_prob(*w) {
                        return Err(CoreError::config("latent weights must be in [0,1]"));
                    }
                    if row.len() != width {
                        return Err(CoreError::config("per-family rate rows must share a length"));
                    }
                    if row.iter().any(|q| !is_prob(*q)) {
                        return Err(CoreError::config("family rates must be in [0,1]"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Blind-spot mass `B`: probability that every family has zero
    /// success probability.
    pub fn blind_mass(&self) -> f64 {
        match self {
            LatentModel::PointMass { masses } => {
                masses.iter().filter(|m| m.q == 0.0).map(|m| m.weight).sum()
            }
            LatentModel::CommonShock { rho, alpha } => rho * (1.0 - alpha),
            LatentModel::BetaMixture { blind_mass, .. } => *blind_mass,
            LatentModel::PerFamily { weights, rates } => weights
                .iter()
                .zip(rates)
                .filter(|(_, row)| row.iter().all(|&q| q == 0.0))
                .map(|(w, _)| w)
                .sum(),
        }
    }

    /// Point-mass representation of the exchangeable-`q` models, used by
    /// closed-form evaluation. `None` for models without one.
    pub fn as_point_masses(&self) -> Option<Vec<PointMass>> {
        match self {
            LatentModel::PointMass { masses } => Some(masses.clone()),
            LatentModel::CommonShock { rho, alpha } => Some(vec![
                PointMass { q: 1.0, weight: rho * alpha },
                PointMass { q: 0.0, weight: rho * (1.0 - alpha) },
                PointMass { q: *alpha, weight: 1.0 - rho },
            ]),
            _ => None,
        }
    }

    /// Enumerates the latent states of the finitely supported models as
    /// `(weight, rates)`. `None` for the beta mixture.
    pub fn enumerate_worlds(&self) -> Option<Vec<(f64, WorldRates)>> {
        match self {
            LatentModel::PerFamily { weights, rates } => Some(
                weights
                    .iter()
                    .zip(rates)
                    .map(|(w, row)| (*w, WorldRates::PerFamily(row.clone())))
                    .collect(),
            ),
            _ => self.as_point_masses().map(|masses| {
                masses
                    .into_iter()
                    .map(|m| (m.weight, WorldRates::Uniform(m.q)))
                    .collect()
            }),
        }
    }
}

/// Success probabilities induced by one latent realization.
#[derive(Debug, Clone, PartialEq)]
pub enum WorldRates {
    /// All families share one rate.
    Uniform(f64),
    /// One rate per family.
    PerFamily(Vec<f64>),
}

/// One realization of `Z`, fixed for the lifetime of a trial. All role
/// calls within the trial condition on it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWorld {
    rates: WorldRates,
}

impl SampledWorld {
    pub fn from_rates(rates: WorldRates) -> Self {
        SampledWorld { rates }
    }

    /// Success probability of proposer family `family` in this world.
    pub fn q(&self, family: usize) -> f64 {
        match &self.rates {
            WorldRates::Uniform(q) => *q,
            WorldRates::PerFamily(rates) => rates[family % rates.len()],
        }
    }
}

/// Draws one world from the latent law. Deterministic given the stream.
pub fn sample_world(model: &LatentModel, rng: &mut Stream) -> SampledWorld {
    let rates = match model {
        LatentModel::PointMass { masses } => {
            let mut u = rng.next_f64();
            let mut chosen = masses[masses.len() - 1].q;
            for m in masses {
                if u < m.weight {
                    chosen = m.q;
                    break;
                }
                u -= m.weight;
            }
            WorldRates::Uniform(chosen)
        }
        LatentModel::CommonShock { rho, alpha } => {
            if rng.chance(*rho) {
                WorldRates::Uniform(if rng.chance(*alpha) { 1.0 } else { 0.0 })
            } else {
                WorldRates::Uniform(*alpha)
            }
        }
        LatentModel::BetaMixture { shape_a, shape_b, blind_mass } => {
            if rng.chance(*blind_mass) {
                WorldRates::Uniform(0.0)
            } else {
                let beta = Beta::new(*shape_a, *shape_b).expect("validated shapes");
                WorldRates::Uniform(beta.sample(rng))
            }
        }
        LatentModel::PerFamily { weights, rates } => {
            let mut u = rng.next_f64();
            let mut chosen = rates.len() - 1;
            for (z, w) in weights.iter().enumerate() {
                if u < *w {
                    chosen = z;
                    break;
                }
                u -= w;
            }
            WorldRates::PerFamily(rates[chosen].clone())
        }
    };
    SampledWorld { rates }
}

/// A proposed candidate with its hidden ground-truth tag. The tag is for
/// role models and evaluators only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub sound: bool,
}

/// Critic / verifier verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject,
}

/// Comparator vote over an ordered presentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairVote {
    First,
    Second,
    Tie,
}

/// Role configuration: portfolio size and the edges `(alpha0, beta,
/// sigma, nu)` plus comparator bias/tie knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleSuite {
    /// Proposer portfolio size `|P|`; candidates are assigned round-robin.
    pub portfolio: usize,
    /// Per-prompt success floor; bookkeeping for sizing, not sampled from.
    pub alpha0: f64,
    /// Critic rejection probability for unsound candidates.
    pub beta: f64,
    /// Comparator edge: a sound candidate beats an unsound one with
    /// probability `1/2 + sigma` per vote.
    pub sigma: f64,
    /// Verifier leakage: an unsound candidate is accepted with
    /// probability `nu`.
    pub nu: f64,
    /// Probability a comparator vote returns a tie.
    pub tie_prob: f64,
    /// Additive preference for whichever candidate is shown first.
    pub position_bias: f64,
    /// When set, the critic is the verifier and the comparator verifies
    /// both candidates, preferring the unrejected one.
    pub verifier_backed: bool,
}

impl Default for RoleSuite {
    fn default() -> Self {
        RoleSuite {
            portfolio: 1,
            alpha0: 1.0,
            beta: 1.0,
            sigma: 0.5,
            nu: 0.0,
            tie_prob: 0.0,
            position_bias: 0.0,
            verifier_backed: false,
        }
    }
}

impl RoleSuite {
    pub fn validate(&self) -> Result<()> {
        if self.portfolio == 0 {
            return Err(CoreError::config("portfolio size must be >= 1"));
        }
        for (name, v) in [
            ("alpha0", self.alpha0),
            ("beta", self.beta),
            ("nu", self.nu),
            ("tie_prob", self.tie_prob),
        ] {
            if !is_prob(v) {
                return Err(CoreError::config(format!("{name} must be in [0,1], got {v}")));
            }
        }
        if !(0.0..=0.5).contains(&self.sigma) {
            return Err(CoreError::config(format!(
                "sigma must be in [0, 0.5], got {}",
                self.sigma
            )));
        }
        if !(-0.5..=0.5).contains(&self.position_bias) {
            return Err(CoreError::config(format!(
                "position_bias must be in [-0.5, 0.5], got {}",
                self.position_bias
            )));
        }
        Ok(())
    }

    /// Effective one-sided rejection probability of the critic gate.
    pub fn critic_edge(&self) -> f64 {
        if self.verifier_backed { 1.0 - self.nu } else { self.beta }
    }
}

/// Samples one candidate from family `family` in the given world.
pub fn propose(world: &SampledWorld, family: usize, rng: &mut Stream) -> Candidate {
    Candidate { sound: rng.chance(world.q(family)) }
}

/// One critic call. Sound candidates are never rejected; unsound ones are
/// rejected with probability exactly `beta` (or `1 - nu` when the suite
/// is verifier-backed).
pub fn critic_call(candidate: Candidate, suite: &RoleSuite, rng: &mut Stream) -> Verdict {
    if suite.verifier_backed {
        return verifier_call(candidate, suite, rng);
    }
    if candidate.sound || !rng.chance(suite.beta) {
        Verdict::Accept
    } else {
        Verdict::Reject
    }
}

/// One verifier call: sound candidates always accepted, unsound ones
/// rejected with probability `1 - nu`.
pub fn verifier_call(candidate: Candidate, suite: &RoleSuite, rng: &mut Stream) -> Verdict {
    if candidate.sound || rng.chance(suite.nu) {
        Verdict::Accept
    } else {
        Verdict::Reject
    }
}

/// Per-vote probabilities `(first, second, tie)` of the parametric
/// comparator for an ordered presentation.
pub fn comparator_vote_law(first: Candidate, second: Candidate, suite: &RoleSuite) -> (f64, f64, f64) {
    let base = match (first.sound, second.sound) {
        (true, false) => 0.5 + suite.sigma,
        (false, true) => 0.5 - suite.sigma,
        _ => 0.5,
    };
    let live = 1.0 - suite.tie_prob;
    let p_first = (base * live + suite.position_bias).clamp(0.0, live);
    (p_first, live - p_first, suite.tie_prob)
}

/// One comparator vote over an ordered presentation.
pub fn comparator_call(
    first: Candidate,
    second: Candidate,
    suite: &RoleSuite,
    rng: &mut Stream,
) -> PairVote {
    if suite.verifier_backed {
        let first_ok = verifier_call(first, suite, rng) == Verdict::Accept;
        let second_ok = verifier_call(second, suite, rng) == Verdict::Accept;
        return match (first_ok, second_ok) {
            (true, false) => PairVote::First,
            (false, true) => PairVote::Second,
            // Both accepted or both rejected: break the tie uniformly.
            _ => {
                if rng.chance(0.5) {
                    PairVote::First
                } else {
                    PairVote::Second
                }
            }
        };
    }
    let (p_first, _, p_tie) = comparator_vote_law(first, second, suite);
    let u = rng.next_f64();
    if u < p_tie {
        PairVote::Tie
    } else if u < p_tie + p_first {
        PairVote::First
    } else {
        PairVote::Second
    }
}

/// Suite whose critic is the verifier and whose comparator verifies both
/// candidates, picking the unrejected one when exactly one is rejected
/// and breaking remaining ties uniformly. The measured edges satisfy
/// `beta = 1 - nu` and `sigma = (1 - nu) / 2`.
pub fn derive_roles_from_verifier(suite: &RoleSuite) -> RoleSuite {
    RoleSuite {
        beta: 1.0 - suite.nu,
        sigma: (1.0 - suite.nu) / 2.0,
        tie_prob: 0.0,
        position_bias: 0.0,
        verifier_backed: true,
        ..*suite
    }
}
