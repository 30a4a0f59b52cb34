//! Monte Carlo estimation with Wilson intervals for every analytic
//! quantity.
//!
//! Trials distribute across a rayon pool; each trial derives its streams
//! from `(master seed, trial index)` and the merge is an associative
//! integer tally, so results are bit-identical regardless of worker
//! count or scheduling.

use crate::error::{CoreError, Result};
use crate::protocol::{run_trajectory, ProtocolConfig, RoleCallCounts, TrialEnd};
use crate::role_models::{propose, sample_world, LatentModel, RoleSuite};
use crate::state_system::StateSystem;
use crate::stats::wilson99;
use crate::streams::{StreamRole, TrialStreams};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;

pub use crate::exact::exact_chain_success;

/// Which quantity an estimate measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    Err,
    EpsProp,
    EpsLoc,
    POracle,
    P1,
    PSystem,
    SuccessRate,
    PropMissRate,
    IdMissRate,
    LocalFailureRate,
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            MetricId::Err => "err",
            MetricId::EpsProp => "eps_prop",
            MetricId::EpsLoc => "eps_loc",
            MetricId::POracle => "p_oracle",
            MetricId::P1 => "p1",
            MetricId::PSystem => "p_system",
            MetricId::SuccessRate => "success_rate",
            MetricId::PropMissRate => "prop_miss_rate",
            MetricId::IdMissRate => "id_miss_rate",
            MetricId::LocalFailureRate => "local_failure_rate",
        };
        f.write_str(name)
    }
}

/// A proportion estimate with its Wilson 99% interval and provenance.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub metric: MetricId,
    pub point: f64,
    pub hits: u64,
    pub trials: u64,
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
}

impl Estimate {
    pub fn proportion(metric: MetricId, hits: u64, trials: u64, seed: u64) -> Estimate {
        let (lo, hi) = wilson99(hits, trials);
        Estimate { metric, point: hits as f64 / trials as f64, hits, trials, lo, hi, seed }
    }

    pub fn half_width(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct ErrTally {
    success: u64,
    prop_miss: u64,
    id_miss: u64,
    local_failure: u64,
    first_step_sound: u64,
    first_step_error: u64,
    calls: RoleCallCounts,
}

impl ErrTally {
    fn merge(mut self, other: ErrTally) -> ErrTally {
        self.success += other.success;
        self.prop_miss += other.prop_miss;
        self.id_miss += other.id_miss;
        self.local_failure += other.local_failure;
        self.first_step_sound += other.first_step_sound;
        self.first_step_error += other.first_step_error;
        self.calls.add(&other.calls);
        self
    }
}

/// Full-protocol failure estimate with the event-rate breakdown and
/// role-call totals.
#[derive(Debug, Clone)]
pub struct ErrSummary {
    pub err: Estimate,
    pub success: Estimate,
    pub prop_miss: Estimate,
    pub id_miss: Estimate,
    pub local_failure: Estimate,
    /// Fraction of trials whose first step proposed a sound candidate.
    pub first_step_coverage: Estimate,
    /// Fraction of trials whose first step was not clean: the empirical
    /// one-step committee error, directly comparable to the local bound.
    pub eps_loc: Estimate,
    pub calls: RoleCallCounts,
}

/// Monte Carlo estimate of `err`: the fraction of failed trajectories.
pub fn mc_err(
    system: &StateSystem,
    config: &ProtocolConfig,
    suite: &RoleSuite,
    model: &LatentModel,
    trials: u64,
    seed: u64,
) -> ErrSummary {
    let tally = (0..trials)
        .into_par_iter()
        .fold(ErrTally::default, |mut acc, trial| {
            let outcome = run_trajectory(system, config, suite, model, seed, trial);
            match outcome.end {
                TrialEnd::Success => acc.success += 1,
                TrialEnd::PropMiss => acc.prop_miss += 1,
                TrialEnd::IdMiss => acc.id_miss += 1,
                TrialEnd::LocalFailure => acc.local_failure += 1,
            }
            acc.first_step_sound += outcome.first_step_had_sound as u64;
            acc.first_step_error +=
                (outcome.events[0] != crate::protocol::StepEvent::Clean) as u64;
            acc.calls.add(&outcome.calls);
            acc
        })
        .reduce(ErrTally::default, ErrTally::merge);
    let failures = trials - tally.success;
    ErrSummary {
        err: Estimate::proportion(MetricId::Err, failures, trials, seed),
        success: Estimate::proportion(MetricId::SuccessRate, tally.success, trials, seed),
        prop_miss: Estimate::proportion(MetricId::PropMissRate, tally.prop_miss, trials, seed),
        id_miss: Estimate::proportion(MetricId::IdMissRate, tally.id_miss, trials, seed),
        local_failure: Estimate::proportion(
            MetricId::LocalFailureRate,
            tally.local_failure,
            trials,
            seed,
        ),
        first_step_coverage: Estimate::proportion(
            MetricId::POracle,
            tally.first_step_sound,
            trials,
            seed,
        ),
        eps_loc: Estimate::proportion(MetricId::EpsLoc, tally.first_step_error, trials, seed),
        calls: tally.calls,
    }
}

/// Monte Carlo estimate of the proposer-miss probability: the fraction
/// of trials where all `k` round-robin proposals are unsound.
pub fn mc_eps_prop(
    model: &LatentModel,
    families: usize,
    k: usize,
    trials: u64,
    seed: u64,
) -> Estimate {
    let misses: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let streams = TrialStreams::new(seed, trial);
            let mut world_rng = streams.stream(0, StreamRole::World, 0, 0);
            let world = sample_world(model, &mut world_rng);
            let all_unsound = (0..k).all(|i| {
                let mut rng = streams.stream(0, StreamRole::Proposer, i as u32, 0);
                !propose(&world, i % families, &mut rng).sound
            });
            all_unsound as u64
        })
        .sum();
    Estimate::proportion(MetricId::EpsProp, misses, trials, seed)
}

/// One point of a best-of-`k` curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvePoint {
    pub k: u64,
    pub estimate: Estimate,
}

/// A monotone-by-construction oracle curve over a `k` grid.
#[derive(Debug, Clone, Serialize)]
pub struct CurveEstimate {
    pub points: Vec<CurvePoint>,
    pub monotone: bool,
}

/// Monte Carlo oracle best-of-`k` curve with coupled prefix sampling:
/// each trial draws one proposal sequence and every grid point reuses
/// its prefix, so the empirical curve cannot decrease.
pub fn mc_oracle_curve(
    model: &LatentModel,
    families: usize,
    grid: &[u64],
    trials: u64,
    seed: u64,
) -> Result<CurveEstimate> {
    if grid.is_empty() {
        return Err(CoreError::config("oracle curve needs a nonempty k grid"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoreError::config("oracle curve grid must be strictly increasing"));
    }
    let max_k = *grid.last().expect("nonempty");
    let hits = (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; grid.len()],
            |mut acc, trial| {
                let streams = TrialStreams::new(seed, trial);
                let mut world_rng = streams.stream(0, StreamRole::World, 0, 0);
                let world = sample_world(model, &mut world_rng);
                let mut first_sound = max_k;
                for i in 0..max_k {
                    let mut rng = streams.stream(0, StreamRole::Proposer, i as u32, 0);
                    if propose(&world, i as usize % families, &mut rng).sound {
                        first_sound = i;
                        break;
                    }
                }
                for (slot, k) in grid.iter().enumerate() {
                    if first_sound < *k {
                        acc[slot] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; grid.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let points: Vec<CurvePoint> = grid
        .iter()
        .zip(&hits)
        .map(|(k, h)| CurvePoint {
            k: *k,
            estimate: Estimate::proportion(MetricId::POracle, *h, trials, seed),
        })
        .collect();
    let monotone = points.windows(2).all(|w| w[0].estimate.point <= w[1].estimate.point);
    Ok(CurveEstimate { points, monotone })
}

/// Mutually exclusive, exhaustive partition of task outcomes by what the
/// hidden verdicts allowed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    /// The selected candidate passes.
    pub solved: u64,
    /// Some candidate passes but the selected one does not.
    pub oracle_reachable_missed: u64,
    /// No candidate passes.
    pub oracle_unreachable: u64,
}

impl Decomposition {
    pub fn total(&self) -> u64 {
        self.solved + self.oracle_reachable_missed + self.oracle_unreachable
    }
}

/// Partition outcomes of `(chosen candidate passes, any candidate
/// passes)` pairs.
pub fn failure_decomposition(outcomes: impl IntoIterator<Item = (bool, bool)>) -> Decomposition {
    let mut d = Decomposition::default();
    for (chosen_ok, any_ok) in outcomes {
        if chosen_ok {
            d.solved += 1;
        } else if any_ok {
            d.oracle_reachable_missed += 1;
        } else {
            d.oracle_unreachable += 1;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{common_shock_eps, eps_prop_exchangeable};
    use crate::protocol::{DebiasMode, GateMode, TournamentRule};
    use crate::role_models::PointMass;

    fn config(k: usize, m: u32, r: u32) -> ProtocolConfig {
        ProtocolConfig {
            k,
            m,
            r,
            gate: GateMode::RejectAny,
            rule: TournamentRule::Copeland,
            debias: DebiasMode::SingleOrder,
        }
    }

    #[test]
    fn mc_err_trivial_cases() {
        let system = StateSystem::make_chain_task(2, 2, 1).unwrap();
        let suite = RoleSuite { portfolio: 1, ..RoleSuite::default() };
        let perfect = LatentModel::PointMass { masses: vec![PointMass { q: 1.0, weight: 1.0 }] };
        let summary = mc_err(&system, &config(2, 1, 1), &suite, &perfect, 2_000, 1);
        assert_eq!(summary.err.hits, 0);
        assert_eq!(summary.success.hits, 2_000);

        let dead = LatentModel::CommonShock { rho: 1.0, alpha: 0.0 };
        let summary = mc_err(&system, &config(2, 0, 1), &suite, &dead, 2_000, 1);
        assert_eq!(summary.err.hits, 2_000);
        assert_eq!(summary.prop_miss.hits, 2_000);
    }

    #[test]
    fn event_rates_partition_exactly() {
        let system = StateSystem::make_chain_task(3, 4, 2).unwrap();
        let suite = RoleSuite { portfolio: 2, beta: 0.6, sigma: 0.2, ..RoleSuite::default() };
        let model = LatentModel::PointMass {
            masses: vec![PointMass { q: 0.0, weight: 0.2 }, PointMass { q: 0.6, weight: 0.8 }],
        };
        let trials = 20_000;
        let summary = mc_err(&system, &config(4, 1, 3), &suite, &model, trials, 7);
        assert_eq!(
            summary.success.hits
                + summary.prop_miss.hits
                + summary.id_miss.hits
                + summary.local_failure.hits,
            trials
        );
        assert_eq!(summary.err.hits + summary.success.hits, trials);
    }

    #[test]
    fn mc_eps_prop_matches_closed_forms() {
        let model = LatentModel::PointMass {
            masses: vec![PointMass { q: 0.0, weight: 0.3 }, PointMass { q: 0.5, weight: 0.7 }],
        };
        let trials = 100_000;
        let est = mc_eps_prop(&model, 1, 2, trials, 3);
        let exact = eps_prop_exchangeable(&model, 2).unwrap().eps;
        assert!(est.lo <= exact && exact <= est.hi, "0.475 outside [{}, {}]", est.lo, est.hi);

        let shock = LatentModel::CommonShock { rho: 0.2, alpha: 0.9 };
        let est = mc_eps_prop(&shock, 1, 4, trials, 3);
        let exact = common_shock_eps(0.2, 0.9, 4);
        assert!(est.lo <= exact && exact <= est.hi, "{exact} outside [{}, {}]", est.lo, est.hi);

        let certain = LatentModel::PointMass { masses: vec![PointMass { q: 1.0, weight: 1.0 }] };
        let est = mc_eps_prop(&certain, 1, 3, 1_000, 3);
        assert_eq!(est.hits, 0);
    }

    #[test]
    fn oracle_curve_is_monotone_and_converges_to_floor() {
        let model = LatentModel::PointMass {
            masses: vec![PointMass { q: 0.0, weight: 0.3 }, PointMass { q: 0.5, weight: 0.7 }],
        };
        let grid = [1, 2, 4, 8, 16, 32, 64];
        let curve = mc_oracle_curve(&model, 1, &grid, 100_000, 5).unwrap();
        assert!(curve.monotone);
        let last = curve.points.last().unwrap().estimate;
        assert!(
            (last.point - 0.7).abs() <= 2.0 * last.half_width() + 0.01,
            "floor estimate {}",
            last.point
        );

        let blind = LatentModel::PointMass { masses: vec![PointMass { q: 0.0, weight: 1.0 }] };
        let curve = mc_oracle_curve(&blind, 1, &[1, 2, 4], 2_000, 5).unwrap();
        assert!(curve.points.iter().all(|p| p.estimate.hits == 0));

        assert!(mc_oracle_curve(&blind, 1, &[], 10, 5).is_err());
        assert!(mc_oracle_curve(&blind, 1, &[2, 2], 10, 5).is_err());
    }

    #[test]
    fn oracle_curve_k1_equals_p1_stream_coupling() {
        // The k = 1 grid point and a direct single-proposal estimate use
        // the same streams, so they agree exactly.
        let model = LatentModel::PointMass {
            masses: vec![PointMass { q: 0.0, weight: 0.4 }, PointMass { q: 0.3, weight: 0.6 }],
        };
        let trials = 20_000;
        let curve = mc_oracle_curve(&model, 1, &[1, 4], trials, 9).unwrap();
        let direct = mc_eps_prop(&model, 1, 1, trials, 9);
        assert_eq!(curve.points[0].estimate.hits + direct.hits, trials);
    }

    #[test]
    fn eps_loc_is_dominated_by_the_local_bound() {
        let system = StateSystem::make_chain_task(3, 4, 2).unwrap();
        let suite = RoleSuite { portfolio: 1, beta: 0.8, sigma: 0.3, ..RoleSuite::default() };
        let model = LatentModel::PointMass { masses: vec![PointMass { q: 0.7, weight: 1.0 }] };
        let summary = mc_err(&system, &config(4, 2, 3), &suite, &model, 50_000, 19);
        let eps_prop = eps_prop_exchangeable(&model, 4).unwrap().eps;
        let report = crate::bounds::local_error_bound(eps_prop, 4, 2, 3, 0.8, 0.3);
        assert!(
            summary.eps_loc.point <= report.local_clamped + summary.eps_loc.half_width(),
            "eps_loc {} above local bound {}",
            summary.eps_loc.point,
            report.local_clamped
        );
        // The first step fails at least as often as no candidate covers.
        assert!(summary.eps_loc.hits + summary.first_step_coverage.hits >= 50_000);
    }

    #[test]
    fn mc_matches_exact_oracle_on_smoke_scenario() {
        let system = StateSystem::make_chain_task(3, 4, 2).unwrap();
        let suite = RoleSuite { portfolio: 1, beta: 0.8, sigma: 0.3, ..RoleSuite::default() };
        let model = LatentModel::PointMass { masses: vec![PointMass { q: 0.9, weight: 1.0 }] };
        let cfg = config(4, 2, 3);
        let exact = exact_chain_success(&system, &cfg, &suite, &model).unwrap();
        let summary = mc_err(&system, &cfg, &suite, &model, 100_000, 11);
        let mc_success = summary.success;
        assert!(
            mc_success.lo <= exact && exact <= mc_success.hi,
            "exact {exact} outside [{}, {}]",
            mc_success.lo,
            mc_success.hi
        );
    }

    #[test]
    fn beta_mixture_sampling_matches_quadrature() {
        let model =
            LatentModel::BetaMixture { shape_a: 2.0, shape_b: 5.0, blind_mass: 0.15 };
        let trials = 100_000;
        for k in [1usize, 3, 8] {
            let est = mc_eps_prop(&model, 1, k, trials, 23);
            let exact = eps_prop_exchangeable(&model, k as u64).unwrap().eps;
            assert!(
                (est.point - exact).abs() <= 1.5 * est.half_width(),
                "k={k}: mc {} vs quadrature {exact}",
                est.point
            );
        }
    }

    #[test]
    fn ci_half_width_scales_inverse_sqrt() {
        let model = LatentModel::PointMass { masses: vec![PointMass { q: 0.7, weight: 1.0 }] };
        let a = mc_eps_prop(&model, 1, 2, 20_000, 13);
        let b = mc_eps_prop(&model, 1, 2, 40_000, 13);
        let ratio = b.half_width() / a.half_width();
        let expected = 1.0 / 2.0f64.sqrt();
        assert!((ratio - expected).abs() / expected < 0.2, "ratio {ratio}");
    }

    #[test]
    fn decomposition_partitions() {
        let d = failure_decomposition([
            (true, true),
            (false, true),
            (false, false),
            (true, true),
        ]);
        assert_eq!(d.solved, 2);
        assert_eq!(d.oracle_reachable_missed, 1);
        assert_eq!(d.oracle_unreachable, 1);
        assert_eq!(d.total(), 4);
    }
}
