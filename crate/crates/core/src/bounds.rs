//! Closed-form evaluation of the protocol's error bounds, blind-spot
//! floors, oracle curves, and resource-sizing rules.
//!
//! Point-mass expectations are exact (compensated summation); the beta
//! mixture integrates by adaptive quadrature to absolute tolerance 1e-10.
//! Bounds above 1 are reported raw and clamped; comparisons against Monte
//! Carlo use the clamped value.

use crate::error::{CoreError, Result};
use crate::numeric::{adaptive_simpson, compensated_sum};
use crate::role_models::LatentModel;
use serde::Serialize;

/// Quadrature tolerance for beta-mixture expectations.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Proposer-miss probability split into its blind-spot floor and
/// finite-sampling residual.
#[derive(Debug, Clone, Copy)]
pub struct EpsPropSplit {
    /// `E[(1 - q)^k]`.
    pub eps: f64,
    /// Mass on `q = 0`.
    pub blind: f64,
    /// `E[(1 - q)^k ; q > 0]`.
    pub residual: f64,
}

/// `E[(1 - q)^k]` for exchangeable-`q` models: exact for point masses
/// (and the common-shock equivalent mixture), quadrature for the beta
/// mixture.
pub fn eps_prop_exchangeable(model: &LatentModel, k: u64) -> Result<EpsPropSplit> {
    if let Some(masses) = model.as_point_masses() {
        let blind = compensated_sum(masses.iter().filter(|m| m.q == 0.0).map(|m| m.weight));
        let residual = compensated_sum(
            masses
                .iter()
                .filter(|m| m.q > 0.0)
                .map(|m| m.weight * (1.0 - m.q).powi(k as i32)),
        );
        return Ok(EpsPropSplit { eps: blind + residual, blind, residual });
    }
    match model {
        LatentModel::BetaMixture { shape_a, shape_b, blind_mass } => {
            if *shape_a < 1.0 || *shape_b < 1.0 {
                return Err(CoreError::Numeric(
                    "beta-mixture quadrature requires shapes >= 1 (bounded density)".into(),
                ));
            }
            let density = |q: f64| q.powf(shape_a - 1.0) * (1.0 - q).powf(shape_b - 1.0);
            let weighted = adaptive_simpson(
                |q| (1.0 - q).powi(k as i32) * density(q),
                0.0,
                1.0,
                QUADRATURE_TOL,
            )?;
            let norm = adaptive_simpson(density, 0.0, 1.0, QUADRATURE_TOL)?;
            let residual = (1.0 - blind_mass) * weighted / norm;
            Ok(EpsPropSplit { eps: blind_mass + residual, blind: *blind_mass, residual })
        }
        _ => Err(CoreError::config(
            "eps_prop_exchangeable needs a point-mass, common-shock, or beta-mixture model",
        )),
    }
}

/// Common-shock proposer miss: `rho (1 - alpha) + (1 - rho)(1 - alpha)^k`.
pub fn common_shock_eps(rho: f64, alpha: f64, k: u64) -> f64 {
    rho * (1.0 - alpha) + (1.0 - rho) * (1.0 - alpha).powi(k as i32)
}

/// Exact proposer-miss probability of `k` round-robin calls over a
/// `portfolio`-prompt suite: the exchangeable expectation for shared-`q`
/// models, the heterogeneous product for per-family models.
pub fn eps_prop_for_protocol(model: &LatentModel, portfolio: usize, k: u64) -> Result<f64> {
    match model {
        LatentModel::PerFamily { rates, .. } => {
            let families = rates[0].len();
            let mut counts = vec![0u64; families];
            for i in 0..k {
                counts[(i as usize % portfolio) % families] += 1;
            }
            Ok(heterogeneous_miss(model, &counts)?.0)
        }
        _ => Ok(eps_prop_exchangeable(model, k)?.eps),
    }
}

/// Heterogeneous-portfolio oracle miss: the exact product expectation and
/// its exponential upper bound `E[e^-Q(Z)]`, `Q(Z) = sum_g n_g q_g(Z)`.
pub fn heterogeneous_miss(model: &LatentModel, counts: &[u64]) -> Result<(f64, f64)> {
    let LatentModel::PerFamily { weights, rates } = model else {
        return Err(CoreError::config("heterogeneous_miss needs a per-family model"));
    };
    if counts.len() != rates[0].len() {
        return Err(CoreError::config(format!(
            "got {} call counts for {} families",
            counts.len(),
            rates[0].len()
        )));
    }
    let exact = compensated_sum(weights.iter().zip(rates).map(|(w, row)| {
        w * row
            .iter()
            .zip(counts)
            .map(|(q, n)| (1.0 - q).powi(*n as i32))
            .product::<f64>()
    }));
    let exp_bound = compensated_sum(weights.iter().zip(rates).map(|(w, row)| {
        let q_total: f64 = row.iter().zip(counts).map(|(q, n)| *n as f64 * q).sum();
        w * (-q_total).exp()
    }));
    debug_assert!(exact <= exp_bound + 1e-12);
    Ok((exact, exp_bound))
}

/// Finite-sampling residual bound. With a floor `tau` on positive
/// proposal mass: `e^(-tau k)`. Otherwise the polynomial lower-tail
/// bound `C (a ln k / k)^a + k^-a`, valid when `a ln k / k < 1`.
pub fn lower_tail_residual_bound(c: f64, a: f64, k: u64, tau_floor: Option<f64>) -> Result<f64> {
    if let Some(tau) = tau_floor {
        if tau <= 0.0 {
            return Err(CoreError::config("tau floor must be positive"));
        }
        return Ok((-tau * k as f64).exp());
    }
    if c <= 0.0 || a <= 0.0 {
        return Err(CoreError::config("lower-tail constants C, a must be positive"));
    }
    let kf = k as f64;
    let t_k = a * kf.ln() / kf;
    if t_k >= 1.0 {
        return Err(CoreError::config(format!(
            "k = {k} too small for lower-tail bound: a ln(k)/k = {t_k} >= 1"
        )));
    }
    Ok(c * t_k.powf(a) + kf.powf(-a))
}

/// Local one-step error bound and its pieces.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundReport {
    pub eps_prop: f64,
    /// `k^2 (1 - beta)^m e^(-2 r sigma^2)`.
    pub id_term: f64,
    /// Looser `k^2 e^(-beta m - 2 r sigma^2)`.
    pub id_term_exp: f64,
    /// `eps_prop + id_term`, unclamped.
    pub local_raw: f64,
    pub local_clamped: f64,
    /// Raw bound using the exponential identification term.
    pub local_exp_raw: f64,
    pub local_exp_clamped: f64,
    /// True when the raw local bound exceeded 1.
    pub clamped: bool,
}

impl BoundReport {
    /// Cumulative bound over a depth-`L` trajectory: `(raw, clamped)`.
    pub fn global(&self, depth: u32) -> (f64, f64) {
        let raw = depth as f64 * self.local_raw;
        (raw, raw.min(1.0))
    }
}

/// One-step error decomposition: proposer miss plus identification miss.
pub fn local_error_bound(
    eps_prop: f64,
    k: u64,
    m: u64,
    r: u64,
    beta: f64,
    sigma: f64,
) -> BoundReport {
    let k2 = (k as f64) * (k as f64);
    let vote_decay = (-2.0 * r as f64 * sigma * sigma).exp();
    let id_term = k2 * (1.0 - beta).powi(m as i32) * vote_decay;
    let id_term_exp = k2 * (-beta * m as f64).exp() * vote_decay;
    let local_raw = eps_prop + id_term;
    let local_exp_raw = eps_prop + id_term_exp;
    BoundReport {
        eps_prop,
        id_term,
        id_term_exp,
        local_raw,
        local_clamped: local_raw.min(1.0),
        local_exp_raw,
        local_exp_clamped: local_exp_raw.min(1.0),
        clamped: local_raw > 1.0,
    }
}

/// Cumulative trajectory bound: `min(1, L * eps_loc)`.
pub fn cumulative_bound(depth: u32, eps_loc: f64) -> f64 {
    (depth as f64 * eps_loc).min(1.0)
}

/// Resource choices `(k, m, r)` for a target failure probability, with
/// the intermediate logarithms retained for audit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SizingResult {
    pub k: u64,
    pub m: u64,
    pub r: u64,
    pub delta: f64,
    pub depth: u32,
    /// `ceil(ln(2L/delta) / alpha0)`: calls per portfolio prompt.
    pub per_prompt_calls: u64,
    /// `ln(2L/delta)`.
    pub log_coverage: f64,
    /// `ln(2 k^2 L / delta)`.
    pub log_identification: f64,
}

/// Explicit parameter choices: `k = |P| ceil(ln(2L/d)/a0)`,
/// `m = ceil(ln(2k^2L/d)/(2 b0))`, `r = ceil(ln(2k^2L/d)/(4 s0^2))`.
pub fn sizing_rule(
    delta: f64,
    depth: u32,
    alpha0: f64,
    beta0: f64,
    sigma0: f64,
    portfolio: u64,
) -> Result<SizingResult> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(CoreError::config(format!("delta must be in (0,1), got {delta}")));
    }
    if depth == 0 || portfolio == 0 {
        return Err(CoreError::config("depth and portfolio size must be >= 1"));
    }
    if alpha0 <= 0.0 || beta0 <= 0.0 || sigma0 <= 0.0 {
        return Err(CoreError::config("sizing needs strictly positive edges"));
    }
    let l = depth as f64;
    let log_coverage = (2.0 * l / delta).ln();
    let per_prompt_calls = (log_coverage / alpha0).ceil() as u64;
    let k = portfolio * per_prompt_calls;
    let log_identification = (2.0 * (k as f64) * (k as f64) * l / delta).ln();
    let m = (log_identification / (2.0 * beta0)).ceil() as u64;
    let r = (log_identification / (4.0 * sigma0 * sigma0)).ceil() as u64;
    Ok(SizingResult {
        k,
        m,
        r,
        delta,
        depth,
        per_prompt_calls,
        log_coverage,
        log_identification,
    })
}

/// Oracle best-of-`k` curve point.
#[derive(Debug, Clone, Copy)]
pub struct OracleCurvePoint {
    /// `1 - E[(1 - q)^k]`.
    pub p_oracle: f64,
    /// Large-`k` limit `1 - P(q = 0)`.
    pub limit: f64,
}

pub fn oracle_curve(model: &LatentModel, k: u64) -> Result<OracleCurvePoint> {
    let split = eps_prop_exchangeable(model, k)?;
    Ok(OracleCurvePoint { p_oracle: 1.0 - split.eps, limit: 1.0 - model.blind_mass() })
}

/// Oracle-gap recovery `(p_system - p1) / (p_oracle - p1)`; undefined
/// when the denominator is not positive.
pub fn recovery(p1: f64, p_oracle: f64, p_system: f64) -> Result<f64> {
    if p_oracle <= p1 {
        return Err(CoreError::UndefinedRecovery { p1, p_oracle });
    }
    Ok((p_system - p1) / (p_oracle - p1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::role_models::PointMass;
    use proptest::prelude::*;

    fn two_mass() -> LatentModel {
        LatentModel::PointMass {
            masses: vec![PointMass { q: 0.0, weight: 0.3 }, PointMass { q: 0.5, weight: 0.7 }],
        }
    }

    #[test]
    fn eps_prop_point_mass_values() {
        let split = eps_prop_exchangeable(&two_mass(), 2).unwrap();
        assert!((split.eps - 0.475).abs() < 1e-15);
        assert!((split.blind - 0.3).abs() < 1e-15);
        assert!((split.residual - 0.175).abs() < 1e-15);

        // Large k converges to the blind-spot floor.
        let split = eps_prop_exchangeable(&two_mass(), 1024).unwrap();
        assert!((split.eps - 0.3).abs() < 1e-12);

        let certain =
            LatentModel::PointMass { masses: vec![PointMass { q: 1.0, weight: 1.0 }] };
        for k in [1, 5, 100] {
            assert_eq!(eps_prop_exchangeable(&certain, k).unwrap().eps, 0.0);
        }
    }

    #[test]
    fn split_identity_is_exact() {
        for k in [1u64, 2, 4, 8, 64, 1024] {
            let split = eps_prop_exchangeable(&two_mass(), k).unwrap();
            assert!((split.eps - (split.blind + split.residual)).abs() < 1e-12);
        }
    }

    #[test]
    fn common_shock_values() {
        assert!((common_shock_eps(0.0, 0.5, 3) - 0.125).abs() < 1e-15);
        for k in [1, 7, 100] {
            assert!((common_shock_eps(1.0, 0.3, k) - 0.7).abs() < 1e-15);
        }
        assert!((common_shock_eps(0.2, 0.9, 4) - 0.02008).abs() < 1e-15);
    }

    #[test]
    fn common_shock_matches_point_mass_route() {
        for (rho, alpha, k) in [(0.2, 0.9, 4), (0.5, 0.3, 7), (0.0, 0.6, 2), (1.0, 0.4, 9)] {
            let model = LatentModel::CommonShock { rho, alpha };
            let via_masses = eps_prop_exchangeable(&model, k).unwrap().eps;
            let via_formula = common_shock_eps(rho, alpha, k);
            assert!((via_masses - via_formula).abs() < 1e-14);
        }
    }

    #[test]
    fn protocol_eps_prop_round_robin() {
        // Adversarial portfolio: only family 0 can succeed; k = 5 over
        // |P| = 2 puts 3 calls on family 0.
        let model = LatentModel::adversarial_portfolio(0.5, 2);
        let eps = eps_prop_for_protocol(&model, 2, 5).unwrap();
        assert!((eps - 0.5f64.powi(3)).abs() < 1e-15);

        // Exchangeable models reduce to the plain expectation.
        let eps = eps_prop_for_protocol(&two_mass(), 4, 2).unwrap();
        assert!((eps - 0.475).abs() < 1e-15);
    }

    #[test]
    fn heterogeneous_miss_values() {
        let certain = LatentModel::PerFamily { weights: vec![1.0], rates: vec![vec![1.0, 0.0]] };
        let (exact, _) = heterogeneous_miss(&certain, &[1, 1]).unwrap();
        assert_eq!(exact, 0.0);

        let blind = LatentModel::PerFamily { weights: vec![1.0], rates: vec![vec![0.0, 0.0]] };
        let (exact, bound) = heterogeneous_miss(&blind, &[3, 2]).unwrap();
        assert_eq!(exact, 1.0);
        assert_eq!(bound, 1.0);

        let one = LatentModel::PerFamily { weights: vec![1.0], rates: vec![vec![0.5]] };
        let (exact, bound) = heterogeneous_miss(&one, &[2]).unwrap();
        assert!((exact - 0.25).abs() < 1e-15);
        assert!((bound - (-1.0f64).exp()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn heterogeneous_exact_below_exp_bound(
            qs in proptest::collection::vec(0.0f64..=1.0, 1..4),
            ns in proptest::collection::vec(0u64..5, 1..4),
            w in 0.1f64..0.9,
        ) {
            let g = qs.len().min(ns.len());
            let rates = vec![qs[..g].to_vec(), qs[..g].iter().map(|q| q / 2.0).collect()];
            let model = LatentModel::PerFamily { weights: vec![w, 1.0 - w], rates };
            let (exact, bound) = heterogeneous_miss(&model, &ns[..g]).unwrap();
            prop_assert!(exact <= bound + 1e-12);
        }

        #[test]
        fn tight_form_dominated_by_exp_form(beta in 0.0f64..=1.0, m in 0u64..50) {
            prop_assert!((1.0 - beta).powi(m as i32) <= (-beta * m as f64).exp() + 1e-12);
        }
    }

    #[test]
    fn lower_tail_values() {
        let v = lower_tail_residual_bound(1.0, 1.0, 50, Some(0.1)).unwrap();
        assert!((v - (-5.0f64).exp()).abs() < 1e-12);

        let v = lower_tail_residual_bound(1.0, 1.0, 100, None).unwrap();
        assert!((v - (100.0f64.ln() / 100.0 + 0.01)).abs() < 1e-12);

        // a ln(k) / k >= 1 rejected.
        assert!(lower_tail_residual_bound(1.0, 5.0, 10, None).is_err());

        // Vanishing limit.
        let v = lower_tail_residual_bound(1.0, 1.0, 1u64 << 40, None).unwrap();
        assert!(v < 1e-7);
    }

    #[test]
    fn local_bound_values() {
        let report = local_error_bound(0.0, 1, 0, 0, 0.5, 0.3);
        assert_eq!(report.local_raw, 1.0);
        assert_eq!(report.local_clamped, 1.0);
        assert!(!report.clamped);

        let report = local_error_bound(0.0, 2, 3, 2, 0.5, 0.5);
        let expected = 4.0 * 0.125 * (-1.0f64).exp();
        assert!((report.id_term - expected).abs() < 1e-12, "{}", report.id_term);

        let report = local_error_bound(0.1, 4, 2, 1, 1.0, 0.2);
        assert_eq!(report.id_term, 0.0);
        assert!((report.local_raw - 0.1).abs() < 1e-15);
    }

    #[test]
    fn cumulative_bound_values() {
        assert!((cumulative_bound(10, 0.01) - 0.1).abs() < 1e-15);
        assert_eq!(cumulative_bound(10, 0.2), 1.0);
        assert_eq!(cumulative_bound(7, 0.0), 0.0);
    }

    #[test]
    fn sizing_rule_pinned_example() {
        let s = sizing_rule(0.05, 10, 0.5, 0.5, 0.25, 2).unwrap();
        assert_eq!((s.k, s.m, s.r), (24, 13, 50));

        let s = sizing_rule(0.05, 1, 1.0, 0.5, 0.25, 1).unwrap();
        assert_eq!(s.k, 4); // ceil(ln 40)

        assert!(sizing_rule(0.05, 10, 0.0, 0.5, 0.25, 2).is_err());
        assert!(sizing_rule(1.5, 10, 0.5, 0.5, 0.25, 2).is_err());
    }

    #[test]
    fn sizing_is_self_consistent() {
        for (delta, depth, alpha0, beta0, sigma0, p) in [
            (0.05, 10, 0.5, 0.5, 0.25, 2u64),
            (0.1, 3, 0.3, 0.6, 0.2, 1),
            (0.01, 20, 0.8, 0.4, 0.1, 4),
        ] {
            let s = sizing_rule(delta, depth, alpha0, beta0, sigma0, p).unwrap();
            let budget = delta / (2.0 * depth as f64);
            let eps_prop = (-alpha0 * (s.k / p) as f64).exp();
            assert!(eps_prop <= budget + 1e-12, "coverage half: {eps_prop} vs {budget}");
            let report = local_error_bound(eps_prop, s.k, s.m, s.r, beta0, sigma0);
            assert!(report.id_term_exp <= budget + 1e-12, "id half: {}", report.id_term_exp);
            assert!(report.local_exp_raw <= delta / depth as f64 + 1e-12);
        }
    }

    #[test]
    fn oracle_curve_values_and_monotonicity() {
        let point = oracle_curve(&two_mass(), 1).unwrap();
        assert!((point.p_oracle - 0.35).abs() < 1e-15);
        assert!((point.limit - 0.7).abs() < 1e-15);

        let mut last = 0.0;
        for k in (0..=10).map(|e| 1u64 << e) {
            let p = oracle_curve(&two_mass(), k).unwrap().p_oracle;
            assert!(p >= last - 1e-15, "not monotone at k={k}");
            last = p;
        }
        assert!((last - 0.7).abs() < 1e-12);

        let certain =
            LatentModel::PointMass { masses: vec![PointMass { q: 1.0, weight: 1.0 }] };
        assert_eq!(oracle_curve(&certain, 3).unwrap().p_oracle, 1.0);
        let blind = LatentModel::PointMass { masses: vec![PointMass { q: 0.0, weight: 1.0 }] };
        assert_eq!(oracle_curve(&blind, 3).unwrap().p_oracle, 0.0);
    }

    #[test]
    fn beta_mixture_quadrature_matches_product_formula() {
        // For q ~ Beta(a, b): E[(1-q)^k] = prod_{i<k} (b + i) / (a + b + i).
        for (a, b, blind, k) in [(2.0, 5.0, 0.0, 3u64), (1.0, 1.0, 0.2, 4), (3.5, 2.0, 0.1, 8)] {
            let model = LatentModel::BetaMixture { shape_a: a, shape_b: b, blind_mass: blind };
            let split = eps_prop_exchangeable(&model, k).unwrap();
            let product: f64 = (0..k).map(|i| (b + i as f64) / (a + b + i as f64)).product();
            let expected = blind + (1.0 - blind) * product;
            assert!((split.eps - expected).abs() < 1e-8, "{} vs {expected}", split.eps);
        }
    }

    #[test]
    fn lower_tail_bound_dominates_beta_residual() {
        // Beta(2, 2) has P(0 < q <= t) = 3t^2 - 2t^3 <= 3 t^2, so the
        // polynomial tail bound with C = 3, a = 2 must dominate the true
        // finite-sampling residual.
        let model = LatentModel::BetaMixture { shape_a: 2.0, shape_b: 2.0, blind_mass: 0.1 };
        for k in [16u64, 64, 256, 1024] {
            let residual = eps_prop_exchangeable(&model, k).unwrap().residual;
            let bound = lower_tail_residual_bound(3.0, 2.0, k, None).unwrap();
            assert!(residual <= bound, "k={k}: residual {residual} > bound {bound}");
        }

        // A point-mass floor tau on positive q gives the exponential rate.
        let floored = LatentModel::PointMass {
            masses: vec![PointMass { q: 0.0, weight: 0.4 }, PointMass { q: 0.25, weight: 0.6 }],
        };
        for k in [8u64, 32, 128] {
            let residual = eps_prop_exchangeable(&floored, k).unwrap().residual;
            let bound = lower_tail_residual_bound(1.0, 1.0, k, Some(0.25)).unwrap();
            assert!(residual <= bound, "k={k}: residual {residual} > bound {bound}");
        }
    }

    #[test]
    fn recovery_values() {
        let r = recovery(0.670, 0.790, 0.764).unwrap();
        assert!((r - 0.7833333333333333).abs() < 5e-4);
        assert!((recovery(0.5, 0.8, 0.8).unwrap() - 1.0).abs() < 1e-15);
        assert!(recovery(0.5, 0.8, 0.5).unwrap().abs() < 1e-15);
        assert!(recovery(0.5, 0.5, 0.7).is_err());
        assert!(recovery(0.6, 0.5, 0.7).is_err());
    }
}
