//! Scenario files: a flat, strictly validated JSON schema that fully
//! specifies a run. Unknown keys are hard errors; validation messages
//! carry field paths. Hashing the canonicalized, resolved scenario
//! yields the run id embedded in every output row.

use crate::error::{LabError, Result};
use committee_core::pool::{GateThreshold, PoolGenConfig};
use committee_core::protocol::{DebiasMode, GateMode, ProtocolConfig, TournamentRule};
use committee_core::role_models::{LatentModel, PointMass, RoleSuite};
use committee_core::state_system::StateSystem;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const ENV_PREFIX: &str = "COMMITTEE_LAB_";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub task: TaskConfig,
    pub latent: LatentConfig,
    pub roles: RolesConfig,
    pub protocol: ProtocolSection,
    pub trials: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pools: Option<PoolSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub depth: u32,
    pub arity: u32,
    pub sound_count: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassConfig {
    pub q: f64,
    pub weight: f64,
}

/// Latent-model section: `kind` selects which of the remaining fields
/// apply; the others must stay absent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<MassConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blind_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolesConfig {
    pub portfolio: usize,
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    pub beta: f64,
    pub sigma: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default)]
    pub tie_prob: f64,
    #[serde(default)]
    pub position_bias: f64,
    /// Derive the critic and comparator from the one-sided verifier.
    #[serde(default)]
    pub verifier_backed: bool,
}

fn default_alpha0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub k: usize,
    pub m: u32,
    pub r: u32,
    #[serde(default)]
    pub gate: GateConfig,
    #[serde(default = "default_rule")]
    pub rule: TournamentRule,
    #[serde(default = "default_debias")]
    pub debias: DebiasMode,
}

fn default_rule() -> TournamentRule {
    TournamentRule::Copeland
}

fn default_debias() -> DebiasMode {
    DebiasMode::SingleOrder
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<u32>,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig { mode: "reject_any".into(), tau: None }
    }
}

/// Verification grid; absent axes fall back to the default grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_grid_depth")]
    pub depth: Vec<u32>,
    #[serde(default = "default_grid_k")]
    pub k: Vec<usize>,
    #[serde(default = "default_grid_m")]
    pub m: Vec<u32>,
    #[serde(default = "default_grid_r")]
    pub r: Vec<u32>,
    #[serde(default = "default_grid_beta")]
    pub beta: Vec<f64>,
    #[serde(default = "default_grid_sigma")]
    pub sigma: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            depth: default_grid_depth(),
            k: default_grid_k(),
            m: default_grid_m(),
            r: default_grid_r(),
            beta: default_grid_beta(),
            sigma: default_grid_sigma(),
        }
    }
}

fn default_grid_depth() -> Vec<u32> {
    vec![1, 3, 10]
}
fn default_grid_k() -> Vec<usize> {
    vec![2, 4, 8]
}
fn default_grid_m() -> Vec<u32> {
    vec![1, 2, 4]
}
fn default_grid_r() -> Vec<u32> {
    vec![1, 3, 5]
}
fn default_grid_beta() -> Vec<f64> {
    vec![0.5, 0.8]
}
fn default_grid_sigma() -> Vec<f64> {
    vec![0.1, 0.3]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSection {
    pub count: u64,
    pub k: usize,
    pub judge_votes: u32,
    pub comparator_votes: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hybrid_gate: Option<HybridGateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote_grid: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridGateConfig {
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::config(format!("cannot read scenario {}: {e}", path.display())))?;
        let scenario: Scenario = serde_json::from_str(&text)
            .map_err(|e| LabError::config(format!("scenario {}: {e}", path.display())))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Builds every core object once to surface validation errors with
    /// field paths.
    pub fn validate(&self) -> Result<()> {
        self.build_system()?;
        let model = self.build_model()?;
        model.validate().map_err(|e| LabError::config(format!("latent: {e}")))?;
        let suite = self.build_suite();
        suite.validate().map_err(|e| LabError::config(format!("roles: {e}")))?;
        let config = self.build_protocol()?;
        config.validate().map_err(|e| LabError::config(format!("protocol: {e}")))?;
        if let LatentModel::PerFamily { rates, .. } = &model {
            if rates[0].len() < suite.portfolio {
                return Err(LabError::config(format!(
                    "latent.rates: {} families but roles.portfolio is {}",
                    rates[0].len(),
                    suite.portfolio
                )));
            }
        }
        if let Some(pools) = &self.pools {
            if pools.k == 0 || pools.count == 0 {
                return Err(LabError::config("pools.k and pools.count must be >= 1"));
            }
            if let Some(gate) = &pools.hybrid_gate {
                hybrid_gate_threshold(gate)?;
            }
        }
        Ok(())
    }

    pub fn build_system(&self) -> Result<StateSystem> {
        StateSystem::make_chain_task(self.task.depth, self.task.arity, self.task.sound_count)
            .map_err(|e| LabError::config(format!("task: {e}")))
    }

    pub fn build_suite(&self) -> RoleSuite {
        let base = RoleSuite {
            portfolio: self.roles.portfolio,
            alpha0: self.roles.alpha0,
            beta: self.roles.beta,
            sigma: self.roles.sigma,
            nu: self.roles.nu,
            tie_prob: self.roles.tie_prob,
            position_bias: self.roles.position_bias,
            verifier_backed: false,
        };
        if self.roles.verifier_backed {
            committee_core::role_models::derive_roles_from_verifier(&base)
        } else {
            base
        }
    }

    pub fn build_model(&self) -> Result<LatentModel> {
        let l = &self.latent;
        let forbid = |field: &str, set: bool| -> Result<()> {
            if set {
                Err(LabError::config(format!(
                    "latent.{field} does not apply to kind {:?}",
                    l.kind
                )))
            } else {
                Ok(())
            }
        };
        match l.kind.as_str() {
            "point_mass" => {
                forbid("rho", l.rho.is_some())?;
                forbid("alpha", l.alpha.is_some())?;
                forbid("shape_a", l.shape_a.is_some())?;
                forbid("shape_b", l.shape_b.is_some())?;
                forbid("blind_mass", l.blind_mass.is_some())?;
                forbid("weights", l.weights.is_some())?;
                forbid("rates", l.rates.is_some())?;
                let masses = l
                    .masses
                    .as_ref()
                    .ok_or_else(|| LabError::config("latent.masses required for point_mass"))?;
                Ok(LatentModel::PointMass {
                    masses: masses.iter().map(|m| PointMass { q: m.q, weight: m.weight }).collect(),
                })
            }
            "common_shock" => {
                forbid("masses", l.masses.is_some())?;
                forbid("shape_a", l.shape_a.is_some())?;
                forbid("shape_b", l.shape_b.is_some())?;
                forbid("blind_mass", l.blind_mass.is_some())?;
                forbid("weights", l.weights.is_some())?;
                forbid("rates", l.rates.is_some())?;
                let rho =
                    l.rho.ok_or_else(|| LabError::config("latent.rho required for common_shock"))?;
                let alpha = l
                    .alpha
                    .ok_or_else(|| LabError::config("latent.alpha required for common_shock"))?;
                Ok(LatentModel::CommonShock { rho, alpha })
            }
            "beta_mixture" => {
                forbid("masses", l.masses.is_some())?;
                forbid("rho", l.rho.is_some())?;
                forbid("alpha", l.alpha.is_some())?;
                forbid("weights", l.weights.is_some())?;
                forbid("rates", l.rates.is_some())?;
                let shape_a = l
                    .shape_a
                    .ok_or_else(|| LabError::config("latent.shape_a required for beta_mixture"))?;
                let shape_b = l
                    .shape_b
                    .ok_or_else(|| LabError::config("latent.shape_b required for beta_mixture"))?;
                Ok(LatentModel::BetaMixture {
                    shape_a,
                    shape_b,
                    blind_mass: l.blind_mass.unwrap_or(0.0),
                })
            }
            "per_family" => {
                forbid("masses", l.masses.is_some())?;
                forbid("rho", l.rho.is_some())?;
                forbid("alpha", l.alpha.is_some())?;
                forbid("shape_a", l.shape_a.is_some())?;
                forbid("shape_b", l.shape_b.is_some())?;
                forbid("blind_mass", l.blind_mass.is_some())?;
                let weights = l
                    .weights
                    .as_ref()
                    .ok_or_else(|| LabError::config("latent.weights required for per_family"))?;
                let rates = l
                    .rates
                    .as_ref()
                    .ok_or_else(|| LabError::config("latent.rates required for per_family"))?;
                Ok(LatentModel::PerFamily { weights: weights.clone(), rates: rates.clone() })
            }
            other => Err(LabError::config(format!(
                "latent.kind {other:?} is not one of point_mass, common_shock, beta_mixture, per_family"
            ))),
        }
    }

    pub fn build_protocol(&self) -> Result<ProtocolConfig> {
        let gate = match self.protocol.gate.mode.as_str() {
            "reject_any" => {
                if self.protocol.gate.tau.is_some() {
                    return Err(LabError::config("protocol.gate.tau does not apply to reject_any"));
                }
                GateMode::RejectAny
            }
            "yes_threshold" => {
                let tau = self.protocol.gate.tau.ok_or_else(|| {
                    LabError::config("protocol.gate.tau required for yes_threshold")
                })?;
                GateMode::YesThreshold { tau }
            }
            other => {
                return Err(LabError::config(format!(
                    "protocol.gate.mode {other:?} is not one of reject_any, yes_threshold"
                )))
            }
        };
        Ok(ProtocolConfig {
            k: self.protocol.k,
            m: self.protocol.m,
            r: self.protocol.r,
            gate,
            rule: self.protocol.rule,
            debias: self.protocol.debias,
        })
    }

    pub fn pool_gen_config(&self) -> Result<(PoolGenConfig, u64)> {
        let pools = self
            .pools
            .as_ref()
            .ok_or_else(|| LabError::config("scenario has no pools section"))?;
        Ok((
            PoolGenConfig {
                k: pools.k,
                judge_votes: pools.judge_votes,
                comparator_votes: pools.comparator_votes,
            },
            pools.count,
        ))
    }

    /// Full scenario hash over the canonical (sorted-key) JSON form.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("scenario serializes");
        let canonical = serde_json::to_string(&value).expect("canonical form");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Short run id embedded in output rows.
    pub fn run_id(&self) -> String {
        self.hash()[..12].to_string()
    }
}

pub fn hybrid_gate_threshold(gate: &HybridGateConfig) -> Result<GateThreshold> {
    match gate.mode.as_str() {
        "yes_rate" => {
            if gate.count.is_some() {
                return Err(LabError::config("pools.hybrid_gate.count does not apply to yes_rate"));
            }
            let rate = gate
                .rate
                .ok_or_else(|| LabError::config("pools.hybrid_gate.rate required for yes_rate"))?;
            if !(0.0..=1.0).contains(&rate) {
                return Err(LabError::config("pools.hybrid_gate.rate must be in [0,1]"));
            }
            Ok(GateThreshold::YesRate { rate })
        }
        "yes_count" => {
            if gate.rate.is_some() {
                return Err(LabError::config("pools.hybrid_gate.rate does not apply to yes_count"));
            }
            let count = gate
                .count
                .ok_or_else(|| LabError::config("pools.hybrid_gate.count required for yes_count"))?;
            Ok(GateThreshold::YesCount { count })
        }
        other => Err(LabError::config(format!(
            "pools.hybrid_gate.mode {other:?} is not one of yes_rate, yes_count"
        ))),
    }
}

/// CLI-level overrides applied to a parsed scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub out: Option<PathBuf>,
    pub allow_env_override: bool,
}

fn env_u64(name: &str) -> Result<Option<u64>> {
    match std::env::var(format!("{ENV_PREFIX}{name}")) {
        Ok(v) => v
            .parse()
            .map(Some)
            .map_err(|_| LabError::config(format!("{ENV_PREFIX}{name} is not an integer: {v:?}"))),
        Err(_) => Ok(None),
    }
}

/// Resolution order: CLI flag, then environment (only with
/// `--allow-env-override`; scenario keys win otherwise), then scenario.
pub fn resolve(mut scenario: Scenario, overrides: &Overrides) -> Result<(Scenario, PathBuf)> {
    let env_seed = env_u64("SEED")?;
    let env_trials = env_u64("TRIALS")?;
    let env_out = std::env::var(format!("{ENV_PREFIX}OUT")).ok().map(PathBuf::from);

    if let Some(seed) = overrides.seed {
        scenario.seed = seed;
    } else if overrides.allow_env_override {
        if let Some(seed) = env_seed {
            scenario.seed = seed;
        }
    }
    if let Some(trials) = overrides.trials {
        scenario.trials = trials;
    } else if overrides.allow_env_override {
        if let Some(trials) = env_trials {
            scenario.trials = trials;
        }
    }

    let out_dir = overrides
        .out
        .clone()
        .or_else(|| {
            if overrides.allow_env_override {
                env_out.clone().or_else(|| scenario.out_dir.clone().map(PathBuf::from))
            } else {
                scenario.out_dir.clone().map(PathBuf::from).or(env_out.clone())
            }
        })
        .unwrap_or_else(|| PathBuf::from("results"));
    Ok((scenario, out_dir))
}
