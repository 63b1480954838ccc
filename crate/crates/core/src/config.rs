//! Experiment configuration documents.
//!
//! Parsing is strict: an unknown key anywhere is an error, so a typo can
//! never silently fall back to a default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bandit::BanditSpec;
use crate::error::{PricingError, Result};
use crate::offline::PriceScheme;
use crate::policy::{PolicyKind, DEFAULT_GRID_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub offline: OfflineConfig,
    pub policies: Vec<PolicyConfig>,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub d1: usize,
    pub d2: usize,
    /// Standard deviation of the Gaussian demand noise.
    pub noise_r: f64,
    #[serde(default = "default_norm_bound")]
    pub alpha_max: f64,
    #[serde(default = "default_norm_bound")]
    pub beta_max: f64,
    /// Coordinate ranges of the context sampler; the default family when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    /// Explicit online parameters; sampled from `model_seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaConfig>,
    /// Seed of the online model, shared by all replications; defaults to `run.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_seed: Option<u64>,
    /// Linear-bandit instance for the `lb_*` policies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandit: Option<BanditSpec>,
}

fn default_norm_bound() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaConfig {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineConfig {
    pub n: usize,
    #[serde(default = "default_scheme")]
    pub price_scheme: PriceScheme,
    /// Exact bias `||theta' - theta*||`; `v_true_scale * T^{-5/16}` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_true: Option<f64>,
    #[serde(default = "default_v_scale")]
    pub v_true_scale: f64,
}

fn default_scheme() -> PriceScheme {
    PriceScheme::Uniform { lo: None, hi: None }
}

fn default_v_scale() -> f64 {
    1.0
}

impl OfflineConfig {
    pub fn resolved_v_true(&self, horizon: usize) -> f64 {
        self.v_true.unwrap_or_else(|| self.v_true_scale * (horizon as f64).powf(-5.0 / 16.0))
    }
}

/// One policy entry. Fields that do not apply to a kind are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Name in output files; the kind string when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Absolute bias bound `V`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_bound: Option<f64>,
    /// Bias bound as a multiple of the realized bias.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_exp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lam: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_cov_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            label: None,
            v_bound: None,
            v_factor: None,
            alpha_exp: None,
            test_scale: None,
            lam: None,
            eps: None,
            prior_cov_scale: None,
            noise_sigma: None,
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.as_str().to_string())
    }

    /// Bias bound for a realized bias `v_true`.
    pub fn resolved_v_bound(&self, v_true: f64) -> f64 {
        match (self.v_bound, self.v_factor) {
            (Some(v), _) => v,
            (None, Some(k)) => k * v_true,
            (None, None) => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        use PolicyKind::*;
        let kind = self.kind;
        let bad = |field: &str| Err(PricingError::Config(format!("`{field}` does not apply to policy `{kind}`")));
        let uses_v = matches!(kind, Co3 | Gco3 | LbOfflineUcb);
        if (self.v_bound.is_some() || self.v_factor.is_some()) && !uses_v {
            return bad(if self.v_bound.is_some() { "v_bound" } else { "v_factor" });
        }
        if self.v_bound.is_some() && self.v_factor.is_some() {
            return Err(PricingError::Config(format!("policy `{kind}`: give v_bound or v_factor, not both")));
        }
        if (self.alpha_exp.is_some() || self.test_scale.is_some()) && kind != Rco3 {
            return bad(if self.alpha_exp.is_some() { "alpha_exp" } else { "test_scale" });
        }
        if (self.prior_cov_scale.is_some() || self.noise_sigma.is_some()) && !matches!(kind, Ts | TsOffline) {
            return bad(if self.prior_cov_scale.is_some() { "prior_cov_scale" } else { "noise_sigma" });
        }
        if self.eps.is_some() && matches!(kind, Ts | TsOffline | GreedyOffline | Clairvoyant) {
            return bad("eps");
        }
        if self.lam.is_some() && matches!(kind, GreedyOffline | Clairvoyant) {
            return bad("lam");
        }
        if let Some(v) = self.v_bound.or(self.v_factor) {
            if !(v >= 0.0) {
                return Err(PricingError::Config(format!("policy `{kind}`: bias bound must be >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: usize,
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default = "default_mc")]
    pub delta_mc_samples: usize,
}

fn default_grid() -> usize {
    DEFAULT_GRID_SIZE
}

fn default_mc() -> usize {
    10_000
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| PricingError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PricingError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            PricingError::Config(m) => PricingError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if p.d1 == 0 || p.d2 == 0 {
            return Err(PricingError::Config("d1 and d2 must be positive".into()));
        }
        if !(p.noise_r >= 0.0 && p.noise_r.is_finite()) {
            return Err(PricingError::Config(format!("noise_r must be >= 0, got {}", p.noise_r)));
        }
        if !(p.alpha_max > 0.0 && p.beta_max > 0.0) {
            return Err(PricingError::Config("alpha_max and beta_max must be positive".into()));
        }
        if let Some(th) = &p.theta {
            if th.alpha.len() != p.d1 || th.beta.len() != p.d2 {
                return Err(PricingError::Config("problem.theta dimensions do not match d1, d2".into()));
            }
        }
        if let Some(s) = &p.sampler {
            if !(s.x_lo <= s.x_hi && s.y_lo <= s.y_hi) {
                return Err(PricingError::Config("sampler bounds must satisfy lo <= hi".into()));
            }
        }
        if let Some(v) = self.offline.v_true {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(PricingError::Config(format!("v_true must be >= 0, got {v}")));
            }
        }
        if self.run.horizon == 0 {
            return Err(PricingError::Config("run.horizon must be positive".into()));
        }
        if self.run.reps == 0 {
            return Err(PricingError::Config("run.reps must be at least 1".into()));
        }
        if self.run.grid_size < 2 {
            return Err(PricingError::Config("run.grid_size must be at least 2".into()));
        }
        if self.policies.is_empty() {
            return Err(PricingError::Config("at least one policy is required".into()));
        }
        let mut labels = std::collections::BTreeSet::new();
        for pc in &self.policies {
            pc.validate()?;
            if !labels.insert(pc.label()) {
                return Err(PricingError::Config(format!("duplicate policy label `{}`", pc.label())));
            }
            if pc.kind.is_linear_bandit() && p.bandit.is_none() {
                return Err(PricingError::Config(format!("policy `{}` needs problem.bandit", pc.kind)));
            }
            if pc.kind == PolicyKind::Co3 && p.d2 != 1 {
                return Err(PricingError::Config("co3 needs d2 = 1; use gco3".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "problem": {"d1": 5, "d2": 1, "noise_r": 0.1},
        "offline": {"n": 100},
        "policies": [{"kind": "ucb"}, {"kind": "co3", "label": "co3_tight", "v_factor": 1.1}],
        "run": {"horizon": 50, "reps": 2, "seed": 7}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.run.grid_size, 512);
        assert_eq!(c.problem.alpha_max, 3.0);
        assert_eq!(c.offline.price_scheme, PriceScheme::Uniform { lo: None, hi: None });
        assert_eq!(c.policies[1].label(), "co3_tight");
        assert!((c.offline.resolved_v_true(1000) - 1000f64.powf(-5.0 / 16.0)).abs() < 1e-15);
        assert!((c.policies[1].resolved_v_bound(0.2) - 0.22).abs() < 1e-15);
    }

    #[test]
    fn round_trips() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = MINIMAL.replace("\"seed\": 7", "\"seed\": 7, \"sed\": 1");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(PricingError::Config(_))));
        let bad = MINIMAL.replace("\"n\": 100", "\"n\": 100, \"bias\": 1");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = MINIMAL.replace("{\"kind\": \"ucb\"}", "{\"kind\": \"ucb\", \"v_bound\": 1}");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = MINIMAL.replace("\"ucb\"", "\"ucbb\"");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = MINIMAL.replace("\"run\"", "\"extra\": {}, \"run\"");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn semantic_checks() {
        assert!(ExperimentConfig::from_json(&MINIMAL.replace("\"reps\": 2", "\"reps\": 0")).is_err());
        assert!(ExperimentConfig::from_json(&MINIMAL.replace("\"d2\": 1", "\"d2\": 5")).is_err());
        let dup = MINIMAL.replace("\"label\": \"co3_tight\", ", "\"label\": \"ucb\", ");
        assert!(ExperimentConfig::from_json(&dup).is_err());
        let lb = MINIMAL.replace("{\"kind\": \"ucb\"}", "{\"kind\": \"lb_ucb\"}");
        assert!(ExperimentConfig::from_json(&lb).is_err());
    }
}
