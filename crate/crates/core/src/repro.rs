//! Canned experiments behind `pricing-lab repro`.
//!
//! All three share one problem family: `d1 = 5`, unit noise, and contexts
//! `x ~ U[k(1-h), k(1+h)]/sqrt(d1)` with `k = 100`, `h = 1/4`. The radii
//! assume unit-scale noise, so the context scale `k` sets the signal to
//! noise ratio; at `k = 1` no optimistic policy leaves the upper price
//! endpoint within 1000 rounds.

use crate::config::{ExperimentConfig, OfflineConfig, PolicyConfig, ProblemConfig, RunConfig, SamplerConfig};
use crate::contexts::ContextSource;
use crate::error::{PricingError, Result};
use crate::model::unconstrained_optimal_price;
use crate::offline::PriceScheme;
use crate::policy::PolicyKind;
use crate::rng;
use crate::sim;

/// Which canned experiment to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Scalar elasticity feature, CO3 against the baselines.
    Fig2a,
    /// Vector elasticity feature, GCO3 against the baselines.
    Fig2b,
    /// Bias sweep for the bias-testing policy.
    Fig2c,
}

impl std::str::FromStr for Figure {
    type Err = PricingError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2a" => Ok(Self::Fig2a),
            "fig2b" => Ok(Self::Fig2b),
            "fig2c" => Ok(Self::Fig2c),
            _ => Err(PricingError::Config(format!("unknown figure `{s}`; expected fig2a, fig2b or fig2c"))),
        }
    }
}

/// Grid of `V_true^2` values for the sweep.
pub const FIG2C_GRID: &str = "T^{-n/5}:0..9";

pub const CONTEXT_SCALE: f64 = 100.0;
pub const CONTEXT_HALF_WIDTH: f64 = 0.25;
/// `T' = ceil(FIG2C_TEST_SCALE * T^{1/4})` for the sweep.
pub const FIG2C_TEST_SCALE: f64 = 10.0;

fn labelled(kind: PolicyKind, label: &str, v_factor: Option<f64>) -> PolicyConfig {
    let mut p = PolicyConfig::new(kind);
    p.label = Some(label.to_string());
    p.v_factor = v_factor;
    p
}

/// Context box of the canned problems.
pub fn sampler(d1: usize, d2: usize) -> SamplerConfig {
    let (k, h) = (CONTEXT_SCALE, CONTEXT_HALF_WIDTH);
    let s1 = (d1 as f64).sqrt();
    let (y_lo, y_hi) =
        if d2 == 1 { (0.8 * k, 1.2 * k) } else { (0.5 * k / (d2 as f64).sqrt(), 1.5 * k / (d2 as f64).sqrt()) };
    SamplerConfig { x_lo: k * (1.0 - h) / s1, x_hi: k * (1.0 + h) / s1, y_lo, y_hi }
}

fn base(d2: usize, horizon: usize, n: usize, v_true_scale: f64) -> ExperimentConfig {
    ExperimentConfig {
        problem: ProblemConfig {
            d1: 5,
            d2,
            noise_r: 1.0,
            alpha_max: 1.5,
            beta_max: 1.5,
            sampler: Some(sampler(5, d2)),
            theta: None,
            model_seed: None,
            bandit: None,
        },
        offline: OfflineConfig { n, price_scheme: PriceScheme::uniform(), v_true: None, v_true_scale },
        policies: Vec::new(),
        run: RunConfig { horizon, reps: 20, seed: 2024, grid_size: 512, delta_mc_samples: 10_000 },
    }
}

/// Uniform offline prices on the widest window inside `[l, u]` centred on
/// the mean optimal price, so the empirical offline price rule lands near
/// the optimal one (`d2 = 1` only).
pub fn centered_window(cfg: &ExperimentConfig, samples: usize) -> Result<PriceScheme> {
    let model = sim::build_model(cfg)?;
    let mut r = rng::stream(cfg.run.seed, &[rng::purpose::DELTA_MC, 1]);
    let mut sum = 0.0;
    for _ in 0..samples {
        sum += unconstrained_optimal_price(&model.theta_star, &model.sampler.sample(&mut r))?;
    }
    let mid = sum / samples as f64;
    let (l, u) = (model.spec.lower_price(), model.spec.upper_price());
    let half = (mid - l).min(u - mid).max(0.0);
    Ok(PriceScheme::Uniform { lo: Some(mid - half), hi: Some(mid + half) })
}

pub fn config(fig: Figure) -> Result<ExperimentConfig> {
    Ok(match fig {
        Figure::Fig2a => {
            let mut c = base(1, 1000, 1000, 1.3);
            c.offline.price_scheme = centered_window(&c, 20_000)?;
            c.policies = vec![
                labelled(PolicyKind::Co3, "co3_tight", Some(1.1)),
                labelled(PolicyKind::Co3, "co3_loose", Some(10.0)),
                PolicyConfig::new(PolicyKind::Ucb),
                PolicyConfig::new(PolicyKind::UcbOffline),
                PolicyConfig::new(PolicyKind::Ts),
                PolicyConfig::new(PolicyKind::TsOffline),
            ];
            c
        }
        Figure::Fig2b => {
            let mut c = base(5, 1000, 3000, 3.5);
            c.policies = vec![
                labelled(PolicyKind::Gco3, "gco3_tight", Some(1.1)),
                labelled(PolicyKind::Gco3, "gco3_loose", Some(10.0)),
                PolicyConfig::new(PolicyKind::Ucb),
                PolicyConfig::new(PolicyKind::UcbOffline),
                PolicyConfig::new(PolicyKind::Ts),
                PolicyConfig::new(PolicyKind::TsOffline),
            ];
            c
        }
        Figure::Fig2c => {
            let mut c = base(5, 5000, 5000, 1.0);
            c.run.delta_mc_samples = 0;
            let mut r = PolicyConfig::new(PolicyKind::Rco3);
            r.alpha_exp = Some(0.25);
            r.test_scale = Some(FIG2C_TEST_SCALE);
            c.policies = vec![r, PolicyConfig::new(PolicyKind::Ucb)];
            c
        }
    })
}
