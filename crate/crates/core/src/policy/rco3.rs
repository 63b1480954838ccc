//! Bias-testing policy for an unknown bias bound.
//!
//! The first `T'` rounds charge `l` or `u` with equal probability. The
//! online ridge fit from those rounds is compared with the offline-only fit;
//! if they agree within `2f` the offline estimate is trusted for the rest of
//! the horizon, otherwise pure online UCB takes over (keeping the test-phase
//! observations).

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{
    default_eps, Co3Config, OfuPolicy, Pending, PolicyKind, PricingPolicy, DEFAULT_GRID_SIZE, DEFAULT_RESTARTS,
};
use crate::confidence::{bias_test_tolerance, ConfidenceSet, RadiusInputs};
use crate::error::{PricingError, Result};
use crate::estimation::{eig_extremes, spd_solve, GramState};
use crate::model::{optimal_price, revenue, Context, DemandParams, ProblemSpec};
use crate::offline::OfflineSummary;
use crate::rng::{self, purpose, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rco3Config {
    /// Test exponent `alpha` in `(0, 1/2)`.
    pub alpha_exp: f64,
    pub lam: f64,
    pub eps: f64,
    pub horizon: usize,
    pub grid_size: usize,
    pub restarts: usize,
    /// Constant in `T' = ceil(test_scale * T^alpha)`.
    pub test_scale: f64,
}

impl Rco3Config {
    pub fn new(alpha_exp: f64, horizon: usize) -> Self {
        Self {
            alpha_exp,
            lam: 1.0,
            eps: default_eps(horizon),
            horizon,
            grid_size: DEFAULT_GRID_SIZE,
            restarts: DEFAULT_RESTARTS,
            test_scale: 1.0,
        }
    }

    pub fn test_length(&self) -> usize {
        (self.test_scale * (self.horizon as f64).powf(self.alpha_exp)).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_exp > 0.0 && self.alpha_exp < 0.5) {
            return Err(PricingError::Config(format!("alpha_exp must lie in (0, 1/2), got {}", self.alpha_exp)));
        }
        if !(self.test_scale > 0.0 && self.test_scale.is_finite()) {
            return Err(PricingError::Config(format!("test_scale must be positive, got {}", self.test_scale)));
        }
        let t_test = self.test_length();
        if t_test >= self.horizon {
            return Err(PricingError::Config(format!(
                "test length {t_test} must be shorter than the horizon {}",
                self.horizon
            )));
        }
        self.ucb_config().validate()
    }

    fn ucb_config(&self) -> Co3Config {
        Co3Config {
            v_bound: 0.0,
            lam: self.lam,
            eps: self.eps,
            horizon: self.horizon,
            grid_size: self.grid_size,
            restarts: self.restarts,
        }
    }
}

/// Phase of the policy; the post-test branch never changes once chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rco3Branch {
    Testing,
    /// Offline estimate accepted.
    Greedy,
    /// Offline estimate rejected.
    Online,
}

pub struct Rco3Policy {
    spec: ProblemSpec,
    cfg: Rco3Config,
    t_test: usize,
    offline_estimate: DVector<f64>,
    offline_lam_min: f64,
    test: GramState,
    ucb: OfuPolicy,
    branch: Rco3Branch,
    statistic: Option<(f64, f64)>,
    rng: Rng,
    pending: Pending,
}

impl Rco3Policy {
    pub fn new(spec: &ProblemSpec, summary: &OfflineSummary, cfg: &Rco3Config, seed: u64) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        let d = spec.dim();
        let sigma0 = DMatrix::identity(d, d) * cfg.lam + &summary.sigma_hat;
        Ok(Self {
            spec: spec.clone(),
            cfg: cfg.clone(),
            t_test: cfg.test_length(),
            offline_estimate: spd_solve(&sigma0, &summary.moment)?,
            offline_lam_min: summary.lam_min.max(0.0),
            test: GramState::new(cfg.lam, d)?,
            ucb: OfuPolicy::ucb(spec, &cfg.ucb_config(), rng::child_seed(seed, &[1]))?,
            branch: Rco3Branch::Testing,
            statistic: None,
            rng: rng::stream(seed, &[purpose::POLICY]),
            pending: Pending::default(),
        })
    }

    pub fn branch(&self) -> Rco3Branch {
        self.branch
    }

    pub fn test_length(&self) -> usize {
        self.t_test
    }

    /// `(||theta' - theta_test||, f)` once the test has run.
    pub fn statistic(&self) -> Option<(f64, f64)> {
        self.statistic
    }

    fn decide(&mut self) -> Result<()> {
        let online = self.test.ridge_solve_vec()?;
        let (lam_test, _) = eig_extremes(&self.test.data_gram())?;
        let inp = RadiusInputs::for_pricing(&self.spec, self.cfg.lam, self.cfg.eps);
        let f = bias_test_tolerance(&inp, self.offline_lam_min, lam_test.max(0.0));
        let gap = (&self.offline_estimate - online).norm();
        self.statistic = Some((gap, f));
        self.branch = if gap <= 2.0 * f { Rco3Branch::Greedy } else { Rco3Branch::Online };
        Ok(())
    }
}

/// `argmax_{p in [l, u]} p (alpha'x + beta'y p)`; endpoints when the fitted elasticity is not negative.
pub fn greedy_price(theta: &DemandParams, ctx: &Context, spec: &ProblemSpec) -> Result<f64> {
    let (_, elast) = theta.demand_terms(ctx)?;
    if elast < 0.0 {
        return optimal_price(theta, ctx, spec);
    }
    let (l, u) = (spec.lower_price(), spec.upper_price());
    Ok(if revenue(theta, u, ctx)? > revenue(theta, l, ctx)? { u } else { l })
}

impl PricingPolicy for Rco3Policy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Rco3
    }

    fn choose_price(&mut self, ctx: &Context) -> Result<f64> {
        self.pending.check_free()?;
        let p = match self.branch {
            Rco3Branch::Testing => {
                if self.rng.random_bool(0.5) {
                    self.spec.lower_price()
                } else {
                    self.spec.upper_price()
                }
            }
            Rco3Branch::Greedy => {
                let theta = DemandParams::from_stacked(&self.offline_estimate, self.spec.d1);
                greedy_price(&theta, ctx, &self.spec)?
            }
            Rco3Branch::Online => self.ucb.choose_price(ctx)?,
        };
        self.pending.begin(ctx, p)?;
        Ok(p)
    }

    fn observe(&mut self, demand: f64) -> Result<()> {
        let (ctx, p) = self.pending.finish(demand)?;
        match self.branch {
            Rco3Branch::Testing => {
                self.test.update(&ctx, p, demand);
                self.ucb.record(&ctx, p, demand);
                if self.test.t >= self.t_test {
                    self.decide()?;
                }
            }
            Rco3Branch::Greedy => {}
            Rco3Branch::Online => self.ucb.observe(demand)?,
        }
        Ok(())
    }

    fn confidence_set(&self) -> Result<Option<ConfidenceSet>> {
        match self.branch {
            Rco3Branch::Online => self.ucb.confidence_set(),
            _ => Ok(None),
        }
    }

    fn last_ucb(&self) -> Option<f64> {
        match self.branch {
            Rco3Branch::Online => self.ucb.last_ucb(),
            _ => None,
        }
    }

    fn status(&self) -> Option<String> {
        let branch = match self.branch {
            Rco3Branch::Testing => "testing",
            Rco3Branch::Greedy => "greedy",
            Rco3Branch::Online => "online",
        };
        Some(match self.statistic {
            Some((gap, f)) => format!("{branch} (gap {gap:.4}, f {f:.4})"),
            None => branch.to_string(),
        })
    }
}
