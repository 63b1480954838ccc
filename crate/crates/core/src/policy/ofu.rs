//! Optimistic policies: CO3, GCO3 and the UCB baselines share one engine
//! and differ only in which ellipsoids make up the confidence set.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{default_eps, Pending, PolicyKind, PricingPolicy, DEFAULT_GRID_SIZE, DEFAULT_RESTARTS};
use crate::confidence::{
    feasible_point, min_price_fit, price_ucb_max, radius_w_t, radius_w_tn, radius_what_tn, ConfidenceSet, Ellipsoid,
    FitOptions, ParamBox, PriceFitObjective, RadiusInputs,
};
use crate::error::{PricingError, Result};
use crate::estimation::GramState;
use crate::model::{Context, ProblemSpec};
use crate::offline::{phat, OfflineSummary};
use crate::rng::{self, purpose, Rng};

/// Which ellipsoids form the confidence set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    /// `||theta - theta_t||_{Sigma_t} <= w_t`.
    Online,
    /// `||theta - theta_{t,N}||_{Sigma_{t,N}} <= w_{t,N}` with `V = 0`.
    Combined,
    /// Combined ellipsoid, Euclidean ball around `theta_{t,N}`, online ellipsoid.
    Three,
    /// Euclidean ball around `theta_{t,N}` and the online ellipsoid.
    Two,
}

/// Inputs of the optimistic policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Co3Config {
    /// Known bound `V` on the offline bias.
    pub v_bound: f64,
    pub lam: f64,
    pub eps: f64,
    pub horizon: usize,
    pub grid_size: usize,
    pub restarts: usize,
}

impl Co3Config {
    /// Defaults: `lam = 1`, `eps = 1/T^2`, 512-point grid.
    pub fn new(v_bound: f64, horizon: usize) -> Self {
        Self {
            v_bound,
            lam: 1.0,
            eps: default_eps(horizon),
            horizon,
            grid_size: DEFAULT_GRID_SIZE,
            restarts: DEFAULT_RESTARTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_bound >= 0.0) {
            return Err(PricingError::Config(format!("v_bound must be >= 0, got {}", self.v_bound)));
        }
        if !(self.lam > 0.0 && self.lam.is_finite()) {
            return Err(PricingError::Config(format!("lam must be positive, got {}", self.lam)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(PricingError::Config(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if self.horizon == 0 {
            return Err(PricingError::Config("horizon must be positive".into()));
        }
        if self.grid_size < 2 {
            return Err(PricingError::Config("grid_size must be at least 2".into()));
        }
        Ok(())
    }
}

/// CO3's horizon-long decision after the offline test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Co3Mode {
    /// Charge the projected offline rule every round.
    Greedy,
    Optimistic,
}

/// `N x_max^2 y_max^2 / (y_min^2 lambda_min(E[xx'])) * max{V^2, 1/lambda_min(Sigma_hat)}`
/// and `max{V^2, 1/lambda_min(Sigma_hat)}` for the offline test.
pub fn co3_threshold(spec: &ProblemSpec, n: usize, v: f64, lam_min_offline: f64) -> (f64, f64) {
    let inv = if lam_min_offline > 0.0 { 1.0 / lam_min_offline } else { f64::INFINITY };
    let spread = (v * v).max(inv);
    let k = n as f64 * spec.x_max.powi(2) * spec.y_max.powi(2) / (spec.y_min.powi(2) * spec.lambda_min_exx);
    (k * spread, spread)
}

/// The offline test: the fit must be below the threshold and the spread below `T^{-1/2}`.
pub fn co3_test_passes(fit: Option<f64>, threshold: f64, spread: f64, horizon: usize) -> bool {
    match fit {
        Some(f) => f <= threshold && spread <= (horizon as f64).powf(-0.5),
        None => false,
    }
}

pub struct OfuPolicy {
    kind: PolicyKind,
    set_kind: SetKind,
    spec: ProblemSpec,
    cfg: Co3Config,
    inp: RadiusInputs,
    v: f64,
    offline_n: usize,
    offline_lam_min: f64,
    offline_lam_max: f64,
    online: GramState,
    combined: GramState,
    bounds: ParamBox,
    mode: Co3Mode,
    offline_rule: Option<OfflineSummary>,
    rng: Rng,
    pending: Pending,
    last_ucb: Option<f64>,
    fallbacks: usize,
}

impl OfuPolicy {
    fn build(
        kind: PolicyKind,
        set_kind: SetKind,
        spec: &ProblemSpec,
        summary: &OfflineSummary,
        cfg: &Co3Config,
        v: f64,
        seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        let dim = spec.dim();
        if summary.d1 != spec.d1 || summary.d2 != spec.d2 {
            return Err(PricingError::InvalidInput("offline summary dimensions do not match the problem".into()));
        }
        let combined = if summary.n > 0 {
            GramState::with_offline(cfg.lam, &summary.sigma_hat, &summary.moment)?
        } else {
            GramState::new(cfg.lam, dim)?
        };
        Ok(Self {
            kind,
            set_kind,
            spec: spec.clone(),
            cfg: cfg.clone(),
            inp: RadiusInputs::for_pricing(spec, cfg.lam, cfg.eps),
            v,
            offline_n: summary.n,
            offline_lam_min: summary.lam_min.max(0.0),
            offline_lam_max: summary.lam_max.max(0.0),
            online: GramState::new(cfg.lam, dim)?,
            combined,
            bounds: ParamBox::from_spec(spec),
            mode: Co3Mode::Optimistic,
            offline_rule: None,
            rng: rng::stream(seed, &[purpose::POLICY]),
            pending: Pending::default(),
            last_ucb: None,
            fallbacks: 0,
        })
    }

    /// Pure online UCB.
    pub fn ucb(spec: &ProblemSpec, cfg: &Co3Config, seed: u64) -> Result<Self> {
        let empty = OfflineSummary::empty(spec.d1, spec.d2);
        Self::build(PolicyKind::Ucb, SetKind::Online, spec, &empty, cfg, 0.0, seed)
    }

    /// UCB on pooled offline and online data, radius built with `V = 0`.
    /// Without offline rows it is exactly [`OfuPolicy::ucb`].
    pub fn ucb_offline(spec: &ProblemSpec, summary: &OfflineSummary, cfg: &Co3Config, seed: u64) -> Result<Self> {
        let set_kind = if summary.n == 0 { SetKind::Online } else { SetKind::Combined };
        Self::build(PolicyKind::UcbOffline, set_kind, spec, summary, cfg, 0.0, seed)
    }

    /// Two-ellipsoid optimistic policy for any `d2`.
    pub fn gco3(spec: &ProblemSpec, summary: &OfflineSummary, cfg: &Co3Config, seed: u64) -> Result<Self> {
        Self::build(PolicyKind::Gco3, SetKind::Two, spec, summary, cfg, cfg.v_bound, seed)
    }

    /// Scalar-elasticity policy: offline test, then either the projected
    /// offline rule for the whole horizon or the three-ellipsoid loop.
    pub fn co3(spec: &ProblemSpec, summary: &OfflineSummary, cfg: &Co3Config, seed: u64) -> Result<Self> {
        if spec.d2 != 1 {
            return Err(PricingError::UnsupportedDimension(format!("co3 needs d2 = 1, got d2 = {}", spec.d2)));
        }
        let mut p = Self::build(PolicyKind::Co3, SetKind::Three, spec, summary, cfg, cfg.v_bound, seed)?;
        let (threshold, spread) = co3_threshold(spec, summary.n, cfg.v_bound, summary.lam_min);
        let fit = if spread <= (cfg.horizon as f64).powf(-0.5) { p.initial_fit(summary)? } else { None };
        if co3_test_passes(fit, threshold, spread, cfg.horizon) {
            p.mode = Co3Mode::Greedy;
            p.offline_rule = Some(summary.clone());
        }
        Ok(p)
    }

    /// Minimum of the offline price fit over `C_0` and the parameter box.
    fn initial_fit(&mut self, summary: &OfflineSummary) -> Result<Option<f64>> {
        let (Some(a_hat), Some(gram)) = (summary.a_hat.clone(), summary.price_fit_gram.clone()) else {
            return Ok(None);
        };
        let set = self.set()?.with_bounds(ParamBox::with_elasticity_floor(&self.spec));
        let start = self.combined.ridge_solve_vec()?;
        let objective = PriceFitObjective { a_hat, gram };
        min_price_fit(&set, &objective, &[start], self.cfg.restarts, FitOptions::default(), &mut self.rng)
    }

    pub fn mode(&self) -> Co3Mode {
        self.mode
    }

    pub fn set_kind(&self) -> SetKind {
        self.set_kind
    }

    /// Rounds on which the set was found empty and `l` was charged.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    fn set(&self) -> Result<ConfidenceSet> {
        let t = self.online.t;
        let online = || -> Result<Ellipsoid> {
            Ellipsoid::new(self.online.ridge_solve_vec()?, self.online.sigma.clone(), radius_w_t(&self.inp, t))
        };
        let center_n = || self.combined.ridge_solve_vec();
        let combined = |v: f64| -> Result<Ellipsoid> {
            let w = radius_w_tn(&self.inp, t, v, self.offline_lam_min, self.offline_lam_max);
            Ellipsoid::new(center_n()?, self.combined.sigma.clone(), w)
        };
        let ball = || -> Result<Ellipsoid> {
            Ellipsoid::ball(center_n()?, radius_what_tn(&self.inp, t, self.v, self.offline_lam_min))
        };
        let ellipsoids = match self.set_kind {
            SetKind::Online => vec![online()?],
            SetKind::Combined => vec![combined(0.0)?],
            SetKind::Three => vec![combined(self.v)?, ball()?, online()?],
            SetKind::Two => vec![ball()?, online()?],
        };
        Ok(ConfidenceSet::new(ellipsoids).with_bounds(self.bounds))
    }
}

impl PricingPolicy for OfuPolicy {
    fn kind(&self) -> PolicyKind {
        self.kind
    }

    fn choose_price(&mut self, ctx: &Context) -> Result<f64> {
        self.pending.check_free()?;
        let p = match (&self.mode, &self.offline_rule) {
            (Co3Mode::Greedy, Some(summary)) => {
                self.last_ucb = None;
                self.spec.project_price(phat(summary, ctx)?)
            }
            _ => {
                let set = self.set()?;
                if feasible_point(&set, self.cfg.restarts, &mut self.rng).is_some() {
                    let (p, v) = price_ucb_max(&set, ctx, &self.spec, self.cfg.grid_size)?;
                    self.last_ucb = Some(v);
                    p
                } else {
                    self.fallbacks += 1;
                    self.last_ucb = None;
                    self.spec.lower_price()
                }
            }
        };
        self.pending.begin(ctx, p)?;
        Ok(p)
    }

    fn observe(&mut self, demand: f64) -> Result<()> {
        let (ctx, p) = self.pending.finish(demand)?;
        self.record(&ctx, p, demand);
        Ok(())
    }

    fn confidence_set(&self) -> Result<Option<ConfidenceSet>> {
        Ok(Some(self.set()?))
    }

    fn last_ucb(&self) -> Option<f64> {
        self.last_ucb
    }

    fn status(&self) -> Option<String> {
        match self.kind {
            PolicyKind::Co3 => Some(
                match self.mode {
                    Co3Mode::Greedy => "greedy",
                    Co3Mode::Optimistic => "optimistic",
                }
                .into(),
            ),
            _ => None,
        }
    }
}

impl OfuPolicy {
    /// Number of offline rows folded into the combined state.
    pub fn offline_rows(&self) -> usize {
        self.offline_n
    }

    /// Folds in an observation priced by someone else (no pending round needed).
    pub fn record(&mut self, ctx: &Context, p: f64, demand: f64) {
        let a = ctx.feature(p);
        self.online.update_feature(&a, demand);
        self.combined.update_feature(&a, demand);
    }

    /// Current online ridge estimate.
    pub fn online_estimate(&self) -> Result<DVector<f64>> {
        self.online.ridge_solve_vec()
    }
}
