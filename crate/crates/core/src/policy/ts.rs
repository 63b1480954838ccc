//! Thompson sampling with a Gaussian prior and known noise level.
//!
//! The posterior is kept as `G = sigma^2 * precision` and `b = G * mean`, so
//! each observation is a plain Gram update and the mean is a ridge solve.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Pending, PolicyKind, PricingPolicy};
use crate::error::{PricingError, Result};
use crate::estimation::spd_solve;
use crate::model::{optimal_price, Context, DemandParams, ProblemSpec};
use crate::offline::OfflineSummary;
use crate::rng::{self, purpose, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsConfig {
    /// Multiplier on the prior covariance; `0` freezes the posterior at the prior mean.
    pub prior_cov_scale: f64,
    /// Assumed noise standard deviation.
    pub noise_sigma: f64,
    /// Ridge parameter of the offline prior.
    pub lam: f64,
}

impl TsConfig {
    /// `prior_cov_scale = 1`, `noise_sigma = R`, `lam = 1`.
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        Self { prior_cov_scale: 1.0, noise_sigma: spec.noise_r, lam: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.prior_cov_scale >= 0.0 && self.prior_cov_scale.is_finite()) {
            return Err(PricingError::Config(format!("prior_cov_scale must be >= 0, got {}", self.prior_cov_scale)));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(PricingError::Config(format!("noise_sigma must be positive, got {}", self.noise_sigma)));
        }
        if !(self.lam > 0.0 && self.lam.is_finite()) {
            return Err(PricingError::Config(format!("lam must be positive, got {}", self.lam)));
        }
        Ok(())
    }
}

pub struct TsPolicy {
    kind: PolicyKind,
    spec: ProblemSpec,
    sigma: f64,
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    frozen: Option<DVector<f64>>,
    rng: Rng,
    pending: Pending,
}

impl TsPolicy {
    /// Prior `N(0, s I)`.
    pub fn online(spec: &ProblemSpec, cfg: &TsConfig, seed: u64) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        let d = spec.dim();
        let s = cfg.prior_cov_scale;
        let sigma = cfg.noise_sigma;
        let frozen = (s == 0.0).then(|| DVector::zeros(d));
        let g = if s > 0.0 { sigma * sigma / s } else { 1.0 };
        Ok(Self::assemble(PolicyKind::Ts, spec, sigma, DMatrix::identity(d, d) * g, DVector::zeros(d), frozen, seed))
    }

    /// Prior `N(theta_{0,N}, s sigma^2 Sigma_{0,N}^{-1})` from the offline ridge fit.
    pub fn offline(spec: &ProblemSpec, summary: &OfflineSummary, cfg: &TsConfig, seed: u64) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        let d = spec.dim();
        let s = cfg.prior_cov_scale;
        let sigma0 = DMatrix::identity(d, d) * cfg.lam + &summary.sigma_hat;
        let mean0 = spd_solve(&sigma0, &summary.moment)?;
        let (gram, moment, frozen) = if s > 0.0 {
            (&sigma0 / s, &summary.moment / s, None)
        } else {
            (sigma0, summary.moment.clone(), Some(mean0))
        };
        Ok(Self::assemble(PolicyKind::TsOffline, spec, cfg.noise_sigma, gram, moment, frozen, seed))
    }

    fn assemble(
        kind: PolicyKind,
        spec: &ProblemSpec,
        sigma: f64,
        gram: DMatrix<f64>,
        moment: DVector<f64>,
        frozen: Option<DVector<f64>>,
        seed: u64,
    ) -> Self {
        Self {
            kind,
            spec: spec.clone(),
            sigma,
            gram,
            moment,
            frozen,
            rng: rng::stream(seed, &[purpose::POLICY]),
            pending: Pending::default(),
        }
    }

    pub fn posterior_mean(&self) -> Result<DVector<f64>> {
        match &self.frozen {
            Some(m) => Ok(m.clone()),
            None => spd_solve(&self.gram, &self.moment),
        }
    }

    fn sample(&mut self) -> Result<DVector<f64>> {
        if let Some(m) = &self.frozen {
            return Ok(m.clone());
        }
        let chol = self
            .gram
            .clone()
            .cholesky()
            .ok_or_else(|| PricingError::Numeric("posterior precision is not positive definite".into()))?;
        let mean = chol.solve(&self.moment);
        let d = mean.len();
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut self.rng));
        let w = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| PricingError::Numeric("posterior factor is singular".into()))?;
        Ok(mean + w * self.sigma)
    }
}

impl PricingPolicy for TsPolicy {
    fn kind(&self) -> PolicyKind {
        self.kind
    }

    fn choose_price(&mut self, ctx: &Context) -> Result<f64> {
        self.pending.check_free()?;
        let theta = DemandParams::from_stacked(&self.sample()?, self.spec.d1);
        let (_, elast) = theta.demand_terms(ctx)?;
        let p = if elast >= 0.0 { self.spec.upper_price() } else { optimal_price(&theta, ctx, &self.spec)? };
        self.pending.begin(ctx, p)?;
        Ok(p)
    }

    fn observe(&mut self, demand: f64) -> Result<()> {
        let (ctx, p) = self.pending.finish(demand)?;
        if self.frozen.is_none() {
            let a = ctx.feature(p);
            self.gram.ger(1.0, &a, &a, 1.0);
            self.moment.axpy(demand, &a, 1.0);
        }
        Ok(())
    }
}
