//! Policies that never learn: the projected offline rule and the clairvoyant benchmark.

use super::{Pending, PolicyKind, PricingPolicy};
use crate::error::{PricingError, Result};
use crate::model::{optimal_price, Context, DemandParams, ProblemSpec};
use crate::offline::{phat, OfflineSummary};

/// Charges `Proj(A_hat'x / y)` every round.
pub struct GreedyOfflinePolicy {
    spec: ProblemSpec,
    summary: OfflineSummary,
    pending: Pending,
}

impl GreedyOfflinePolicy {
    pub fn new(spec: &ProblemSpec, summary: &OfflineSummary) -> Result<Self> {
        spec.validate()?;
        if spec.d2 != 1 {
            return Err(PricingError::UnsupportedDimension("the offline price rule needs d2 = 1".into()));
        }
        if summary.a_hat.is_none() {
            return Err(PricingError::Numeric("offline Sigma_xx is singular; A_hat unavailable".into()));
        }
        Ok(Self { spec: spec.clone(), summary: summary.clone(), pending: Pending::default() })
    }
}

impl PricingPolicy for GreedyOfflinePolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::GreedyOffline
    }

    fn choose_price(&mut self, ctx: &Context) -> Result<f64> {
        self.pending.check_free()?;
        let p = self.spec.project_price(phat(&self.summary, ctx)?);
        self.pending.begin(ctx, p)?;
        Ok(p)
    }

    fn observe(&mut self, demand: f64) -> Result<()> {
        self.pending.finish(demand).map(|_| ())
    }
}

/// Knows `theta*` and charges the projected optimum.
pub struct ClairvoyantPolicy {
    spec: ProblemSpec,
    theta: DemandParams,
    pending: Pending,
}

impl ClairvoyantPolicy {
    pub fn new(theta_star: &DemandParams, spec: &ProblemSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec: spec.clone(), theta: theta_star.clone(), pending: Pending::default() })
    }
}

impl PricingPolicy for ClairvoyantPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Clairvoyant
    }

    fn choose_price(&mut self, ctx: &Context) -> Result<f64> {
        self.pending.check_free()?;
        let p = optimal_price(&self.theta, ctx, &self.spec)?;
        self.pending.begin(ctx, p)?;
        Ok(p)
    }

    fn observe(&mut self, demand: f64) -> Result<()> {
        self.pending.finish(demand).map(|_| ())
    }
}
