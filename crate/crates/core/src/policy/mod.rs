//! Pricing policies behind one interface.
//!
//! A policy only ever sees the context it is asked to price and the demand
//! realized at the price it charged. Each round is a `choose_price` followed
//! by exactly one `observe`; anything else is a contract violation.

mod ofu;
mod rco3;
mod simple;
mod ts;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::confidence::ConfidenceSet;
use crate::error::{PricingError, Result};
use crate::model::Context;

pub use ofu::{co3_test_passes, co3_threshold, Co3Config, Co3Mode, OfuPolicy, SetKind};
pub use rco3::{greedy_price, Rco3Branch, Rco3Config, Rco3Policy};
pub use simple::{ClairvoyantPolicy, GreedyOfflinePolicy};
pub use ts::{TsConfig, TsPolicy};

/// Default price-grid resolution for optimistic maximization.
pub const DEFAULT_GRID_SIZE: usize = 512;
/// Default number of random starts for feasibility and the price-fit test.
pub const DEFAULT_RESTARTS: usize = 4;

pub trait PricingPolicy: Send {
    fn kind(&self) -> PolicyKind;

    /// Price to charge in context `ctx`; always inside `[l, u]`.
    fn choose_price(&mut self, ctx: &Context) -> Result<f64>;

    /// Demand realized at the last chosen price.
    fn observe(&mut self, demand: f64) -> Result<()>;

    /// Confidence set the next price will be chosen from, for OFU policies.
    fn confidence_set(&self) -> Result<Option<ConfidenceSet>> {
        Ok(None)
    }

    /// Optimistic revenue of the last chosen price, when one was computed.
    fn last_ucb(&self) -> Option<f64> {
        None
    }

    /// Short description of a fixed internal decision (CO3 mode, RCO3 branch).
    fn status(&self) -> Option<String> {
        None
    }
}

/// Policy identifiers as accepted on the command line and in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Co3,
    Gco3,
    Rco3,
    Ucb,
    UcbOffline,
    Ts,
    TsOffline,
    GreedyOffline,
    Clairvoyant,
    LbUcb,
    LbOfflineUcb,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 11] = [
        PolicyKind::Co3,
        PolicyKind::Gco3,
        PolicyKind::Rco3,
        PolicyKind::Ucb,
        PolicyKind::UcbOffline,
        PolicyKind::Ts,
        PolicyKind::TsOffline,
        PolicyKind::GreedyOffline,
        PolicyKind::Clairvoyant,
        PolicyKind::LbUcb,
        PolicyKind::LbOfflineUcb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Co3 => "co3",
            PolicyKind::Gco3 => "gco3",
            PolicyKind::Rco3 => "rco3",
            PolicyKind::Ucb => "ucb",
            PolicyKind::UcbOffline => "ucb_offline",
            PolicyKind::Ts => "ts",
            PolicyKind::TsOffline => "ts_offline",
            PolicyKind::GreedyOffline => "greedy_offline",
            PolicyKind::Clairvoyant => "clairvoyant",
            PolicyKind::LbUcb => "lb_ucb",
            PolicyKind::LbOfflineUcb => "lb_offline_ucb",
        }
    }

    /// Linear-bandit kinds run on a separate environment.
    pub fn is_linear_bandit(self) -> bool {
        matches!(self, PolicyKind::LbUcb | PolicyKind::LbOfflineUcb)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = PricingError;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| PricingError::Config(format!("unknown policy kind `{s}`")))
    }
}

/// Enforces the choose/observe alternation and remembers the pending round.
#[derive(Debug, Clone, Default)]
pub(crate) struct Pending(Option<(Context, f64)>);

impl Pending {
    pub(crate) fn begin(&mut self, ctx: &Context, p: f64) -> Result<()> {
        if self.0.is_some() {
            return Err(PricingError::Contract("choose_price called twice without observe".into()));
        }
        self.0 = Some((ctx.clone(), p));
        Ok(())
    }

    pub(crate) fn check_free(&self) -> Result<()> {
        if self.0.is_some() {
            return Err(PricingError::Contract("choose_price called twice without observe".into()));
        }
        Ok(())
    }

    pub(crate) fn finish(&mut self, demand: f64) -> Result<(Context, f64)> {
        if !demand.is_finite() {
            return Err(PricingError::InvalidInput(format!("demand must be finite, got {demand}")));
        }
        self.0.take().ok_or_else(|| PricingError::Contract("observe called without a pending price".into()))
    }
}

/// `1 / T^2`, the default confidence level.
pub fn default_eps(horizon: usize) -> f64 {
    let t = horizon.max(2) as f64;
    1.0 / (t * t)
}
