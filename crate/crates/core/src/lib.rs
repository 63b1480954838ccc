//! Contextual dynamic pricing with biased offline data.
//!
//! A firm sells over `T` rounds under linear demand
//! `D = alpha'x + (beta'y) p + noise` and holds an offline log drawn from a
//! possibly shifted market. This crate provides the optimistic pricing
//! policies that combine the log with online observations (three-ellipsoid,
//! two-ellipsoid and bias-testing variants), the usual baselines, a linear
//! bandit counterpart, and a seeded, replicated simulation harness that
//! writes regret traces as CSV.

// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod confidence;
pub mod config;
pub mod contexts;
pub mod error;
pub mod estimation;
pub mod model;
pub mod offline;
pub mod oracles;
pub mod policy;
pub mod repro;
pub mod rng;
pub mod sim;

pub use error::{PricingError, Result};
pub use model::{optimal_price, revenue, step_regret, Context, DemandParams, ProblemSpec};
