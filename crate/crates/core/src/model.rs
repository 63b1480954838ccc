//! The linear demand market.
//!
//! Demand at price `p` under context `(x, y)` is `alpha'x + (beta'y) p + noise`;
//! expected revenue is `p (alpha'x + beta'y p)`, concave in `p` whenever the
//! elasticity `beta'y` is negative.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};

/// Demand parameters `theta = (alpha, beta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandParams {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
}

impl DemandParams {
    pub fn new(alpha: DVector<f64>, beta: DVector<f64>) -> Self {
        Self { alpha, beta }
    }

    pub fn zeros(d1: usize, d2: usize) -> Self {
        Self::new(DVector::zeros(d1), DVector::zeros(d2))
    }

    /// Splits a stacked `[alpha; beta]` vector.
    pub fn from_stacked(v: &DVector<f64>, d1: usize) -> Self {
        let d2 = v.len() - d1;
        Self::new(v.rows(0, d1).into_owned(), v.rows(d1, d2).into_owned())
    }

    pub fn stacked(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v.rows_mut(0, self.d1()).copy_from(&self.alpha);
        v.rows_mut(self.d1(), self.d2()).copy_from(&self.beta);
        v
    }

    pub fn d1(&self) -> usize {
        self.alpha.len()
    }

    pub fn d2(&self) -> usize {
        self.beta.len()
    }

    pub fn dim(&self) -> usize {
        self.d1() + self.d2()
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.iter().chain(self.beta.iter()).all(|v| v.is_finite())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(&self.alpha * k, &self.beta * k)
    }

    /// Baseline demand `alpha'x` and elasticity `beta'y` for a context.
    pub fn demand_terms(&self, ctx: &Context) -> Result<(f64, f64)> {
        if self.d1() != ctx.d1() || self.d2() != ctx.d2() {
            return Err(PricingError::InvalidInput(format!(
                "parameter dims ({}, {}) do not match context dims ({}, {})",
                self.d1(),
                self.d2(),
                ctx.d1(),
                ctx.d2()
            )));
        }
        Ok((self.alpha.dot(&ctx.x), self.beta.dot(&ctx.y)))
    }

    /// Expected demand at price `p`.
    pub fn mean_demand(&self, p: f64, ctx: &Context) -> Result<f64> {
        let (base, elast) = self.demand_terms(ctx)?;
        Ok(base + elast * p)
    }
}

/// A context `(x, y)`: baseline features and elasticity features.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl Context {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Self {
        Self { x, y }
    }

    pub fn d1(&self) -> usize {
        self.x.len()
    }

    pub fn d2(&self) -> usize {
        self.y.len()
    }

    /// The regression feature `[x; y p]` whose inner product with `theta` is the mean demand.
    pub fn feature(&self, p: f64) -> DVector<f64> {
        let mut a = DVector::zeros(self.d1() + self.d2());
        a.rows_mut(0, self.d1()).copy_from(&self.x);
        for (i, yi) in self.y.iter().enumerate() {
            a[self.d1() + i] = yi * p;
        }
        a
    }

    /// Checks the norm bounds of a [`ProblemSpec`] (and `|y| >= y_min` when `d2 = 1`).
    pub fn is_admissible(&self, spec: &ProblemSpec, tol: f64) -> bool {
        if self.d1() != spec.d1 || self.d2() != spec.d2 {
            return false;
        }
        let ok = self.x.norm() <= spec.x_max + tol && self.y.norm() <= spec.y_max + tol;
        if spec.d2 == 1 {
            ok && self.y[0].abs() >= spec.y_min - tol
        } else {
            ok
        }
    }
}

/// Bounds on parameters, contexts and prices, plus the noise scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub d1: usize,
    pub d2: usize,
    pub alpha_max: f64,
    pub beta_max: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub y_min: f64,
    pub l_alpha: f64,
    pub u_alpha: f64,
    pub l_beta: f64,
    pub u_beta: f64,
    /// Standard deviation of the Gaussian demand noise.
    pub noise_r: f64,
    /// Smallest eigenvalue of `E[x x']` under the context distribution.
    pub lambda_min_exx: f64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha_max", self.alpha_max),
            ("beta_max", self.beta_max),
            ("x_max", self.x_max),
            ("y_max", self.y_max),
            ("y_min", self.y_min),
            ("l_alpha", self.l_alpha),
            ("u_alpha", self.u_alpha),
            ("l_beta", self.l_beta),
            ("u_beta", self.u_beta),
            ("lambda_min_exx", self.lambda_min_exx),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(PricingError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.d1 == 0 || self.d2 == 0 {
            return Err(PricingError::Config("d1 and d2 must be positive".into()));
        }
        if !(self.noise_r.is_finite() && self.noise_r >= 0.0) {
            return Err(PricingError::Config(format!("noise_r must be >= 0, got {}", self.noise_r)));
        }
        if self.l_alpha > self.u_alpha || self.l_beta > self.u_beta {
            return Err(PricingError::Config("need l_alpha <= u_alpha and l_beta <= u_beta".into()));
        }
        if !(self.lower_price() < self.upper_price()) {
            return Err(PricingError::Config(format!(
                "empty price interval [{}, {}]",
                self.lower_price(),
                self.upper_price()
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d1 + self.d2
    }

    /// `l = l_alpha / (2 u_beta)`.
    pub fn lower_price(&self) -> f64 {
        self.l_alpha / (2.0 * self.u_beta)
    }

    /// `u = u_alpha / (2 l_beta)`.
    pub fn upper_price(&self) -> f64 {
        self.u_alpha / (2.0 * self.l_beta)
    }

    pub fn project_price(&self, p: f64) -> f64 {
        p.clamp(self.lower_price(), self.upper_price())
    }

    /// `L = sqrt(x_max^2 + y_max^2 u^2)`, the bound on the regression feature norm.
    pub fn feature_bound(&self) -> f64 {
        let u = self.upper_price();
        (self.x_max * self.x_max + self.y_max * self.y_max * u * u).sqrt()
    }

    /// `sqrt(alpha_max^2 + beta_max^2)`.
    pub fn param_bound(&self) -> f64 {
        self.alpha_max.hypot(self.beta_max)
    }

    /// Membership in the norm-ball surrogate of the parameter set.
    pub fn in_param_box(&self, theta: &DemandParams, tol: f64) -> bool {
        theta.alpha.norm() <= self.alpha_max + tol && theta.beta.norm() <= self.beta_max + tol
    }
}

/// Expected revenue `p (alpha'x + beta'y p)`.
pub fn revenue(theta: &DemandParams, p: f64, ctx: &Context) -> Result<f64> {
    if !p.is_finite() {
        return Err(PricingError::InvalidInput(format!("price {p} is not finite")));
    }
    let (base, elast) = theta.demand_terms(ctx)?;
    Ok(p * (base + elast * p))
}

/// Unprojected maximizer `-alpha'x / (2 beta'y)`.
pub fn unconstrained_optimal_price(theta: &DemandParams, ctx: &Context) -> Result<f64> {
    let (base, elast) = theta.demand_terms(ctx)?;
    if !(elast < 0.0) {
        return Err(PricingError::DegenerateElasticity(elast));
    }
    Ok(-base / (2.0 * elast))
}

/// Revenue-maximizing price projected onto `[l, u]`.
pub fn optimal_price(theta: &DemandParams, ctx: &Context, spec: &ProblemSpec) -> Result<f64> {
    Ok(spec.project_price(unconstrained_optimal_price(theta, ctx)?))
}

/// Revenue lost against the clairvoyant price: `r*(ctx) - r(p, ctx)`.
///
/// The clairvoyant charges the projected optimum, so the result is
/// nonnegative for every `p` in `[l, u]`.
pub fn step_regret(theta_star: &DemandParams, p: f64, ctx: &Context, spec: &ProblemSpec) -> Result<f64> {
    let p_star = optimal_price(theta_star, ctx, spec)?;
    let best = revenue(theta_star, p_star, ctx)?;
    let got = revenue(theta_star, p, ctx)?;
    Ok(best - got)
}

/// The same quantity through the quadratic identity `-beta'y (p - p*)^2`.
///
/// Exact when the unprojected optimum is interior; evaluated in a form that
/// avoids the cancellation of `r* - r`.
pub fn quadratic_regret(theta_star: &DemandParams, p: f64, ctx: &Context) -> Result<f64> {
    let (_, elast) = theta_star.demand_terms(ctx)?;
    let p_star = unconstrained_optimal_price(theta_star, ctx)?;
    Ok(-elast * (p - p_star) * (p - p_star))
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn spec() -> ProblemSpec {
        // contexts below: alpha'x in [0.5, 4], -beta'y in [0.5, 4]
        ProblemSpec {
            d1: 2,
            d2: 1,
            alpha_max: 10.0,
            beta_max: 10.0,
            x_max: 3.0,
            y_max: 2.0,
            y_min: 0.5,
            l_alpha: 0.25,
            u_alpha: 8.0,
            l_beta: 0.25,
            u_beta: 8.0,
            noise_r: 0.0,
            lambda_min_exx: 0.1,
        }
    }

    fn instance() -> impl Strategy<Value = (DemandParams, Context)> {
        (0.5..2.0f64, 0.5..2.0f64, 0.5..2.0f64, 0.5..2.0f64, 0.5..2.0f64, 0.5..2.0f64).prop_map(
            |(a1, a2, b, x1, x2, y)| {
                (
                    DemandParams::new(DVector::from_vec(vec![a1, a2]), DVector::from_vec(vec![-b])),
                    Context::new(DVector::from_vec(vec![x1, x2]), DVector::from_vec(vec![y])),
                )
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn regret_nonnegative((th, c) in instance(), q in 0.0..1.0f64) {
            let s = spec();
            let p = s.lower_price() + q * (s.upper_price() - s.lower_price());
            prop_assert!(step_regret(&th, p, &c, &s).unwrap() >= -1e-12);
        }

        #[test]
        fn revenue_strictly_concave((th, c) in instance(), p1 in 0.0..10.0f64, p2 in 0.0..10.0f64) {
            prop_assume!((p1 - p2).abs() > 1e-3);
            let mid = revenue(&th, 0.5 * (p1 + p2), &c).unwrap();
            let avg = 0.5 * (revenue(&th, p1, &c).unwrap() + revenue(&th, p2, &c).unwrap());
            prop_assert!(mid > avg);
        }

        #[test]
        fn optimal_price_scale_invariant((th, c) in instance(), j in -20i32..20, k in 0.01..100.0f64) {
            let s = spec();
            let base = optimal_price(&th, &c, &s).unwrap();
            // power-of-two scalings are exact in floating point
            prop_assert_eq!(base, optimal_price(&th.scaled(2f64.powi(j)), &c, &s).unwrap());
            let general = optimal_price(&th.scaled(k), &c, &s).unwrap();
            prop_assert!((base - general).abs() <= 1e-14 * base.abs());
        }
    }
}
