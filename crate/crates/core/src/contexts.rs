//! Context distributions.

use nalgebra::DVector;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::model::Context;
use crate::rng::Rng;

/// Anything that can draw i.i.d. contexts.
pub trait ContextSource: Send + Sync {
    fn sample(&self, rng: &mut Rng) -> Context;
    fn d1(&self) -> usize;
    fn d2(&self) -> usize;
}

/// Independent uniform coordinates: `x_i ~ U[x_lo, x_hi]`, `y_j ~ U[y_lo, y_hi]`.
///
/// The bounds are the already-scaled coordinate ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformBoxSampler {
    pub d1: usize,
    pub d2: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl UniformBoxSampler {
    /// Default family: `x_i ~ U[0.5, 1.5]/sqrt(d1)`; `y_j ~ U[0.5, 1.5]/sqrt(d2)`
    /// when `d2 > 1`, else `y ~ U[0.8, 1.2]`.
    pub fn default_for(d1: usize, d2: usize) -> Self {
        let sx = (d1 as f64).sqrt();
        let (y_lo, y_hi) = if d2 == 1 {
            (0.8, 1.2)
        } else {
            let sy = (d2 as f64).sqrt();
            (0.5 / sy, 1.5 / sy)
        };
        Self { d1, d2, x_lo: 0.5 / sx, x_hi: 1.5 / sx, y_lo, y_hi }
    }

    pub fn x_max(&self) -> f64 {
        self.x_hi.abs().max(self.x_lo.abs()) * (self.d1 as f64).sqrt()
    }

    pub fn y_max(&self) -> f64 {
        self.y_hi.abs().max(self.y_lo.abs()) * (self.d2 as f64).sqrt()
    }

    /// Smallest `|y|` over the support (meaningful for `d2 = 1`).
    pub fn y_min(&self) -> f64 {
        if self.y_lo <= 0.0 && self.y_hi >= 0.0 {
            0.0
        } else {
            self.y_lo.abs().min(self.y_hi.abs())
        }
    }

    /// `lambda_min(E[x x'])` in closed form: `var I + mu^2 11'` has
    /// eigenvalues `var` and `var + d1 mu^2`.
    pub fn lambda_min_exx(&self) -> f64 {
        let w = self.x_hi - self.x_lo;
        let var = w * w / 12.0;
        if self.d1 == 1 {
            let mu = 0.5 * (self.x_hi + self.x_lo);
            var + mu * mu
        } else {
            var
        }
    }

    /// `lambda_min(E[y y'])`, same construction.
    pub fn lambda_min_eyy(&self) -> f64 {
        let w = self.y_hi - self.y_lo;
        let var = w * w / 12.0;
        if self.d2 == 1 {
            let mu = 0.5 * (self.y_hi + self.y_lo);
            var + mu * mu
        } else {
            var
        }
    }
}

impl ContextSource for UniformBoxSampler {
    fn sample(&self, rng: &mut Rng) -> Context {
        let x = DVector::from_fn(self.d1, |_, _| rng.random_range(self.x_lo..=self.x_hi));
        let y = DVector::from_fn(self.d2, |_, _| rng.random_range(self.y_lo..=self.y_hi));
        Context::new(x, y)
    }

    fn d1(&self) -> usize {
        self.d1
    }

    fn d2(&self) -> usize {
        self.d2
    }
}

/// Always returns the same context.
#[derive(Debug, Clone)]
pub struct FixedContext(pub Context);

impl ContextSource for FixedContext {
    fn sample(&self, _rng: &mut Rng) -> Context {
        self.0.clone()
    }

    fn d1(&self) -> usize {
        self.0.d1()
    }

    fn d2(&self) -> usize {
        self.0.d2()
    }
}
