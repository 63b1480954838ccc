//! Brute-force references for tests.
//!
//! Nothing here is used on a policy or harness path; each routine computes
//! its answer by a route independent of the library code it is compared to
//! (grids, rejection sampling, dense LU/SVD solves).

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::confidence::{ConfidenceSet, Ellipsoid};
use crate::error::{PricingError, Result};
use crate::model::{Context, DemandParams, ProblemSpec};
use crate::offline::OfflineDataset;
use crate::rng::Rng;

/// Price grid argmax of `p (alpha'x + beta'y p)` over `[l, u]`.
pub fn grid_revenue_argmax(theta: &DemandParams, ctx: &Context, spec: &ProblemSpec, resolution: usize) -> f64 {
    let (l, u) = (spec.lower_price(), spec.upper_price());
    let base = theta.alpha.dot(&ctx.x);
    let elast = theta.beta.dot(&ctx.y);
    let n = resolution.max(2);
    let mut best = (l, f64::NEG_INFINITY);
    for i in 0..n {
        let p = l + (u - l) * i as f64 / (n - 1) as f64;
        let r = p * base + elast * p * p;
        if r > best.1 {
            best = (p, r);
        }
    }
    best.0
}

fn inside(e: &Ellipsoid, th: &DVector<f64>) -> bool {
    let z = th - &e.center;
    (&e.shape * &z).dot(&z) <= e.radius * e.radius
}

/// Max of `c' theta` over uniform proposals (in the bounding box of the
/// first ellipsoid) that land inside every ellipsoid; `None` if none do.
pub fn rejection_max_linear(ellipsoids: &[Ellipsoid], c: &DVector<f64>, samples: usize, rng: &mut Rng) -> Option<f64> {
    let first = ellipsoids.first()?;
    let d = first.center.len();
    let inv = first.shape.clone().try_inverse()?;
    let half: Vec<f64> = (0..d).map(|i| first.radius * inv[(i, i)].max(0.0).sqrt()).collect();
    let mut best: Option<f64> = None;
    for _ in 0..samples {
        let th = DVector::from_fn(d, |i, _| {
            if half[i] > 0.0 {
                first.center[i] + rng.random_range(-half[i]..=half[i])
            } else {
                first.center[i]
            }
        });
        if ellipsoids.iter().all(|e| inside(e, &th)) {
            let v = c.dot(&th);
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best
}

/// `min_v sum_n (v'x_n + y_n p_n)^2` by a dense SVD least-squares solve (`d2 = 1`).
pub fn schur_min(data: &OfflineDataset) -> Result<f64> {
    if data.d2 != 1 {
        return Err(PricingError::UnsupportedDimension("schur_min needs d2 = 1".into()));
    }
    let n = data.len();
    let x = DMatrix::from_fn(n, data.d1, |i, j| data.rows[i].ctx.x[j]);
    let b = DVector::from_fn(n, |i, _| -data.rows[i].ctx.y[0] * data.rows[i].price);
    let svd = x.clone().svd(true, true);
    let v = svd.solve(&b, 1e-12).map_err(|e| PricingError::Numeric(format!("least squares failed: {e}")))?;
    Ok((x * v - b).norm_squared())
}

/// Ridge estimate from explicit normal equations `(X'X + lam I) theta = X'y`, by LU.
pub fn ridge_normal_equations(rows: &[DVector<f64>], ys: &[f64], lam: f64) -> DVector<f64> {
    let d = rows[0].len();
    let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let y = DVector::from_column_slice(ys);
    let lhs = x.transpose() * &x + DMatrix::identity(d, d) * lam;
    lhs.lu().solve(&(x.transpose() * y)).expect("normal equations are singular")
}

/// Ellipsoids that all contain a common random point.
pub fn random_overlapping_set(dim: usize, count: usize, rng: &mut Rng) -> ConfidenceSet {
    let common = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    let ellipsoids = (0..count)
        .map(|_| {
            let b = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0f64..1.0));
            let shape = &b * b.transpose() + DMatrix::identity(dim, dim) * 0.1;
            let center = &common + DVector::from_fn(dim, |_, _| rng.random_range(-0.5..0.5));
            let z = &common - &center;
            let q: f64 = (&shape * &z).dot(&z);
            let dist = q.sqrt();
            Ellipsoid::new(center, shape, dist + rng.random_range(0.05..1.0)).unwrap()
        })
        .collect();
    ConfidenceSet::new(ellipsoids)
}

/// Price-fit objective summed row by row:
/// `sum_n (A_hat'x_n / y_n - (-alpha'x_n / (2 beta y_n)))^2`.
pub fn direct_price_fit(a_hat: &DVector<f64>, data: &OfflineDataset, theta: &DVector<f64>) -> f64 {
    let d1 = data.d1;
    let alpha = theta.rows(0, d1);
    let beta = theta[d1];
    data.rows
        .iter()
        .map(|r| {
            let y = r.ctx.y[0];
            let ph = a_hat.dot(&r.ctx.x) / y;
            let ps = -alpha.dot(&r.ctx.x) / (2.0 * beta * y);
            (ph - ps) * (ph - ps)
        })
        .sum()
}

/// Grid minimum of [`direct_price_fit`] over a 2-d box (`d1 = d2 = 1`),
/// restricted to points the set contains.
pub fn grid_min_price_fit(
    set: &ConfidenceSet,
    a_hat: &DVector<f64>,
    data: &OfflineDataset,
    alpha_range: (f64, f64),
    beta_range: (f64, f64),
    per_axis: usize,
) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..per_axis {
        let a = alpha_range.0 + (alpha_range.1 - alpha_range.0) * i as f64 / (per_axis - 1) as f64;
        for j in 0..per_axis {
            let b = beta_range.0 + (beta_range.1 - beta_range.0) * j as f64 / (per_axis - 1) as f64;
            let th = DVector::from_vec(vec![a, b]);
            if b < 0.0 && set.contains(&th, 0.0) {
                let v = direct_price_fit(a_hat, data, &th);
                best = Some(best.map_or(v, |m: f64| m.min(v)));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::optimal_price;
    use crate::rng;

    fn scalar(a: f64, b: f64) -> DemandParams {
        DemandParams::new(DVector::from_vec(vec![a]), DVector::from_vec(vec![b]))
    }

    fn spec(l_alpha: f64, u_alpha: f64, l_beta: f64, u_beta: f64) -> ProblemSpec {
        ProblemSpec {
            d1: 1,
            d2: 1,
            alpha_max: 10.0,
            beta_max: 10.0,
            x_max: 1.0,
            y_max: 1.0,
            y_min: 1.0,
            l_alpha,
            u_alpha,
            l_beta,
            u_beta,
            noise_r: 0.0,
            lambda_min_exx: 1.0,
        }
    }

    #[test]
    fn grid_argmax_examples() {
        let c = Context::new(DVector::from_vec(vec![1.0]), DVector::from_vec(vec![1.0]));
        let s = spec(0.4, 4.0, 1.0, 2.0);
        assert!((grid_revenue_argmax(&scalar(2.0, -1.0), &c, &s, 100_000) - 1.0).abs() < 1e-4);
        // optimum 3 above u = 2
        let s = spec(0.2, 2.0, 0.5, 1.0);
        assert_eq!(grid_revenue_argmax(&scalar(3.0, -0.5), &c, &s, 1000), s.upper_price());
    }

    #[test]
    fn grid_argmax_agrees_with_closed_form() {
        let mut r = rng::stream(44, &[0]);
        let s = spec(0.2, 8.0, 0.25, 4.0);
        let res = 10_001;
        let step = (s.upper_price() - s.lower_price()) / (res - 1) as f64;
        for _ in 0..100 {
            let th = scalar(r.random_range(0.5..3.0), -r.random_range(0.5..3.0));
            let c = Context::new(
                DVector::from_vec(vec![r.random_range(0.5..1.0)]),
                DVector::from_vec(vec![r.random_range(0.5..1.0)]),
            );
            let g = grid_revenue_argmax(&th, &c, &s, res);
            assert!((g - optimal_price(&th, &c, &s).unwrap()).abs() <= step);
        }
    }

    #[test]
    fn rejection_examples() {
        let mut r = rng::stream(1, &[0]);
        let ball = Ellipsoid::ball(DVector::zeros(2), 1.0).unwrap();
        let c = DVector::from_vec(vec![3.0, 4.0]);
        assert!(rejection_max_linear(std::slice::from_ref(&ball), &c, 1_000_000, &mut r).unwrap() >= 4.99);
        let far = Ellipsoid::ball(DVector::from_vec(vec![10.0, 0.0]), 1.0).unwrap();
        assert!(rejection_max_linear(&[ball, far], &c, 10_000, &mut r).is_none());
        let point = Ellipsoid::ball(DVector::from_vec(vec![0.5, -0.25]), 0.0).unwrap();
        assert_eq!(rejection_max_linear(&[point], &c, 10, &mut r).unwrap(), 0.5);
    }

    #[test]
    fn schur_examples() {
        // p = A'x / y exactly: zero residual
        let mut ds = OfflineDataset::new(2, 1);
        let a = DVector::from_vec(vec![0.7, 1.3]);
        let mut r = rng::stream(2, &[0]);
        for _ in 0..10 {
            let x = DVector::from_fn(2, |_, _| r.random_range(0.1..1.0));
            let y = r.random_range(0.8..1.2);
            let p = a.dot(&x) / y;
            ds.push(Context::new(x, DVector::from_vec(vec![y])), p, 0.0).unwrap();
        }
        assert!(schur_min(&ds).unwrap() < 1e-20);
        let mut one = OfflineDataset::new(2, 1);
        one.push(Context::new(DVector::from_vec(vec![0.3, 0.4]), DVector::from_vec(vec![1.0])), 2.0, 0.0).unwrap();
        assert!(schur_min(&one).unwrap() < 1e-20);
    }
}
