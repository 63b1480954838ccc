//! Confidence radii, ellipsoid-intersection confidence sets, optimistic
//! price selection and the offline price-fit test.
//!
//! Maximizing a linear function over an intersection of ellipsoids has no
//! closed form, so [`linear_max`] returns the minimum over the ellipsoids of
//! the per-ellipsoid maxima. That value upper-bounds the true maximum over
//! the intersection (it is exact for a single ellipsoid), which keeps every
//! optimistic index optimistic.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng as _;

use crate::error::{PricingError, Result};
use crate::model::{Context, ProblemSpec};
use crate::rng::Rng;

/// Inputs shared by the radius formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusInputs {
    pub lam: f64,
    pub eps: f64,
    /// Parameter dimension `d1 + d2` (or `d` for the linear bandit).
    pub dim: usize,
    /// `L`, the bound on feature norms.
    pub feature_bound: f64,
    /// `sqrt(alpha_max^2 + beta_max^2)`.
    pub param_bound: f64,
    pub noise_r: f64,
}

impl RadiusInputs {
    pub fn for_pricing(spec: &ProblemSpec, lam: f64, eps: f64) -> Self {
        Self {
            lam,
            eps,
            dim: spec.dim(),
            feature_bound: spec.feature_bound(),
            param_bound: spec.param_bound(),
            noise_r: spec.noise_r,
        }
    }

    fn self_normalized(&self, t: usize, numerator: f64) -> f64 {
        let d = self.dim as f64;
        let l2 = self.feature_bound * self.feature_bound;
        (2.0 * (numerator / self.eps).ln() + d * (1.0 + t as f64 * l2 / (d * self.lam)).ln()).sqrt()
    }

    fn noise_terms(&self, numerator: f64) -> f64 {
        self.noise_r * (self.dim as f64).sqrt() + self.noise_r * (2.0 * (numerator / self.eps).ln()).sqrt()
    }
}

/// Online radius `w_t`.
pub fn radius_w_t(inp: &RadiusInputs, t: usize) -> f64 {
    inp.lam.sqrt() * inp.param_bound + inp.self_normalized(t, 3.0)
}

/// Combined-Gram radius `w_{t,N}`.
pub fn radius_w_tn(inp: &RadiusInputs, t: usize, v: f64, lam_min_sig: f64, lam_max_sig: f64) -> f64 {
    inp.lam * inp.param_bound / (inp.lam + lam_min_sig).sqrt()
        + lam_max_sig * v / (inp.lam + lam_max_sig).sqrt()
        + inp.self_normalized(t, 6.0)
        + inp.noise_terms(6.0)
}

/// Euclidean radius `w_hat_{t,N}` around the combined estimate.
pub fn radius_what_tn(inp: &RadiusInputs, t: usize, v: f64, lam_min_sig: f64) -> f64 {
    let s = (inp.lam + lam_min_sig).sqrt();
    inp.lam * inp.param_bound / (inp.lam + lam_min_sig) + v + inp.self_normalized(t, 6.0) / s + inp.noise_terms(6.0) / s
}

/// Bias-test tolerance `f` for the robust policy, from the smallest
/// eigenvalues of the offline Gram and of the test-phase Gram (both without `lam I`).
pub fn bias_test_tolerance(inp: &RadiusInputs, lam_min_offline: f64, lam_min_test: f64) -> f64 {
    let half = |lm: f64| inp.lam * inp.param_bound / (inp.lam + lm) + inp.noise_terms(3.0) / (inp.lam + lm).sqrt();
    half(lam_min_offline) + half(lam_min_test)
}

/// `{theta : ||theta - center||_shape <= radius}`.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub radius: f64,
    is_ball: bool,
    chol: OnceLock<Option<Cholesky<f64, Dyn>>>,
    eig: OnceLock<SymmetricEigen<f64, Dyn>>,
}

impl Ellipsoid {
    pub fn new(center: DVector<f64>, shape: DMatrix<f64>, radius: f64) -> Result<Self> {
        let d = center.len();
        if shape.nrows() != d || shape.ncols() != d {
            return Err(PricingError::InvalidInput("ellipsoid shape does not match center".into()));
        }
        if !(radius >= 0.0) {
            return Err(PricingError::InvalidInput(format!("ellipsoid radius must be >= 0, got {radius}")));
        }
        let shape = (&shape + shape.transpose()) * 0.5;
        Ok(Self { center, shape, radius, is_ball: false, chol: OnceLock::new(), eig: OnceLock::new() })
    }

    /// Euclidean ball.
    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        let d = center.len();
        let mut e = Self::new(center, DMatrix::identity(d, d), radius)?;
        e.is_ball = true;
        Ok(e)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn cholesky(&self) -> Option<&Cholesky<f64, Dyn>> {
        self.chol.get_or_init(|| self.shape.clone().cholesky()).as_ref()
    }

    fn eigen(&self) -> &SymmetricEigen<f64, Dyn> {
        self.eig.get_or_init(|| self.shape.clone().symmetric_eigen())
    }

    /// `||theta - center||_shape`.
    pub fn distance(&self, theta: &DVector<f64>) -> f64 {
        let z = theta - &self.center;
        if self.is_ball {
            z.norm()
        } else {
            (&self.shape * &z).dot(&z).max(0.0).sqrt()
        }
    }

    pub fn contains(&self, theta: &DVector<f64>, tol: f64) -> bool {
        self.distance(theta) <= self.radius + tol
    }

    /// `c' shape^{-1} c`.
    pub fn dual_norm_sq(&self, c: &DVector<f64>) -> Result<f64> {
        if self.is_ball {
            return Ok(c.norm_squared());
        }
        let chol =
            self.cholesky().ok_or_else(|| PricingError::Numeric("ellipsoid shape is not positive definite".into()))?;
        Ok(chol.solve(c).dot(c).max(0.0))
    }

    /// `max_{theta in E} c' theta = c' center + radius ||c||_{shape^{-1}}`.
    pub fn linear_max(&self, c: &DVector<f64>) -> Result<f64> {
        if self.radius == 0.0 {
            return Ok(self.center.dot(c));
        }
        Ok(self.center.dot(c) + self.radius * self.dual_norm_sq(c)?.sqrt())
    }

    /// Euclidean projection onto the ellipsoid.
    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        if self.contains(z, 0.0) {
            return z.clone();
        }
        if self.radius == 0.0 {
            return self.center.clone();
        }
        let diff = z - &self.center;
        if self.is_ball {
            let n = diff.norm();
            return &self.center + diff * (self.radius / n);
        }
        // argmin ||theta - z|| s.t. (theta-c)'M(theta-c) <= r^2 gives
        // theta - c = (I + mu M)^{-1} (z - c); pick mu >= 0 on the boundary.
        let eig = self.eigen();
        let w = eig.eigenvectors.transpose() * &diff;
        let lams: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
        let r2 = self.radius * self.radius;
        let g = |mu: f64| -> f64 {
            lams.iter().zip(w.iter()).map(|(l, wi)| l * wi * wi / ((1.0 + mu * l) * (1.0 + mu * l))).sum::<f64>()
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while g(hi) > r2 && hi < 1e300 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > r2 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let mu = hi;
        let y = DVector::from_iterator(w.len(), lams.iter().zip(w.iter()).map(|(l, wi)| wi / (1.0 + mu * l)));
        &self.center + &eig.eigenvectors * y
    }
}

/// The norm-ball surrogate of the parameter set: `||alpha|| <= alpha_max`,
/// `||beta|| <= beta_max`, and for `d2 = 1` optionally `beta <= -beta_floor`
/// so that `p*_theta` stays defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBox {
    pub d1: usize,
    pub alpha_max: f64,
    pub beta_max: f64,
    pub beta_floor: Option<f64>,
}

impl ParamBox {
    pub fn from_spec(spec: &ProblemSpec) -> Self {
        Self { d1: spec.d1, alpha_max: spec.alpha_max, beta_max: spec.beta_max, beta_floor: None }
    }

    /// Adds the scalar-elasticity sign constraint `-beta >= l_beta / y_max`.
    pub fn with_elasticity_floor(spec: &ProblemSpec) -> Self {
        let floor = if spec.d2 == 1 { Some((spec.l_beta / spec.y_max).min(spec.beta_max)) } else { None };
        Self { beta_floor: floor, ..Self::from_spec(spec) }
    }

    pub fn contains(&self, theta: &DVector<f64>, tol: f64) -> bool {
        let d = theta.len();
        let a = theta.rows(0, self.d1).norm();
        let b = theta.rows(self.d1, d - self.d1);
        let mut ok = a <= self.alpha_max + tol && b.norm() <= self.beta_max + tol;
        if let Some(f) = self.beta_floor {
            ok &= b[0] <= -f + tol;
        }
        ok
    }

    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        let d = z.len();
        let mut out = z.clone();
        let an = out.rows(0, self.d1).norm();
        if an > self.alpha_max {
            out.rows_mut(0, self.d1).scale_mut(self.alpha_max / an);
        }
        match self.beta_floor {
            Some(f) if d - self.d1 == 1 => {
                out[self.d1] = out[self.d1].clamp(-self.beta_max, -f);
            }
            _ => {
                let bn = out.rows(self.d1, d - self.d1).norm();
                if bn > self.beta_max {
                    out.rows_mut(self.d1, d - self.d1).scale_mut(self.beta_max / bn);
                }
            }
        }
        out
    }

    /// `max_{theta in box} c' theta`.
    pub fn support(&self, c: &DVector<f64>) -> f64 {
        let d = c.len();
        let a = self.alpha_max * c.rows(0, self.d1).norm();
        let b = match self.beta_floor {
            Some(f) if d - self.d1 == 1 => (-self.beta_max * c[self.d1]).max(-f * c[self.d1]),
            _ => self.beta_max * c.rows(self.d1, d - self.d1).norm(),
        };
        a + b
    }

    fn sample(&self, d: usize, rng: &mut Rng) -> DVector<f64> {
        let z = DVector::from_fn(d, |i, _| {
            let m = if i < self.d1 { self.alpha_max } else { self.beta_max };
            rng.random_range(-m..=m)
        });
        self.project(&z)
    }
}

/// Intersection of ellipsoids, with an optional parameter box used for
/// feasibility and the price-fit test (never for the optimistic maximum).
#[derive(Debug, Clone)]
pub struct ConfidenceSet {
    pub ellipsoids: Vec<Ellipsoid>,
    pub bounds: Option<ParamBox>,
}

impl ConfidenceSet {
    pub fn new(ellipsoids: Vec<Ellipsoid>) -> Self {
        Self { ellipsoids, bounds: None }
    }

    pub fn with_bounds(mut self, b: ParamBox) -> Self {
        self.bounds = Some(b);
        self
    }

    pub fn dim(&self) -> Option<usize> {
        self.ellipsoids.first().map(|e| e.dim())
    }

    /// Membership in every ellipsoid (and the box when present).
    pub fn contains(&self, theta: &DVector<f64>, tol: f64) -> bool {
        self.ellipsoids.iter().all(|e| e.contains(theta, tol)) && self.bounds.is_none_or(|b| b.contains(theta, tol))
    }

    /// Membership in the ellipsoids only.
    pub fn ellipsoids_contain(&self, theta: &DVector<f64>, tol: f64) -> bool {
        self.ellipsoids.iter().all(|e| e.contains(theta, tol))
    }

    /// Dykstra's alternating projection onto the intersection of all
    /// constraints. Returns the final iterate, which may lie slightly outside
    /// when the intersection is empty or tangent.
    pub fn project(&self, z: &DVector<f64>, max_cycles: usize, tol: f64) -> DVector<f64> {
        let mut x = z.clone();
        let k = self.ellipsoids.len() + usize::from(self.bounds.is_some());
        let mut incr = vec![DVector::zeros(z.len()); k];
        for _ in 0..max_cycles {
            let prev = x.clone();
            for (j, inc) in incr.iter_mut().enumerate() {
                let y = &x + &*inc;
                let p = if j < self.ellipsoids.len() {
                    self.ellipsoids[j].project(&y)
                } else {
                    self.bounds.as_ref().map_or_else(|| y.clone(), |b| b.project(&y))
                };
                *inc = &y - &p;
                x = p;
            }
            if (&x - &prev).norm() <= tol * (1.0 + x.norm()) && self.contains(&x, tol) {
                break;
            }
        }
        x
    }
}

/// Tolerance for set-membership rechecks.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Upper bound on `max c' theta` over the intersection: min over ellipsoids
/// of the per-ellipsoid maximum.
pub fn linear_max(set: &ConfidenceSet, c: &DVector<f64>) -> Result<f64> {
    if set.ellipsoids.is_empty() {
        return Err(PricingError::InvalidInput("confidence set has no ellipsoids".into()));
    }
    let mut best = f64::INFINITY;
    for e in &set.ellipsoids {
        best = best.min(e.linear_max(c)?);
    }
    Ok(best)
}

/// Per-context quantities that make the optimistic revenue of an ellipsoid a
/// closed-form function of the price. With `c(p) = p a + p^2 b`,
/// `a = [x; 0]`, `b = [0; y]`:
/// `max_E theta'c(p) = p ca + p^2 cb + r sqrt(p^2 saa + 2 p^3 sab + p^4 sbb)`.
struct PriceProfile {
    ca: f64,
    cb: f64,
    saa: f64,
    sab: f64,
    sbb: f64,
    radius: f64,
}

impl PriceProfile {
    fn new(e: &Ellipsoid, ctx: &Context) -> Result<Self> {
        let d1 = ctx.d1();
        let d = e.dim();
        if d != d1 + ctx.d2() {
            return Err(PricingError::InvalidInput("context does not match confidence set dimension".into()));
        }
        let mut a = DVector::zeros(d);
        a.rows_mut(0, d1).copy_from(&ctx.x);
        let mut b = DVector::zeros(d);
        b.rows_mut(d1, d - d1).copy_from(&ctx.y);
        let (saa, sab, sbb) = if e.radius == 0.0 {
            (0.0, 0.0, 0.0)
        } else if e.is_ball {
            (a.norm_squared(), 0.0, b.norm_squared())
        } else {
            let chol =
                e.cholesky().ok_or_else(|| PricingError::Numeric("ellipsoid shape is not positive definite".into()))?;
            let ia = chol.solve(&a);
            let ib = chol.solve(&b);
            (ia.dot(&a), ia.dot(&b), ib.dot(&b))
        };
        Ok(Self { ca: e.center.dot(&a), cb: e.center.dot(&b), saa, sab, sbb, radius: e.radius })
    }

    fn value(&self, p: f64) -> f64 {
        let q = p * p * self.saa + 2.0 * p * p * p * self.sab + p * p * p * p * self.sbb;
        p * self.ca + p * p * self.cb + self.radius * q.max(0.0).sqrt()
    }
}

/// Uniform price grid over `[l, u]`.
pub fn price_grid(spec: &ProblemSpec, grid_size: usize) -> Vec<f64> {
    let (l, u) = (spec.lower_price(), spec.upper_price());
    let n = grid_size.max(2);
    (0..n).map(|i| if i + 1 == n { u } else { l + (u - l) * i as f64 / (n - 1) as f64 }).collect()
}

/// Optimistic price: grid argmax of `linear_max(set, [p x; p^2 y])`, ties to
/// the smallest price. Returns `(price, ucb_value)`.
pub fn price_ucb_max(set: &ConfidenceSet, ctx: &Context, spec: &ProblemSpec, grid_size: usize) -> Result<(f64, f64)> {
    if grid_size < 2 {
        return Err(PricingError::InvalidInput("price grid needs at least two points".into()));
    }
    if set.ellipsoids.is_empty() {
        return Err(PricingError::InvalidInput("confidence set has no ellipsoids".into()));
    }
    let profiles = set.ellipsoids.iter().map(|e| PriceProfile::new(e, ctx)).collect::<Result<Vec<_>>>()?;
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for p in price_grid(spec, grid_size) {
        let v = profiles.iter().map(|pr| pr.value(p)).fold(f64::INFINITY, f64::min);
        if v > best.1 {
            best = (p, v);
        }
    }
    Ok(best)
}

/// Offline price-fit objective for `d2 = 1`:
/// `sum_n (p_hat(x_n, y_n) - p*_theta(x_n, y_n))^2 = v' M v`
/// with `v = A_hat + alpha / (2 beta)` and `M = sum x x' / y^2`.
#[derive(Debug, Clone)]
pub struct PriceFitObjective {
    pub a_hat: DVector<f64>,
    pub gram: DMatrix<f64>,
}

impl PriceFitObjective {
    fn gap(&self, theta: &DVector<f64>) -> Option<DVector<f64>> {
        let d1 = self.a_hat.len();
        let beta = theta[d1];
        if !(beta < 0.0) {
            return None;
        }
        Some(&self.a_hat + theta.rows(0, d1) / (2.0 * beta))
    }

    pub fn value(&self, theta: &DVector<f64>) -> f64 {
        match self.gap(theta) {
            Some(v) => (&self.gram * &v).dot(&v),
            None => f64::INFINITY,
        }
    }

    fn gradient(&self, theta: &DVector<f64>) -> Option<DVector<f64>> {
        let d1 = self.a_hat.len();
        let v = self.gap(theta)?;
        let beta = theta[d1];
        let mv = &self.gram * &v;
        let mut g = DVector::zeros(d1 + 1);
        g.rows_mut(0, d1).copy_from(&(&mv / beta));
        g[d1] = -mv.dot(&theta.rows(0, d1)) / (beta * beta);
        Some(g)
    }
}

/// Iteration budget and stopping rule of the price-fit descent.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iters: usize,
    pub improvement_tol: f64,
    pub projection_cycles: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iters: 500, improvement_tol: 1e-10, projection_cycles: 300 }
    }
}

/// Approximate minimum of the offline price-fit objective over the set and
/// box, by multi-start projected gradient descent. The value returned is the
/// best objective seen at a verified feasible point, hence an upper bound on
/// the true minimum; `None` when no feasible start was found.
pub fn min_price_fit(
    set: &ConfidenceSet,
    objective: &PriceFitObjective,
    starts: &[DVector<f64>],
    restarts: usize,
    opts: FitOptions,
    rng: &mut Rng,
) -> Result<Option<f64>> {
    let dim = set.dim().ok_or_else(|| PricingError::InvalidInput("confidence set has no ellipsoids".into()))?;
    if dim != objective.a_hat.len() + 1 {
        return Err(PricingError::UnsupportedDimension("the price-fit test needs d2 = 1".into()));
    }
    let bounds = set.bounds;
    let mut candidates: Vec<DVector<f64>> = starts.to_vec();
    if let Some(b) = bounds {
        candidates.extend(starts.iter().map(|s| b.project(s)));
        for _ in 0..restarts.max(1) {
            candidates.push(b.sample(dim, rng));
        }
    }
    let mut best: Option<f64> = None;
    let mut found = 0usize;
    for start in candidates {
        let mut x = set.project(&start, opts.projection_cycles, 1e-12);
        if !set.contains(&x, MEMBERSHIP_TOL) {
            continue;
        }
        found += 1;
        let mut fx = objective.value(&x);
        let mut step = 1.0 / (objective.gram.norm() + 1e-12);
        for _ in 0..opts.max_iters {
            let Some(g) = objective.gradient(&x) else { break };
            let mut improved = false;
            for _ in 0..60 {
                let cand = set.project(&(&x - &g * step), opts.projection_cycles, 1e-12);
                if set.contains(&cand, MEMBERSHIP_TOL) {
                    let fc = objective.value(&cand);
                    if fc < fx {
                        let gain = fx - fc;
                        x = cand;
                        fx = fc;
                        step *= 2.0;
                        improved = gain >= opts.improvement_tol * fx.max(1.0);
                        break;
                    }
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if fx.is_finite() {
            best = Some(best.map_or(fx, |b: f64| b.min(fx)));
        }
        if found >= restarts.max(1) + starts.len() * 2 {
            break;
        }
    }
    Ok(best)
}

/// A point of the intersection (box included) found by alternating
/// projections from the ellipsoid centers, or `None`.
pub fn feasible_point(set: &ConfidenceSet, restarts: usize, rng: &mut Rng) -> Option<DVector<f64>> {
    let dim = set.dim()?;
    let mut starts: Vec<DVector<f64>> = set.ellipsoids.iter().map(|e| e.center.clone()).collect();
    for s in &starts {
        if set.contains(s, MEMBERSHIP_TOL) {
            return Some(s.clone());
        }
    }
    if let Some(b) = set.bounds {
        starts.extend((0..restarts).map(|_| b.sample(dim, rng)));
    } else {
        let scale = set.ellipsoids.iter().map(|e| e.center.norm() + e.radius).fold(1.0, f64::max);
        starts.extend((0..restarts).map(|_| DVector::from_fn(dim, |_, _| rng.random_range(-scale..=scale))));
    }
    if pairwise_separated(set) {
        return None;
    }
    for s in starts {
        let x = set.project(&s, 2000, 1e-13);
        if set.contains(&x, MEMBERSHIP_TOL) {
            return Some(x);
        }
    }
    None
}

/// One constraint of a [`ConfidenceSet`], for pairwise separation checks.
#[derive(Clone, Copy)]
enum Piece<'a> {
    Ell(&'a Ellipsoid),
    Box(&'a ParamBox),
}

impl Piece<'_> {
    fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        match self {
            Piece::Ell(e) => e.project(z),
            Piece::Box(b) => b.project(z),
        }
    }

    fn support(&self, c: &DVector<f64>) -> Option<f64> {
        match self {
            Piece::Ell(e) => e.linear_max(c).ok(),
            Piece::Box(b) => Some(b.support(c)),
        }
    }

    fn start(&self, dim: usize) -> DVector<f64> {
        match self {
            Piece::Ell(e) => e.center.clone(),
            Piece::Box(b) => b.project(&DVector::zeros(dim)),
        }
    }
}

/// True when some two constraints are strictly separated by a hyperplane,
/// which proves the intersection empty. The normal comes from a short run
/// of alternating projections between the pair.
fn pairwise_separated(set: &ConfidenceSet) -> bool {
    let Some(dim) = set.dim() else { return false };
    let mut pieces: Vec<Piece> = set.ellipsoids.iter().map(Piece::Ell).collect();
    if let Some(b) = &set.bounds {
        pieces.push(Piece::Box(b));
    }
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            let (a, b) = (pieces[i], pieces[j]);
            let mut xa = a.start(dim);
            let mut xb = b.project(&xa);
            for _ in 0..50 {
                xa = a.project(&xb);
                xb = b.project(&xa);
            }
            let n = &xa - &xb;
            let gap = n.norm();
            if !(gap > 1e-9 * (1.0 + xa.norm())) {
                continue;
            }
            // max over b of n'theta < min over a of n'theta
            if let (Some(hb), Some(ha)) = (b.support(&n), a.support(&-&n)) {
                if hb + ha < -1e-9 * gap * (1.0 + xa.norm()) {
                    return true;
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use crate::rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn inputs(lam: f64, eps: f64, dim: usize, l: f64, s: f64, r: f64) -> RadiusInputs {
        RadiusInputs { lam, eps, dim, feature_bound: l, param_bound: s, noise_r: r }
    }

    #[test]
    fn w_t_at_zero() {
        let eps = 3.0 / std::f64::consts::E.powi(2);
        let inp = inputs(1.0, eps, 2, 1.0, 2f64.sqrt(), 1.0);
        assert!((radius_w_t(&inp, 0) - (2f64.sqrt() + 2.0)).abs() < 1e-12);
        let (a, b, c) = (radius_w_t(&inp, 1), radius_w_t(&inp, 10), radius_w_t(&inp, 100));
        assert!(a < b && b < c);
    }

    #[test]
    fn w_t_independent_arithmetic() {
        let t = 1000.0f64;
        let inp = inputs(1.0, 1.0 / (t * t), 6, 2.0, 2f64.sqrt(), 0.5);
        let log_part = 2.0 * (3.0 * t * t).ln() + 6.0 * (1.0 + t * 4.0 / 6.0).ln();
        let expect = 2f64.sqrt() + log_part.sqrt();
        assert!((radius_w_t(&inp, 1000) - expect).abs() < 1e-12);
    }

    #[test]
    fn w_tn_examples() {
        let eps = 0.01;
        let inp = inputs(1.0, eps, 2, 1.0, 2f64.sqrt(), 0.0);
        let expect = 2f64.sqrt() + (2.0 * (6.0 / eps).ln()).sqrt();
        assert!((radius_w_tn(&inp, 0, 0.0, 0.0, 0.0) - expect).abs() < 1e-12);

        let inp = inputs(2.0, 1e-4, 6, 3.0, 4.0, 0.3);
        let (lmin, lmax) = (50.0, 900.0);
        let h = 1e-3;
        let slope = (radius_w_tn(&inp, 10, 0.2 + h, lmin, lmax) - radius_w_tn(&inp, 10, 0.2, lmin, lmax)) / h;
        assert!((slope - lmax / (2.0 + lmax).sqrt()).abs() < 1e-6);

        let t: f64 = 37.0;
        let lg = (2.0 * (6.0f64 / 1e-4).ln() + 6.0 * (1.0 + t * 9.0 / (6.0 * 2.0)).ln()).sqrt();
        let expect = 2.0 * 4.0 / (52.0f64).sqrt()
            + 900.0 * 0.2 / 902.0f64.sqrt()
            + lg
            + 0.3 * 6f64.sqrt()
            + 0.3 * (2.0 * (6.0f64 / 1e-4).ln()).sqrt();
        assert!((radius_w_tn(&inp, 37, 0.2, lmin, lmax) - expect).abs() < 1e-12);
    }

    #[test]
    fn what_tn_examples() {
        let inp = inputs(1.0, 1e-6, 6, 2.0, 3.0, 0.5);
        let near = radius_what_tn(&inp, 100, 0.3, 1e12);
        assert!((near - 0.3).abs() < 1e-3);
        assert!(radius_what_tn(&inp, 100, 0.0, 1e12) < 1e-3);
        let t: f64 = 100.0;
        let s = (1.0f64 + 400.0).sqrt();
        let lg = (2.0 * (6.0e6f64).ln() + 6.0 * (1.0 + t * 4.0 / 6.0).ln()).sqrt();
        let noise = 0.5 * 6f64.sqrt() + 0.5 * (2.0 * (6.0e6f64).ln()).sqrt();
        let expect = 3.0 / 401.0 + 0.3 + lg / s + noise / s;
        assert!((radius_what_tn(&inp, 100, 0.3, 400.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn radius_monotonicity() {
        let inp = inputs(1.0, 1e-3, 6, 2.0, 3.0, 0.5);
        let mut prev = 0.0;
        for t in [0, 1, 5, 50, 500, 5000] {
            let w = radius_w_t(&inp, t);
            assert!(w >= prev);
            prev = w;
        }
        let mut prev = f64::INFINITY;
        for lm in [0.0, 1.0, 10.0, 1e3, 1e6] {
            let w = radius_what_tn(&inp, 10, 0.1, lm);
            assert!(w <= prev);
            prev = w;
        }
        let mut prev = 0.0;
        for vb in [0.0, 0.1, 1.0, 5.0] {
            let w = radius_w_tn(&inp, 10, vb, 4.0, 40.0);
            assert!(w >= prev);
            prev = w;
        }
    }

    #[test]
    fn bias_tolerance_example() {
        let eps = 3.0 / std::f64::consts::E.powi(2);
        let inp = inputs(1.0, eps, 2, 1.0, 2f64.sqrt(), 1.0);
        assert!((bias_test_tolerance(&inp, 0.0, 0.0) - (4.0 * 2f64.sqrt() + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn linear_max_balls() {
        let one = ConfidenceSet::new(vec![Ellipsoid::ball(v(&[0.0, 0.0]), 1.0).unwrap()]);
        assert!((linear_max(&one, &v(&[3.0, 4.0])).unwrap() - 5.0).abs() < 1e-12);
        let two = ConfidenceSet::new(vec![
            Ellipsoid::ball(v(&[0.0, 0.0]), 1.0).unwrap(),
            Ellipsoid::ball(v(&[0.0, 0.0]), 2.0).unwrap(),
        ]);
        assert!((linear_max(&two, &v(&[3.0, 4.0])).unwrap() - 5.0).abs() < 1e-12);
        assert!(linear_max(&ConfidenceSet::new(vec![]), &v(&[1.0])).is_err());
    }

    #[test]
    fn linear_max_dominates_rejection_sampling() {
        let mut r = rng::stream(31, &[0]);
        for _ in 0..5 {
            let set = oracles::random_overlapping_set(3, 3, &mut r);
            let c = DVector::from_fn(3, |_, _| r.random_range(-1.0..1.0));
            let ub = linear_max(&set, &c).unwrap();
            if let Some(lb) = oracles::rejection_max_linear(&set.ellipsoids, &c, 100_000, &mut r) {
                assert!(ub >= lb - 1e-12, "{ub} < {lb}");
            }
        }
    }

    #[test]
    fn ellipsoid_projection_lands_on_boundary() {
        let mut r = rng::stream(5, &[0]);
        for _ in 0..50 {
            let set = oracles::random_overlapping_set(4, 1, &mut r);
            let e = &set.ellipsoids[0];
            let z = DVector::from_fn(4, |_, _| r.random_range(-10.0..10.0));
            let p = e.project(&z);
            assert!(e.contains(&p, 1e-9));
            if !e.contains(&z, 0.0) {
                assert!((e.distance(&p) - e.radius).abs() < 1e-8);
                // KKT: z - p is parallel to M (p - c)
                let n = &e.shape * (&p - &e.center);
                let dz = &z - &p;
                let cos = n.dot(&dz) / (n.norm() * dz.norm());
                assert!((cos - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn feasible_point_cases() {
        let mut r = rng::stream(9, &[0]);
        let conc = ConfidenceSet::new(vec![
            Ellipsoid::ball(v(&[1.0, 2.0]), 1.0).unwrap(),
            Ellipsoid::ball(v(&[1.0, 2.0]), 3.0).unwrap(),
        ]);
        assert_eq!(feasible_point(&conc, 3, &mut r).unwrap(), v(&[1.0, 2.0]));
        let disj = ConfidenceSet::new(vec![
            Ellipsoid::ball(v(&[0.0, 0.0]), 1.0).unwrap(),
            Ellipsoid::ball(v(&[10.0, 0.0]), 1.0).unwrap(),
        ]);
        assert!(feasible_point(&disj, 3, &mut r).is_none());
        // Thin ellipsoid just past the beta bound: empty, and certified without Dykstra.
        let b = ParamBox { d1: 1, alpha_max: 1.0, beta_max: 1.0, beta_floor: None };
        let thin =
            Ellipsoid::new(v(&[0.5, -1.2]), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e6]), 100.0).unwrap();
        assert!(feasible_point(&ConfidenceSet::new(vec![thin.clone()]).with_bounds(b), 3, &mut r).is_none());
        let wide =
            Ellipsoid::new(v(&[0.5, -1.2]), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e4]), 100.0).unwrap();
        let p = feasible_point(&ConfidenceSet::new(vec![wide]).with_bounds(b), 3, &mut r).unwrap();
        assert!(b.contains(&p, 1e-9));
        for _ in 0..30 {
            let set = oracles::random_overlapping_set(5, 3, &mut r);
            let p = feasible_point(&set, 5, &mut r).expect("overlapping sets are feasible");
            assert!(set.contains(&p, 1e-9));
        }
    }

    #[test]
    fn box_support_matches_sampling() {
        let mut r = rng::stream(4, &[0]);
        for floor in [None, Some(0.3)] {
            let b = ParamBox { d1: 2, alpha_max: 1.5, beta_max: 2.0, beta_floor: floor };
            let c = v(&[0.3, -0.4, 0.7]);
            let best = (0..20_000).map(|_| b.sample(3, &mut r).dot(&c)).fold(f64::NEG_INFINITY, f64::max);
            let s = b.support(&c);
            assert!(best <= s + 1e-12 && best >= s - 0.05, "{best} vs {s}");
        }
        let b = ParamBox { d1: 2, alpha_max: 1.5, beta_max: 2.0, beta_floor: Some(0.3) };
        assert!((b.support(&v(&[0.0, 0.0, 1.0])) + 0.3).abs() < 1e-15);
        assert!((b.support(&v(&[0.0, 0.0, -1.0])) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn price_ucb_degenerate_set_is_greedy() {
        let spec = crate::offline::tests::spec5();
        let theta = v(&[0.3, 0.2, 0.25, 0.3, 0.35, -0.9]);
        let set = ConfidenceSet::new(vec![Ellipsoid::ball(theta.clone(), 0.0).unwrap()]);
        let ctx = Context::new(v(&[0.4, 0.5, 0.3, 0.6, 0.45]), v(&[1.1]));
        let grid = price_grid(&spec, 512);
        let (p, _) = price_ucb_max(&set, &ctx, &spec, 512).unwrap();
        let th = crate::model::DemandParams::from_stacked(&theta, 5);
        let target = crate::model::optimal_price(&th, &ctx, &spec).unwrap();
        let nearest = grid.iter().cloned().min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs())).unwrap();
        assert_eq!(p, nearest);
    }

    #[test]
    fn price_ucb_giant_ball_goes_to_an_end() {
        let spec = crate::offline::tests::spec5();
        let set = ConfidenceSet::new(vec![Ellipsoid::ball(DVector::zeros(6), 1e6).unwrap()]);
        let ctx = Context::new(v(&[0.4, 0.5, 0.3, 0.6, 0.45]), v(&[1.1]));
        let (p, val) = price_ucb_max(&set, &ctx, &spec, 64).unwrap();
        let end_value = |q: f64| 1e6 * (q * q * ctx.x.norm_squared() + q.powi(4) * 1.21).sqrt();
        let (l, u) = (spec.lower_price(), spec.upper_price());
        let expect = if end_value(u) >= end_value(l) { u } else { l };
        assert_eq!(p, expect);
        assert!((val - end_value(expect)).abs() <= 1e-9 * val);
    }

    #[test]
    fn price_ucb_matches_linear_max_at_each_grid_point() {
        let spec = crate::offline::tests::spec5();
        let mut r = rng::stream(12, &[0]);
        let set = oracles::random_overlapping_set(6, 3, &mut r);
        let ctx = Context::new(v(&[0.4, 0.5, 0.3, 0.6, 0.45]), v(&[1.1]));
        let (p, val) = price_ucb_max(&set, &ctx, &spec, 64).unwrap();
        let direct = linear_max(&set, &(ctx.feature(p) * p)).unwrap();
        assert!((val - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        for q in price_grid(&spec, 64) {
            assert!(linear_max(&set, &(ctx.feature(q) * q)).unwrap() <= val + 1e-9 * (1.0 + val.abs()));
        }
    }
}
