//! Regularized Gram-matrix state and ridge estimates.

use nalgebra::{DMatrix, DVector};

use crate::error::{PricingError, Result};
use crate::model::{Context, DemandParams};

/// `lam I + sum A A'` together with `sum A D`, where `A = [x; y p]`.
///
/// When built with offline data, the offline Gram and moment are folded in
/// at construction, giving the combined state.
#[derive(Debug, Clone, PartialEq)]
pub struct GramState {
    pub sigma: DMatrix<f64>,
    pub moment: DVector<f64>,
    pub t: usize,
    pub lam: f64,
    pub includes_offline: bool,
}

impl GramState {
    pub fn new(lam: f64, dim: usize) -> Result<Self> {
        if !(lam > 0.0 && lam.is_finite()) {
            return Err(PricingError::InvalidInput(format!("regularization must be positive, got {lam}")));
        }
        Ok(Self {
            sigma: DMatrix::identity(dim, dim) * lam,
            moment: DVector::zeros(dim),
            t: 0,
            lam,
            includes_offline: false,
        })
    }

    /// Combined state seeded with an offline Gram and moment.
    pub fn with_offline(lam: f64, offline_gram: &DMatrix<f64>, offline_moment: &DVector<f64>) -> Result<Self> {
        let dim = offline_moment.len();
        if offline_gram.nrows() != dim || offline_gram.ncols() != dim {
            return Err(PricingError::InvalidInput("offline gram and moment dimensions differ".into()));
        }
        let mut s = Self::new(lam, dim)?;
        s.sigma += offline_gram;
        s.moment += offline_moment;
        s.includes_offline = true;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.moment.len()
    }

    /// Adds one raw observation `(feature, response)`.
    pub fn update_feature(&mut self, a: &DVector<f64>, response: f64) {
        self.sigma.ger(1.0, a, a, 1.0);
        self.moment.axpy(response, a, 1.0);
        self.t += 1;
    }

    /// Adds a pricing observation with feature `[x; y p]`.
    pub fn update(&mut self, ctx: &Context, p: f64, demand: f64) {
        self.update_feature(&ctx.feature(p), demand);
    }

    /// `sigma^{-1} moment` by Cholesky solve.
    pub fn ridge_solve_vec(&self) -> Result<DVector<f64>> {
        spd_solve(&self.sigma, &self.moment)
    }

    pub fn ridge_solve(&self, d1: usize) -> Result<DemandParams> {
        Ok(DemandParams::from_stacked(&self.ridge_solve_vec()?, d1))
    }

    /// `sigma` without the `lam I` floor.
    pub fn data_gram(&self) -> DMatrix<f64> {
        &self.sigma - DMatrix::identity(self.dim(), self.dim()) * self.lam
    }
}

/// Solves `m z = b` for symmetric positive-definite `m`.
pub fn spd_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = m.clone().cholesky().ok_or_else(|| PricingError::Numeric("matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

/// Smallest and largest eigenvalue of the symmetric part of `m`.
pub fn eig_extremes(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(PricingError::InvalidInput(format!(
            "need a nonempty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(PricingError::InvalidInput("matrix has non-finite entries".into()));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Extreme eigenpairs, for residual checks.
pub fn eig_extreme_pairs(m: &DMatrix<f64>) -> Result<[(f64, DVector<f64>); 2]> {
    eig_extremes(m)?;
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let (mut imin, mut imax) = (0, 0);
    for i in 0..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[imax] {
            imax = i;
        }
    }
    Ok([
        (eig.eigenvalues[imin], eig.eigenvectors.column(imin).into_owned()),
        (eig.eigenvalues[imax], eig.eigenvectors.column(imax).into_owned()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
        DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn init_is_scaled_identity() {
        let g = GramState::new(1.0, 3).unwrap();
        assert_eq!(g.sigma, DMatrix::identity(3, 3));
        assert_eq!(g.moment, DVector::zeros(3));
        assert!(GramState::new(0.0, 3).is_err());
    }

    #[test]
    fn zero_demand_leaves_moment() {
        let mut g = GramState::new(1.0, 2).unwrap();
        let c = Context::new(DVector::from_vec(vec![1.0]), DVector::from_vec(vec![2.0]));
        g.update(&c, 3.0, 0.0);
        assert_eq!(g.moment, DVector::zeros(2));
        assert_eq!(g.sigma[(1, 1)], 1.0 + 36.0);
        assert_eq!(g.t, 1);
    }

    #[test]
    fn ridge_single_observation() {
        let mut g = GramState::new(1.0, 2).unwrap();
        g.update_feature(&DVector::from_vec(vec![1.0, 0.0]), 2.0);
        let th = g.ridge_solve_vec().unwrap();
        assert!((th[0] - 1.0).abs() < 1e-15 && th[1].abs() < 1e-15);
        let empty = GramState::new(1.0, 4).unwrap();
        assert_eq!(empty.ridge_solve_vec().unwrap(), DVector::zeros(4));
    }

    #[test]
    fn ridge_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 6;
        let mut g = GramState::new(1.0, d).unwrap();
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..50 {
            let a = rand_vec(&mut rng, d);
            let y = rng.random_range(-2.0..2.0);
            g.update_feature(&a, y);
            rows.push(a);
            ys.push(y);
        }
        let oracle = oracles::ridge_normal_equations(&rows, &ys, 1.0);
        let got = g.ridge_solve_vec().unwrap();
        assert!((got - &oracle).norm() <= 1e-8 * oracle.norm());
    }

    #[test]
    fn small_lambda_recovers_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 3;
        let mut g = GramState::new(1e-12, d).unwrap();
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..(d + 1) {
            let a = rand_vec(&mut rng, d);
            let y = rng.random_range(-2.0..2.0);
            g.update_feature(&a, y);
            rows.push(a);
            ys.push(y);
        }
        let ols = oracles::ridge_normal_equations(&rows, &ys, 0.0);
        assert!((g.ridge_solve_vec().unwrap() - ols).norm() < 1e-8);
    }

    #[test]
    fn incremental_equals_batch_and_lambda_min_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 4;
        let mut g = GramState::new(0.5, d).unwrap();
        let mut batch = DMatrix::identity(d, d) * 0.5;
        let mut prev_min = 0.5 - 1e-12;
        for _ in 0..200 {
            let a = rand_vec(&mut rng, d);
            g.update_feature(&a, 0.0);
            batch += &a * a.transpose();
            assert!((&g.sigma - &batch).norm() <= 1e-10 * batch.norm());
            let (lo, _) = eig_extremes(&g.sigma).unwrap();
            assert!(lo >= prev_min - 1e-10);
            assert!(lo >= 0.5 - 1e-10);
            prev_min = lo;
        }
    }

    #[test]
    fn noiseless_consistency_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = 4;
        let theta = rand_vec(&mut rng, d);
        for lam in [1.0, 1e-2, 1e-4] {
            let mut g = GramState::new(lam, d).unwrap();
            for _ in 0..20 {
                let a = rand_vec(&mut rng, d);
                g.update_feature(&a, theta.dot(&a));
            }
            let (feat_min, _) = eig_extremes(&g.data_gram()).unwrap();
            let err = (g.ridge_solve_vec().unwrap() - &theta).norm();
            assert!(err <= lam * theta.norm() / feat_min + 1e-8, "lam {lam}: err {err}");
        }
    }

    #[test]
    fn offline_seeded_state() {
        let gram = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 4.0]);
        let g = GramState::with_offline(1.0, &gram, &DVector::zeros(3)).unwrap();
        assert_eq!(g.sigma, DMatrix::identity(3, 3) + &gram);
        assert!(g.includes_offline);
    }

    #[test]
    fn eig_examples() {
        let (lo, hi) = eig_extremes(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]))).unwrap();
        assert_eq!((lo, hi), (1.0, 3.0));
        let (lo, hi) = eig_extremes(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
        let mut bad = DMatrix::identity(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert!(eig_extremes(&bad).is_err());
    }

    #[test]
    fn eig_residuals_on_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let b = DMatrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
            let a = &b * b.transpose();
            let (lo, _) = eig_extremes(&a).unwrap();
            assert!(lo >= -1e-10);
            for (lam, v) in eig_extreme_pairs(&a).unwrap() {
                assert!((&a * &v - &v * lam).norm() <= 1e-8);
            }
        }
    }
}
