//! Offline logs: the dataset, its Gram summary, the empirical offline price
//! rule, and generators with controlled bias and dispersion.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::contexts::ContextSource;
use crate::error::{PricingError, Result};
use crate::estimation::eig_extremes;
use crate::model::{unconstrained_optimal_price, Context, DemandParams, ProblemSpec};
use crate::rng::{self, purpose};

/// One logged tuple `(x, y, p, D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineRow {
    pub ctx: Context,
    pub price: f64,
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    pub d1: usize,
    pub d2: usize,
    pub rows: Vec<OfflineRow>,
}

impl OfflineDataset {
    pub fn new(d1: usize, d2: usize) -> Self {
        Self { d1, d2, rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, ctx: Context, price: f64, demand: f64) -> Result<()> {
        if ctx.d1() != self.d1 || ctx.d2() != self.d2 {
            return Err(PricingError::InvalidInput("offline row has wrong dimensions".into()));
        }
        let finite = ctx.x.iter().chain(ctx.y.iter()).chain([&price, &demand]).all(|v| v.is_finite());
        if !finite {
            return Err(PricingError::InvalidInput("offline row has a non-finite entry".into()));
        }
        self.rows.push(OfflineRow { ctx, price, demand });
        Ok(())
    }

    /// Writes `x1..xd1,y1..yd2,p,D` with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.d1).map(|i| format!("x{i}")).collect();
        header.extend((1..=self.d2).map(|i| format!("y{i}")));
        header.push("p".into());
        header.push("D".into());
        wr.write_record(&header)?;
        for row in &self.rows {
            let rec: Vec<String> = row
                .ctx
                .x
                .iter()
                .chain(row.ctx.y.iter())
                .chain([row.price, row.demand].iter())
                .map(|v| format!("{v:?}"))
                .collect();
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let d1 = header.iter().filter(|h| h.starts_with('x')).count();
        let d2 = header.iter().filter(|h| h.starts_with('y')).count();
        let expected = d1 + d2 + 2;
        let names_ok = header.len() == expected
            && header.iter().take(d1).enumerate().all(|(i, h)| h == format!("x{}", i + 1))
            && header.iter().skip(d1).take(d2).enumerate().all(|(i, h)| h == format!("y{}", i + 1))
            && header.get(expected - 2) == Some("p")
            && header.get(expected - 1) == Some("D");
        if d1 == 0 || d2 == 0 || !names_ok {
            return Err(PricingError::InvalidInput(format!("bad offline header: {:?}", header)));
        }
        let mut ds = Self::new(d1, d2);
        for rec in rd.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| PricingError::InvalidInput(format!("bad number in offline csv: {e}")))?;
            if vals.len() != expected {
                return Err(PricingError::InvalidInput("offline row has wrong field count".into()));
            }
            let ctx =
                Context::new(DVector::from_column_slice(&vals[..d1]), DVector::from_column_slice(&vals[d1..d1 + d2]));
            ds.push(ctx, vals[d1 + d2], vals[d1 + d2 + 1])?;
        }
        Ok(ds)
    }
}

/// Sufficient statistics of an offline dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineSummary {
    pub n: usize,
    pub d1: usize,
    pub d2: usize,
    /// Block Gram `sum [x; y p][x; y p]'`.
    pub sigma_hat: DMatrix<f64>,
    /// `sum [x; y p] D`.
    pub moment: DVector<f64>,
    /// `Sigma_xx^{-1} Sigma_xy`; present only for `d2 = 1` with invertible `Sigma_xx`.
    pub a_hat: Option<DVector<f64>>,
    pub lam_min: f64,
    pub lam_max: f64,
    /// `lambda_min(Sigma_xx) / N`.
    pub dispersion_c: f64,
    /// `sum x x' / y^2` over the log (`d2 = 1`); the price-fit objective is a
    /// quadratic form in this matrix.
    pub price_fit_gram: Option<DMatrix<f64>>,
}

impl OfflineSummary {
    /// Summary of an empty log: all-zero Gram, used when `N = 0`.
    pub fn empty(d1: usize, d2: usize) -> Self {
        let d = d1 + d2;
        Self {
            n: 0,
            d1,
            d2,
            sigma_hat: DMatrix::zeros(d, d),
            moment: DVector::zeros(d),
            a_hat: None,
            lam_min: 0.0,
            lam_max: 0.0,
            dispersion_c: 0.0,
            price_fit_gram: None,
        }
    }

    pub fn sigma_xx(&self) -> DMatrix<f64> {
        self.sigma_hat.view((0, 0), (self.d1, self.d1)).into_owned()
    }

    pub fn sigma_xy(&self) -> DMatrix<f64> {
        self.sigma_hat.view((0, self.d1), (self.d1, self.d2)).into_owned()
    }

    pub fn sigma_yy(&self) -> DMatrix<f64> {
        self.sigma_hat.view((self.d1, self.d1), (self.d2, self.d2)).into_owned()
    }
}

pub fn build_summary(data: &OfflineDataset) -> Result<OfflineSummary> {
    if data.is_empty() {
        return Err(PricingError::InvalidInput("offline summary needs at least one row".into()));
    }
    let (d1, d2) = (data.d1, data.d2);
    let d = d1 + d2;
    let mut sigma = DMatrix::zeros(d, d);
    let mut moment = DVector::zeros(d);
    let mut fit = if d2 == 1 { Some(DMatrix::zeros(d1, d1)) } else { None };
    for row in &data.rows {
        let a = row.ctx.feature(row.price);
        sigma.ger(1.0, &a, &a, 1.0);
        moment.axpy(row.demand, &a, 1.0);
        if let Some(f) = fit.as_mut() {
            let y = row.ctx.y[0];
            f.ger(1.0 / (y * y), &row.ctx.x, &row.ctx.x, 1.0);
        }
    }
    let (lam_min, lam_max) = eig_extremes(&sigma)?;
    let sxx = sigma.view((0, 0), (d1, d1)).into_owned();
    let (sxx_min, _) = eig_extremes(&sxx)?;
    let a_hat = if d2 == 1 {
        let sxy = sigma.view((0, d1), (d1, 1)).column(0).into_owned();
        sxx.clone().cholesky().map(|c| c.solve(&sxy))
    } else {
        None
    };
    Ok(OfflineSummary {
        n: data.len(),
        d1,
        d2,
        sigma_hat: sigma,
        moment,
        a_hat,
        lam_min,
        lam_max,
        dispersion_c: sxx_min.max(0.0) / data.len() as f64,
        price_fit_gram: fit,
    })
}

/// Empirical offline price rule `A_hat' x / y` (unprojected).
pub fn phat(summary: &OfflineSummary, ctx: &Context) -> Result<f64> {
    if summary.d2 != 1 || ctx.d2() != 1 {
        return Err(PricingError::UnsupportedDimension("the offline price rule needs d2 = 1".into()));
    }
    let a = summary
        .a_hat
        .as_ref()
        .ok_or_else(|| PricingError::Numeric("offline Sigma_xx is singular; A_hat unavailable".into()))?;
    if a.len() != ctx.d1() {
        return Err(PricingError::InvalidInput("context d1 does not match A_hat".into()));
    }
    Ok(a.dot(&ctx.x) / ctx.y[0])
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

/// `delta^2 = E[(p_hat - p*)^2]` over `m` i.i.d. contexts.
///
/// Harness-side only: it needs `theta*`, which no policy ever sees.
pub fn estimate_delta_sq(
    summary: &OfflineSummary,
    theta_star: &DemandParams,
    sampler: &dyn ContextSource,
    m: usize,
    seed: u64,
) -> Result<McEstimate> {
    if m == 0 {
        return Err(PricingError::InvalidInput("need at least one Monte Carlo sample".into()));
    }
    let mut r = rng::stream(seed, &[purpose::DELTA_MC]);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..m {
        let ctx = sampler.sample(&mut r);
        let gap = phat(summary, &ctx)? - unconstrained_optimal_price(theta_star, &ctx)?;
        let v = gap * gap;
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / m as f64;
    let var = if m > 1 { ((sum_sq - m as f64 * mean * mean) / (m as f64 - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { mean, std_err: (var / m as f64).sqrt(), samples: m })
}

/// `theta* + v_true * direction`, reflecting the direction per block when
/// needed to stay inside the parameter box.
pub fn make_biased_params(
    theta_star: &DemandParams,
    v_true: f64,
    direction: &DVector<f64>,
    spec: &ProblemSpec,
) -> Result<DemandParams> {
    if !(v_true >= 0.0 && v_true.is_finite()) {
        return Err(PricingError::InvalidInput(format!("bias must be >= 0, got {v_true}")));
    }
    if v_true == 0.0 {
        return Ok(theta_star.clone());
    }
    let dim = theta_star.dim();
    if direction.len() != dim {
        return Err(PricingError::InvalidInput("bias direction has wrong dimension".into()));
    }
    let norm = direction.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(PricingError::InvalidInput("bias direction must be nonzero".into()));
    }
    let unit = direction / norm;
    let base = theta_star.stacked();
    let d1 = theta_star.d1();
    for (sa, sb) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
        let mut dir = unit.clone();
        dir.rows_mut(0, d1).scale_mut(sa);
        dir.rows_mut(d1, dim - d1).scale_mut(sb);
        let cand = DemandParams::from_stacked(&(&base + dir * v_true), d1);
        if spec.in_param_box(&cand, 0.0) {
            return Ok(cand);
        }
    }
    Err(PricingError::InfeasibleBias { v_true })
}

/// Offline price assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriceScheme {
    /// `p ~ U[lo, hi]`, with `[lo, hi]` defaulting to `[l, u]`.
    Uniform {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
    },
    /// The same price on every row.
    Fixed { price: f64 },
    /// `p` uniform on `{l, u}`.
    TwoPoint,
}

impl PriceScheme {
    /// Uniform over the whole price interval.
    pub fn uniform() -> Self {
        PriceScheme::Uniform { lo: None, hi: None }
    }

    pub fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        let (l, u) = (spec.lower_price(), spec.upper_price());
        match self {
            PriceScheme::Uniform { lo, hi } => {
                let (a, b) = (lo.unwrap_or(l), hi.unwrap_or(u));
                if !(a.is_finite() && b.is_finite() && a <= b) {
                    return Err(PricingError::Config(format!("uniform price window [{a}, {b}] is empty")));
                }
            }
            PriceScheme::Fixed { price } => {
                if !price.is_finite() {
                    return Err(PricingError::Config("fixed offline price must be finite".into()));
                }
            }
            PriceScheme::TwoPoint => {}
        }
        Ok(())
    }
}

/// Draws `n` offline rows from the offline market `theta_prime`.
pub fn generate_offline(
    theta_prime: &DemandParams,
    spec: &ProblemSpec,
    n: usize,
    scheme: &PriceScheme,
    sampler: &dyn ContextSource,
    seed: u64,
) -> Result<OfflineDataset> {
    scheme.validate(spec)?;
    let mut ctx_rng = rng::stream(seed, &[purpose::OFFLINE_CONTEXTS]);
    let mut price_rng = rng::stream(seed, &[purpose::OFFLINE_PRICES]);
    let mut noise_rng = rng::stream(seed, &[purpose::OFFLINE_NOISE]);
    let (l, u) = (spec.lower_price(), spec.upper_price());
    let mut ds = OfflineDataset::new(spec.d1, spec.d2);
    ds.rows.reserve(n);
    for _ in 0..n {
        let ctx = sampler.sample(&mut ctx_rng);
        let price = match scheme {
            PriceScheme::Uniform { lo, hi } => price_rng.random_range(lo.unwrap_or(l)..=hi.unwrap_or(u)),
            PriceScheme::Fixed { price } => *price,
            PriceScheme::TwoPoint => {
                if price_rng.random_bool(0.5) {
                    l
                } else {
                    u
                }
            }
        };
        let demand = theta_prime.mean_demand(price, &ctx)? + gaussian(&mut noise_rng, spec.noise_r);
        ds.push(ctx, price, demand)?;
    }
    Ok(ds)
}

pub(crate) fn gaussian(r: &mut rng::Rng, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(r);
    if sd == 0.0 {
        0.0
    } else {
        z * sd
    }
}
