//! Environments, episodes, replication and aggregation.
//!
//! One online model (the true parameters, the context law and the derived
//! problem bounds) is drawn from the model seed and shared by every
//! replication. Each replication then draws its own bias direction, offline
//! log, online contexts and noise from a stream keyed by `(seed, rep)`; all
//! policies in a replication face the same contexts and noise.

use std::io::Write;

use nalgebra::DVector;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bandit::{lb_policy_new, lb_run, lb_ucb_new, BanditEnv, LbConfig};
use crate::config::{ExperimentConfig, PolicyConfig};
use crate::contexts::{ContextSource, UniformBoxSampler};
use crate::error::{PricingError, Result};
use crate::model::{step_regret, unconstrained_optimal_price, Context, DemandParams, ProblemSpec};
use crate::offline::{
    build_summary, estimate_delta_sq, gaussian, generate_offline, make_biased_params, McEstimate, OfflineDataset,
    OfflineSummary,
};
use crate::policy::{
    default_eps, ClairvoyantPolicy, Co3Config, GreedyOfflinePolicy, OfuPolicy, PolicyKind, PricingPolicy, Rco3Config,
    Rco3Policy, TsConfig, TsPolicy, DEFAULT_RESTARTS,
};
use crate::rng::{self, purpose, Rng};

/// Per-step and cumulative regret of one policy in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub policy: String,
    pub rep: usize,
    pub instant: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretTrace {
    pub fn from_instant(policy: &str, rep: usize, instant: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = instant
            .iter()
            .map(|r| {
                acc += r;
                acc
            })
            .collect();
        Self { policy: policy.to_string(), rep, instant, cumulative }
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// The part of an environment shared by all replications.
#[derive(Debug, Clone)]
pub struct OnlineModel {
    pub spec: ProblemSpec,
    pub sampler: UniformBoxSampler,
    pub theta_star: DemandParams,
}

/// Everything one replication needs. Policies receive only `spec` and the
/// offline summary; `theta_star`, `theta_offline` and `v_true` stay here.
#[derive(Debug, Clone)]
pub struct Environment {
    pub spec: ProblemSpec,
    pub sampler: UniformBoxSampler,
    pub theta_star: DemandParams,
    pub theta_offline: DemandParams,
    pub v_true: f64,
    pub offline: OfflineDataset,
    pub summary: OfflineSummary,
    pub rep: usize,
    /// Seed of this replication's streams.
    pub seed: u64,
}

impl Environment {
    /// Streams of online contexts and online noise.
    pub fn online_streams(&self) -> (Rng, Rng) {
        (rng::stream(self.seed, &[purpose::ONLINE_CONTEXTS]), rng::stream(self.seed, &[purpose::ONLINE_NOISE]))
    }
}

pub fn rep_seed(master: u64, rep: usize) -> u64 {
    rng::child_seed(master, &[rep as u64])
}

fn sampler_for(cfg: &ExperimentConfig) -> UniformBoxSampler {
    let p = &cfg.problem;
    match &p.sampler {
        Some(s) => UniformBoxSampler { d1: p.d1, d2: p.d2, x_lo: s.x_lo, x_hi: s.x_hi, y_lo: s.y_lo, y_hi: s.y_hi },
        None => UniformBoxSampler::default_for(p.d1, p.d2),
    }
}

/// Exact range of `w'z` over the box `z_i in [lo, hi]`.
fn linear_range(w: &DVector<f64>, lo: f64, hi: f64) -> (f64, f64) {
    w.iter().fold((0.0, 0.0), |(a, b), &wi| (a + (wi * lo).min(wi * hi), b + (wi * lo).max(wi * hi)))
}

/// Problem bounds implied by `theta*` and the sampler support.
pub fn derive_spec(
    theta: &DemandParams,
    sampler: &UniformBoxSampler,
    alpha_max: f64,
    beta_max: f64,
    noise_r: f64,
) -> Result<ProblemSpec> {
    let (l_alpha, u_alpha) = linear_range(&theta.alpha, sampler.x_lo, sampler.x_hi);
    let (b_lo, b_hi) = linear_range(&theta.beta, sampler.y_lo, sampler.y_hi);
    if !(l_alpha > 0.0) {
        return Err(PricingError::Config(format!(
            "alpha'x must stay positive over the context support (min {l_alpha})"
        )));
    }
    if !(b_hi < 0.0) {
        return Err(PricingError::Config(format!("beta'y must stay negative over the context support (max {b_hi})")));
    }
    let spec = ProblemSpec {
        d1: theta.d1(),
        d2: theta.d2(),
        alpha_max,
        beta_max,
        x_max: sampler.x_max(),
        y_max: sampler.y_max(),
        y_min: sampler.y_min(),
        l_alpha,
        u_alpha,
        l_beta: -b_hi,
        u_beta: -b_lo,
        noise_r,
        lambda_min_exx: sampler.lambda_min_exx(),
    };
    spec.validate().map_err(|e| PricingError::Config(format!("derived problem is infeasible: {e}")))?;
    if !spec.in_param_box(theta, 0.0) {
        return Err(PricingError::Config("theta* lies outside the parameter norm bounds".into()));
    }
    Ok(spec)
}

/// Samples 10^3 contexts and checks the bounds of the problem against them.
pub fn check_assumptions(
    spec: &ProblemSpec,
    theta: &DemandParams,
    sampler: &dyn ContextSource,
    seed: u64,
) -> Result<()> {
    let mut r = rng::stream(seed, &[purpose::ONLINE_CONTEXTS, u64::MAX]);
    let tol = 1e-9;
    for _ in 0..1000 {
        let c = sampler.sample(&mut r);
        let (a, b) = theta.demand_terms(&c)?;
        let ok = c.is_admissible(spec, tol)
            && a >= spec.l_alpha - tol
            && a <= spec.u_alpha + tol
            && -b >= spec.l_beta - tol
            && -b <= spec.u_beta + tol;
        let p = unconstrained_optimal_price(theta, &c)?;
        if !ok || p < spec.lower_price() - tol || p > spec.upper_price() + tol {
            return Err(PricingError::Config("sampled context violates the derived problem bounds".into()));
        }
    }
    Ok(())
}

/// `alpha_i ~ U[0.5, 1.5]/sqrt(d1)`, `beta_j ~ -U[0.5, 1.5]/sqrt(d2)`.
pub fn sample_theta(d1: usize, d2: usize, r: &mut Rng) -> DemandParams {
    let (s1, s2) = ((d1 as f64).sqrt(), (d2 as f64).sqrt());
    DemandParams::new(
        DVector::from_fn(d1, |_, _| r.random_range(0.5..=1.5) / s1),
        DVector::from_fn(d2, |_, _| -r.random_range(0.5..=1.5) / s2),
    )
}

pub fn build_model(cfg: &ExperimentConfig) -> Result<OnlineModel> {
    let p = &cfg.problem;
    let sampler = sampler_for(cfg);
    let theta_star = match &p.theta {
        Some(t) => DemandParams::new(DVector::from_vec(t.alpha.clone()), DVector::from_vec(t.beta.clone())),
        None => sample_theta(p.d1, p.d2, &mut rng::stream(p.model_seed.unwrap_or(cfg.run.seed), &[purpose::THETA])),
    };
    let spec = derive_spec(&theta_star, &sampler, p.alpha_max, p.beta_max, p.noise_r)?;
    check_assumptions(&spec, &theta_star, &sampler, cfg.run.seed)?;
    Ok(OnlineModel { spec, sampler, theta_star })
}

fn random_unit(d: usize, r: &mut Rng) -> DVector<f64> {
    loop {
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut *r));
        let n: f64 = z.norm();
        if n > 1e-12 {
            return z / n;
        }
    }
}

/// Replication `rep` of the experiment with realized bias `v_true`.
pub fn build_env_with(cfg: &ExperimentConfig, model: &OnlineModel, v_true: f64, rep: usize) -> Result<Environment> {
    let seed = rep_seed(cfg.run.seed, rep);
    let mut dir_rng = rng::stream(seed, &[purpose::BIAS_DIRECTION]);
    let mut theta_offline = None;
    for _ in 0..64 {
        let dir = random_unit(model.spec.dim(), &mut dir_rng);
        match make_biased_params(&model.theta_star, v_true, &dir, &model.spec) {
            Ok(t) => {
                theta_offline = Some(t);
                break;
            }
            Err(PricingError::InfeasibleBias { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let theta_offline = theta_offline.ok_or(PricingError::InfeasibleBias { v_true })?;
    let offline =
        generate_offline(&theta_offline, &model.spec, cfg.offline.n, &cfg.offline.price_scheme, &model.sampler, seed)?;
    let summary =
        if offline.is_empty() { OfflineSummary::empty(model.spec.d1, model.spec.d2) } else { build_summary(&offline)? };
    Ok(Environment {
        spec: model.spec.clone(),
        sampler: model.sampler.clone(),
        theta_star: model.theta_star.clone(),
        theta_offline,
        v_true,
        offline,
        summary,
        rep,
        seed,
    })
}

pub fn build_env(cfg: &ExperimentConfig, rep: usize) -> Result<Environment> {
    let model = build_model(cfg)?;
    build_env_with(cfg, &model, cfg.offline.resolved_v_true(cfg.run.horizon), rep)
}

/// Instantiates a pricing policy from its config entry.
pub fn make_policy(
    pc: &PolicyConfig,
    env: &Environment,
    run: &crate::config::RunConfig,
    seed: u64,
) -> Result<Box<dyn PricingPolicy>> {
    let horizon = run.horizon;
    let co3 = || Co3Config {
        v_bound: pc.resolved_v_bound(env.v_true),
        lam: pc.lam.unwrap_or(1.0),
        eps: pc.eps.unwrap_or_else(|| default_eps(horizon)),
        horizon,
        grid_size: run.grid_size,
        restarts: DEFAULT_RESTARTS,
    };
    let ts = || TsConfig {
        prior_cov_scale: pc.prior_cov_scale.unwrap_or(1.0),
        noise_sigma: pc.noise_sigma.unwrap_or(env.spec.noise_r),
        lam: pc.lam.unwrap_or(1.0),
    };
    let s = &env.spec;
    Ok(match pc.kind {
        PolicyKind::Co3 => Box::new(OfuPolicy::co3(s, &env.summary, &co3(), seed)?),
        PolicyKind::Gco3 => Box::new(OfuPolicy::gco3(s, &env.summary, &co3(), seed)?),
        PolicyKind::Ucb => Box::new(OfuPolicy::ucb(s, &co3(), seed)?),
        PolicyKind::UcbOffline => Box::new(OfuPolicy::ucb_offline(s, &env.summary, &co3(), seed)?),
        PolicyKind::Rco3 => {
            let mut c = Rco3Config::new(pc.alpha_exp.unwrap_or(0.25), horizon);
            c.lam = pc.lam.unwrap_or(1.0);
            c.eps = pc.eps.unwrap_or(c.eps);
            c.grid_size = run.grid_size;
            c.test_scale = pc.test_scale.unwrap_or(1.0);
            Box::new(Rco3Policy::new(s, &env.summary, &c, seed)?)
        }
        PolicyKind::Ts => Box::new(TsPolicy::online(s, &ts(), seed)?),
        PolicyKind::TsOffline => Box::new(TsPolicy::offline(s, &env.summary, &ts(), seed)?),
        PolicyKind::GreedyOffline => Box::new(GreedyOfflinePolicy::new(s, &env.summary)?),
        PolicyKind::Clairvoyant => Box::new(ClairvoyantPolicy::new(&env.theta_star, s)?),
        PolicyKind::LbUcb | PolicyKind::LbOfflineUcb => {
            return Err(PricingError::InvalidInput(format!("`{}` is not a pricing policy", pc.kind)))
        }
    })
}

/// Runs `horizon` rounds and records `r*(x_t) - r(p_t, x_t)` each round.
pub fn run_episode(
    policy: &mut dyn PricingPolicy,
    env: &Environment,
    horizon: usize,
    label: &str,
) -> Result<RegretTrace> {
    let (mut ctx_rng, mut noise_rng) = env.online_streams();
    let (l, u) = (env.spec.lower_price(), env.spec.upper_price());
    let mut instant = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let ctx: Context = env.sampler.sample(&mut ctx_rng);
        let noise = gaussian(&mut noise_rng, env.spec.noise_r);
        let p = policy.choose_price(&ctx)?;
        if !(p >= l && p <= u) {
            return Err(PricingError::Contract(format!("{label} charged {p} outside [{l}, {u}] at round {}", t + 1)));
        }
        instant.push(step_regret(&env.theta_star, p, &ctx, &env.spec)?);
        policy.observe(env.theta_star.mean_demand(p, &ctx)? + noise)?;
    }
    Ok(RegretTrace::from_instant(label, env.rep, instant))
}

/// Diagnostics of one replication, recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepInfo {
    pub rep: usize,
    pub v_true: f64,
    pub offline_lam_min: f64,
    pub offline_lam_max: f64,
    pub dispersion_c: f64,
    pub delta_sq: Option<McEstimate>,
    /// `(label, status)` for policies that report one.
    pub policy_status: Vec<(String, String)>,
}

/// Per-policy mean curve with a two-standard-error band.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyAggregate {
    pub policy: String,
    pub mean: Vec<f64>,
    pub band_low: Vec<f64>,
    pub band_high: Vec<f64>,
    pub finals: Vec<f64>,
}

impl PolicyAggregate {
    pub fn mean_final(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }

    /// Sample standard deviation of the final regrets.
    pub fn std_final(&self) -> f64 {
        sample_std(&self.finals)
    }
}

fn sample_std(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / n as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Mean and `mean -/+ 2 * std / sqrt(n)` per step, summing in the given order.
pub fn aggregate(policy: &str, traces: &[&RegretTrace]) -> PolicyAggregate {
    let n = traces.len();
    let len = traces.iter().map(|t| t.cumulative.len()).min().unwrap_or(0);
    let mut mean = Vec::with_capacity(len);
    let mut lo = Vec::with_capacity(len);
    let mut hi = Vec::with_capacity(len);
    let mut col = vec![0.0; n];
    for t in 0..len {
        for (i, tr) in traces.iter().enumerate() {
            col[i] = tr.cumulative[t];
        }
        let m = col.iter().sum::<f64>() / n as f64;
        let half = 2.0 * sample_std(&col) / (n as f64).sqrt();
        mean.push(m);
        lo.push(m - half);
        hi.push(m + half);
    }
    PolicyAggregate {
        policy: policy.to_string(),
        mean,
        band_low: lo,
        band_high: hi,
        finals: traces.iter().map(|t| t.final_regret()).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub v_true: f64,
    /// Ordered by policy (config order), then replication.
    pub traces: Vec<RegretTrace>,
    pub aggregates: Vec<PolicyAggregate>,
    pub reps: Vec<RepInfo>,
}

impl ExperimentResult {
    pub fn aggregate(&self, label: &str) -> Option<&PolicyAggregate> {
        self.aggregates.iter().find(|a| a.policy == label)
    }

    pub fn mean_final(&self, label: &str) -> Option<f64> {
        self.aggregate(label).map(|a| a.mean_final())
    }
}

fn run_rep(
    cfg: &ExperimentConfig,
    model: &OnlineModel,
    v_true: f64,
    rep: usize,
) -> Result<(Vec<RegretTrace>, RepInfo)> {
    let env = build_env_with(cfg, model, v_true, rep)?;
    let horizon = cfg.run.horizon;
    let mut traces = Vec::with_capacity(cfg.policies.len());
    let mut status = Vec::new();
    let mut bandit: Option<BanditEnv> = None;
    for (i, pc) in cfg.policies.iter().enumerate() {
        let label = pc.label();
        let pseed = rng::child_seed(env.seed, &[purpose::POLICY, i as u64]);
        if pc.kind.is_linear_bandit() {
            let spec = cfg.problem.bandit.as_ref().expect("validated");
            if bandit.is_none() {
                let model_seed = cfg.problem.model_seed.unwrap_or(cfg.run.seed);
                bandit =
                    Some(BanditEnv::generate(spec, cfg.offline.n, v_true, cfg.problem.noise_r, model_seed, env.seed)?);
            }
            let benv = bandit.as_ref().expect("just built");
            let mut lc =
                LbConfig::new(pc.resolved_v_bound(v_true), horizon, spec.a_max, spec.theta_norm, cfg.problem.noise_r);
            lc.lam = pc.lam.unwrap_or(1.0);
            lc.eps = pc.eps.unwrap_or(lc.eps);
            let mut policy = match pc.kind {
                PolicyKind::LbOfflineUcb => lb_policy_new(&benv.offline, spec.d, &lc)?,
                _ => lb_ucb_new(spec.d, &lc)?,
            };
            traces.push(lb_run(benv, &mut policy, horizon, &label, rep)?);
        } else {
            let mut policy = make_policy(pc, &env, &cfg.run, pseed)?;
            traces.push(run_episode(policy.as_mut(), &env, horizon, &label)?);
            if let Some(s) = policy.status() {
                status.push((label, s));
            }
        }
    }
    let delta_sq = if env.summary.a_hat.is_some() && cfg.run.delta_mc_samples > 0 {
        Some(estimate_delta_sq(&env.summary, &env.theta_star, &env.sampler, cfg.run.delta_mc_samples, env.seed)?)
    } else {
        None
    };
    let info = RepInfo {
        rep,
        v_true,
        offline_lam_min: env.summary.lam_min,
        offline_lam_max: env.summary.lam_max,
        dispersion_c: env.summary.dispersion_c,
        delta_sq,
        policy_status: status,
    };
    Ok((traces, info))
}

/// Runs every replication (in parallel on the current rayon pool) and
/// reduces in replication order, so results do not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let model = build_model(cfg)?;
    run_with_model(cfg, &model, cfg.offline.resolved_v_true(cfg.run.horizon))
}

fn run_with_model(cfg: &ExperimentConfig, model: &OnlineModel, v_true: f64) -> Result<ExperimentResult> {
    let per_rep: Vec<(Vec<RegretTrace>, RepInfo)> =
        (0..cfg.run.reps).into_par_iter().map(|rep| run_rep(cfg, model, v_true, rep)).collect::<Result<Vec<_>>>()?;
    let mut traces = Vec::with_capacity(cfg.policies.len() * cfg.run.reps);
    let mut aggregates = Vec::with_capacity(cfg.policies.len());
    for (i, pc) in cfg.policies.iter().enumerate() {
        let own: Vec<&RegretTrace> = per_rep.iter().map(|(tr, _)| &tr[i]).collect();
        aggregates.push(aggregate(&pc.label(), &own));
        traces.extend(own.into_iter().cloned());
    }
    Ok(ExperimentResult { v_true, traces, aggregates, reps: per_rep.into_iter().map(|(_, info)| info).collect() })
}

/// Runs on a dedicated pool of `threads` workers.
pub fn run_experiment_threads(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentResult> {
    with_pool(threads, || run_experiment(cfg))
}

pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| PricingError::Numeric(format!("cannot start thread pool: {e}")))?;
    pool.install(f)
}

/// One sweep point per policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub policy: String,
    pub v_true_sq: f64,
    pub mean_final_regret: f64,
    pub std_final_regret: f64,
}

/// Full experiment per value of `V_true^2`, sharing the online model.
pub fn bias_sweep(cfg: &ExperimentConfig, v_true_sq: &[f64]) -> Result<(Vec<SweepRow>, Vec<ExperimentResult>)> {
    cfg.validate()?;
    let model = build_model(cfg)?;
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for &v2 in v_true_sq {
        if !(v2 >= 0.0 && v2.is_finite()) {
            return Err(PricingError::Config(format!("sweep value must be >= 0, got {v2}")));
        }
        let mut point = cfg.clone();
        point.offline.v_true = Some(v2.sqrt());
        let res = run_with_model(&point, &model, v2.sqrt())?;
        for a in &res.aggregates {
            rows.push(SweepRow {
                policy: a.policy.clone(),
                v_true_sq: v2,
                mean_final_regret: a.mean_final(),
                std_final_regret: a.std_final(),
            });
        }
        results.push(res);
    }
    Ok((rows, results))
}

/// Parses `T^{-n/k}:a..b` (inclusive) or a comma-separated list of numbers.
pub fn parse_grid(spec: &str, horizon: usize) -> Result<Vec<f64>> {
    let bad = || PricingError::Config(format!("cannot parse grid `{spec}`; use `T^{{-n/5}}:0..9` or `0.1,0.01`"));
    let s = spec.trim();
    if let Some(rest) = s.strip_prefix("T^{-n/") {
        let (den, range) = rest.split_once("}:").ok_or_else(bad)?;
        let den: f64 = den.trim().parse().map_err(|_| bad())?;
        let (a, b) = range.split_once("..").ok_or_else(bad)?;
        let (a, b): (u32, u32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if den <= 0.0 || a > b {
            return Err(bad());
        }
        return Ok((a..=b).map(|n| (horizon as f64).powf(-(n as f64) / den)).collect());
    }
    let vals = s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
    if vals.is_empty() {
        return Err(bad());
    }
    Ok(vals)
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_traces_csv<W: Write>(w: W, traces: &[RegretTrace]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["policy", "rep", "t", "instant_regret", "cum_regret"])?;
    for tr in traces {
        for (t, (r, c)) in tr.instant.iter().zip(&tr.cumulative).enumerate() {
            out.write_record([tr.policy.clone(), tr.rep.to_string(), (t + 1).to_string(), fmt(*r), fmt(*c)])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(w: W, aggs: &[PolicyAggregate]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["policy", "t", "mean_cum_regret", "band_low", "band_high"])?;
    for a in aggs {
        for t in 0..a.mean.len() {
            out.write_record([
                a.policy.clone(),
                (t + 1).to_string(),
                fmt(a.mean[t]),
                fmt(a.band_low[t]),
                fmt(a.band_high[t]),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["policy", "v_true_sq", "mean_final_regret", "std_final_regret"])?;
    for r in rows {
        out.write_record([r.policy.clone(), fmt(r.v_true_sq), fmt(r.mean_final_regret), fmt(r.std_final_regret)])?;
    }
    out.flush()?;
    Ok(())
}

/// Hex SHA-256 over the concatenated byte strings.
pub fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Resolved bias bound of one policy, as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub label: String,
    pub kind: PolicyKind,
    pub v_bound: Option<f64>,
    /// `V / V_true`, when both apply.
    pub v_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Config with `offline.v_true` filled in; it re-parses to the same run.
    pub config: ExperimentConfig,
    pub v_true: f64,
    pub policies: Vec<PolicyRecord>,
    pub reps: Vec<RepInfo>,
    /// SHA-256 over the trace CSV followed by the aggregate CSV.
    pub digest: String,
}

/// Serialized outputs of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutputs {
    pub traces_csv: Vec<u8>,
    pub aggregate_csv: Vec<u8>,
    pub manifest: Manifest,
}

pub fn policy_records(cfg: &ExperimentConfig, v_true: f64) -> Vec<PolicyRecord> {
    cfg.policies
        .iter()
        .map(|pc| {
            let uses_v = matches!(pc.kind, PolicyKind::Co3 | PolicyKind::Gco3 | PolicyKind::LbOfflineUcb);
            let v = pc.resolved_v_bound(v_true);
            PolicyRecord {
                label: pc.label(),
                kind: pc.kind,
                v_bound: uses_v.then_some(v),
                v_ratio: (uses_v && v_true > 0.0).then(|| v / v_true),
            }
        })
        .collect()
}

pub fn render_outputs(cfg: &ExperimentConfig, res: &ExperimentResult) -> Result<RunOutputs> {
    let mut traces_csv = Vec::new();
    write_traces_csv(&mut traces_csv, &res.traces)?;
    let mut aggregate_csv = Vec::new();
    write_aggregate_csv(&mut aggregate_csv, &res.aggregates)?;
    let mut resolved = cfg.clone();
    resolved.offline.v_true = Some(res.v_true);
    let manifest = Manifest {
        config: resolved,
        v_true: res.v_true,
        policies: policy_records(cfg, res.v_true),
        reps: res.reps.clone(),
        digest: digest(&[&traces_csv, &aggregate_csv]),
    };
    Ok(RunOutputs { traces_csv, aggregate_csv, manifest })
}

/// Writes `traces.csv`, `aggregate.csv` and `manifest.json` into `dir`.
pub fn write_outputs(dir: &std::path::Path, out: &RunOutputs) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("traces.csv"), &out.traces_csv)?;
    std::fs::write(dir.join("aggregate.csv"), &out.aggregate_csv)?;
    let json = serde_json::to_string_pretty(&out.manifest).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(())
}
