//! Stochastic linear bandit with a biased offline log over finite action sets.
//!
//! The offline-informed policy intersects a Euclidean ball around the pooled
//! ridge estimate with the online ellipsoid, exactly like the two-ellipsoid
//! pricing policy; the pure online policy keeps only the online ellipsoid.

use nalgebra::DVector;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::confidence::{linear_max, radius_w_t, radius_what_tn, ConfidenceSet, Ellipsoid, RadiusInputs};
use crate::error::{PricingError, Result};
use crate::estimation::{eig_extremes, GramState};
use crate::offline::gaussian;
use crate::policy::{default_eps, PolicyKind};
use crate::rng::{self, purpose, Rng};
use crate::sim::RegretTrace;

/// A nonempty list of actions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    pub actions: Vec<DVector<f64>>,
}

impl ActionSet {
    pub fn new(actions: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = actions.first() else {
            return Err(PricingError::InvalidInput("action set is empty".into()));
        };
        let d = first.len();
        if actions.iter().any(|a| a.len() != d || a.iter().any(|v| !v.is_finite())) {
            return Err(PricingError::InvalidInput("actions must be finite vectors of one dimension".into()));
        }
        Ok(Self { actions })
    }

    pub fn dim(&self) -> usize {
        self.actions[0].len()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.actions.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Index of the best action under `theta`, ties to the lowest index.
    pub fn best(&self, theta: &DVector<f64>) -> usize {
        argmax(self.actions.iter().map(|a| theta.dot(a)))
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Inputs of the optimistic linear-bandit policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbConfig {
    pub v_bound: f64,
    pub lam: f64,
    pub eps: f64,
    pub horizon: usize,
    /// Bound on action norms.
    pub a_max: f64,
    /// Bound on `||theta||`.
    pub theta_max: f64,
    pub noise_r: f64,
}

impl LbConfig {
    pub fn new(v_bound: f64, horizon: usize, a_max: f64, theta_max: f64, noise_r: f64) -> Self {
        Self { v_bound, lam: 1.0, eps: default_eps(horizon), horizon, a_max, theta_max, noise_r }
    }

    fn radius_inputs(&self, dim: usize) -> RadiusInputs {
        RadiusInputs {
            lam: self.lam,
            eps: self.eps,
            dim,
            feature_bound: self.a_max,
            param_bound: self.theta_max,
            noise_r: self.noise_r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_bound >= 0.0) {
            return Err(PricingError::Config(format!("v_bound must be >= 0, got {}", self.v_bound)));
        }
        if !(self.lam > 0.0 && self.lam.is_finite()) {
            return Err(PricingError::Config(format!("lam must be positive, got {}", self.lam)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(PricingError::Config(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !(self.a_max > 0.0 && self.theta_max > 0.0 && self.noise_r >= 0.0) {
            return Err(PricingError::Config("a_max and theta_max must be positive, noise_r >= 0".into()));
        }
        Ok(())
    }
}

#[allow(clippy::large_enum_variant)]
enum LbState {
    Optimistic {
        inp: RadiusInputs,
        v: f64,
        offline_lam_min: f64,
        online: GramState,
        combined: GramState,
        with_offline: bool,
    },
    Clairvoyant(DVector<f64>),
}

pub struct LbPolicy {
    kind: PolicyKind,
    state: LbState,
    pending: Option<DVector<f64>>,
}

/// Offline-informed policy from `(action, reward)` tuples. With no tuples the
/// ball never binds and the trajectory is that of [`lb_ucb_new`].
pub fn lb_policy_new(offline: &[(DVector<f64>, f64)], dim: usize, cfg: &LbConfig) -> Result<LbPolicy> {
    cfg.validate()?;
    let mut combined = GramState::new(cfg.lam, dim)?;
    for (a, r) in offline {
        if a.len() != dim {
            return Err(PricingError::InvalidInput("offline action has wrong dimension".into()));
        }
        combined.update_feature(a, *r);
    }
    let (offline_lam_min, _) = eig_extremes(&combined.data_gram())?;
    combined.t = 0;
    combined.includes_offline = true;
    Ok(LbPolicy {
        kind: PolicyKind::LbOfflineUcb,
        state: LbState::Optimistic {
            inp: cfg.radius_inputs(dim),
            v: cfg.v_bound,
            offline_lam_min: offline_lam_min.max(0.0),
            online: GramState::new(cfg.lam, dim)?,
            combined,
            with_offline: true,
        },
        pending: None,
    })
}

/// Pure online one-ellipsoid policy.
pub fn lb_ucb_new(dim: usize, cfg: &LbConfig) -> Result<LbPolicy> {
    cfg.validate()?;
    Ok(LbPolicy {
        kind: PolicyKind::LbUcb,
        state: LbState::Optimistic {
            inp: cfg.radius_inputs(dim),
            v: 0.0,
            offline_lam_min: 0.0,
            online: GramState::new(cfg.lam, dim)?,
            combined: GramState::new(cfg.lam, dim)?,
            with_offline: false,
        },
        pending: None,
    })
}

/// Knows `theta*`; always picks the best action.
pub fn lb_clairvoyant(theta_star: &DVector<f64>) -> LbPolicy {
    LbPolicy { kind: PolicyKind::LbUcb, state: LbState::Clairvoyant(theta_star.clone()), pending: None }
}

impl LbPolicy {
    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    /// The set the next action is chosen from; `None` for the clairvoyant handle.
    pub fn confidence_set(&self) -> Result<Option<ConfidenceSet>> {
        let LbState::Optimistic { inp, v, offline_lam_min, online, combined, with_offline } = &self.state else {
            return Ok(None);
        };
        let t = online.t;
        let mut ellipsoids = Vec::with_capacity(2);
        if *with_offline {
            ellipsoids
                .push(Ellipsoid::ball(combined.ridge_solve_vec()?, radius_what_tn(inp, t, *v, *offline_lam_min))?);
        }
        ellipsoids.push(Ellipsoid::new(online.ridge_solve_vec()?, online.sigma.clone(), radius_w_t(inp, t))?);
        Ok(Some(ConfidenceSet::new(ellipsoids)))
    }
}

/// Optimistic action: argmax of `linear_max(set, a)`, ties to the lowest index.
pub fn lb_select_action(policy: &mut LbPolicy, actions: &ActionSet) -> Result<usize> {
    if policy.pending.is_some() {
        return Err(PricingError::Contract("action selected twice without an update".into()));
    }
    let idx = match &policy.state {
        LbState::Clairvoyant(theta) => actions.best(theta),
        LbState::Optimistic { .. } => {
            let set = policy.confidence_set()?.expect("optimistic policies always have a set");
            let values = actions.actions.iter().map(|a| linear_max(&set, a)).collect::<Result<Vec<_>>>()?;
            argmax(values.into_iter())
        }
    };
    policy.pending = Some(actions.actions[idx].clone());
    Ok(idx)
}

pub fn lb_update(policy: &mut LbPolicy, reward: f64) -> Result<()> {
    if !reward.is_finite() {
        return Err(PricingError::InvalidInput(format!("reward must be finite, got {reward}")));
    }
    let a = policy.pending.take().ok_or_else(|| PricingError::Contract("update without a selected action".into()))?;
    if let LbState::Optimistic { online, combined, .. } = &mut policy.state {
        online.update_feature(&a, reward);
        combined.update_feature(&a, reward);
    }
    Ok(())
}

/// A linear-bandit instance: fixed actions, true and offline parameters, offline log.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    pub theta_star: DVector<f64>,
    pub theta_offline: DVector<f64>,
    pub actions: ActionSet,
    pub noise_r: f64,
    pub offline: Vec<(DVector<f64>, f64)>,
    /// Seed of the online reward noise.
    pub seed: u64,
}

/// Generator settings for [`BanditEnv::generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditSpec {
    pub d: usize,
    pub k: usize,
    #[serde(default = "one")]
    pub theta_norm: f64,
    #[serde(default = "one")]
    pub a_max: f64,
}

fn one() -> f64 {
    1.0
}

fn unit(d: usize, r: &mut Rng) -> DVector<f64> {
    loop {
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut *r));
        let n: f64 = z.norm();
        if n > 1e-12 {
            return z / n;
        }
    }
}

impl BanditEnv {
    /// `theta*` uniform on the sphere of radius `theta_norm` (fixed by
    /// `model_seed`), `k` actions uniform on the sphere of radius `a_max`, and
    /// `n` offline rows with actions drawn uniformly from the set and rewards
    /// from `theta* + v_true * u`.
    pub fn generate(
        spec: &BanditSpec,
        n: usize,
        v_true: f64,
        noise_r: f64,
        model_seed: u64,
        seed: u64,
    ) -> Result<Self> {
        if spec.d == 0 || spec.k == 0 {
            return Err(PricingError::Config("bandit needs d >= 1 and k >= 1".into()));
        }
        if !(v_true >= 0.0 && v_true.is_finite()) {
            return Err(PricingError::Config(format!("v_true must be >= 0, got {v_true}")));
        }
        let mut model = rng::stream(model_seed, &[purpose::THETA]);
        let theta_star = unit(spec.d, &mut model) * spec.theta_norm;
        let actions = ActionSet::new((0..spec.k).map(|_| unit(spec.d, &mut model) * spec.a_max).collect())?;
        let mut dir = rng::stream(seed, &[purpose::BIAS_DIRECTION]);
        let theta_offline = &theta_star + unit(spec.d, &mut dir) * v_true;
        let mut pick = rng::stream(seed, &[purpose::OFFLINE_CONTEXTS]);
        let mut noise = rng::stream(seed, &[purpose::OFFLINE_NOISE]);
        let offline = (0..n)
            .map(|_| {
                let a = actions.actions[pick.random_range(0..actions.len())].clone();
                let r = theta_offline.dot(&a) + gaussian(&mut noise, noise_r);
                (a, r)
            })
            .collect();
        Ok(Self { theta_star, theta_offline, actions, noise_r, offline, seed })
    }

    pub fn offline_lam_min(&self) -> Result<f64> {
        let d = self.theta_star.len();
        let mut g = nalgebra::DMatrix::zeros(d, d);
        for (a, _) in &self.offline {
            g.ger(1.0, a, a, 1.0);
        }
        Ok(eig_extremes(&g)?.0)
    }
}

/// Runs `horizon` rounds; per-step regret is `<theta*, a* - a_t>`.
pub fn lb_run(env: &BanditEnv, policy: &mut LbPolicy, horizon: usize, label: &str, rep: usize) -> Result<RegretTrace> {
    let mut noise = rng::stream(env.seed, &[purpose::ONLINE_NOISE]);
    let best = env.theta_star.dot(&env.actions.actions[env.actions.best(&env.theta_star)]);
    let mut instant = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let i = lb_select_action(policy, &env.actions)?;
        let mean = env.theta_star.dot(&env.actions.actions[i]);
        instant.push((best - mean).max(0.0));
        lb_update(policy, mean + gaussian(&mut noise, env.noise_r))?;
    }
    Ok(RegretTrace::from_instant(label, rep, instant))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn cfg(v: f64) -> LbConfig {
        LbConfig::new(v, 200, 1.0, 1.0, 0.1)
    }

    fn basis(d: usize) -> ActionSet {
        ActionSet::new((0..d).map(|i| DVector::from_fn(d, |j, _| if i == j { 1.0 } else { 0.0 })).collect()).unwrap()
    }

    #[test]
    fn action_set_validation() {
        assert!(ActionSet::new(vec![]).is_err());
        assert!(ActionSet::new(vec![DVector::zeros(2), DVector::zeros(3)]).is_err());
        let a = basis(3);
        assert_eq!(a.best(&DVector::from_vec(vec![0.0, 2.0, 2.0])), 1);
    }

    #[test]
    fn zero_radius_set_is_greedy() {
        let set = ConfidenceSet::new(vec![Ellipsoid::ball(DVector::from_vec(vec![1.0, 0.0]), 0.0).unwrap()]);
        let acts = basis(2);
        let vals: Vec<f64> = acts.actions.iter().map(|a| linear_max(&set, a).unwrap()).collect();
        assert_eq!(argmax(vals.into_iter()), 0);
    }

    #[test]
    fn select_matches_brute_force() {
        let mut r = rng::stream(9, &[0]);
        let acts = ActionSet::new((0..20).map(|_| unit(5, &mut r)).collect()).unwrap();
        let mut p = lb_ucb_new(5, &cfg(0.0)).unwrap();
        for _ in 0..30 {
            let a = unit(5, &mut r);
            p.pending = Some(a);
            lb_update(&mut p, r.random_range(-1.0..1.0)).unwrap();
        }
        let set = p.confidence_set().unwrap().unwrap();
        let brute = (0..acts.len())
            .map(|i| (i, linear_max(&set, &acts.actions[i]).unwrap()))
            .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
        assert_eq!(lb_select_action(&mut p, &acts).unwrap(), brute.0);
    }

    #[test]
    fn basis_actions_give_diagonal_gram() {
        let acts = basis(4);
        let mut p = lb_ucb_new(4, &cfg(0.0)).unwrap();
        let pulls = [0usize, 0, 1, 3, 3, 3];
        for &i in &pulls {
            p.pending = Some(acts.actions[i].clone());
            lb_update(&mut p, 0.5).unwrap();
        }
        let set = p.confidence_set().unwrap().unwrap();
        let e = &set.ellipsoids[0];
        let off = &e.shape - DMatrix::from_diagonal(&e.shape.diagonal());
        assert_eq!(off.norm(), 0.0);
        // width of arm i is w / sqrt(lam + n_i)
        let counts: [f64; 4] = [2.0, 1.0, 0.0, 3.0];
        for (i, c) in counts.iter().enumerate() {
            let width = linear_max(&set, &acts.actions[i]).unwrap() - e.center.dot(&acts.actions[i]);
            assert!((width - e.radius / (1.0 + c).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn alternation_is_enforced() {
        let acts = basis(2);
        let mut p = lb_ucb_new(2, &cfg(0.0)).unwrap();
        assert!(matches!(lb_update(&mut p, 1.0), Err(PricingError::Contract(_))));
        lb_select_action(&mut p, &acts).unwrap();
        assert!(matches!(lb_select_action(&mut p, &acts), Err(PricingError::Contract(_))));
    }

    #[test]
    fn clairvoyant_and_single_action_have_zero_regret() {
        let spec = BanditSpec { d: 5, k: 20, theta_norm: 1.0, a_max: 1.0 };
        let env = BanditEnv::generate(&spec, 0, 0.0, 0.1, 1, 2).unwrap();
        let mut c = lb_clairvoyant(&env.theta_star);
        let tr = lb_run(&env, &mut c, 100, "clairvoyant", 0).unwrap();
        assert!(tr.instant.iter().all(|&r| r == 0.0));

        let mut single = env.clone();
        single.actions = ActionSet::new(vec![env.actions.actions[3].clone()]).unwrap();
        let mut p = lb_ucb_new(5, &cfg(0.0)).unwrap();
        let tr = lb_run(&single, &mut p, 100, "lb_ucb", 0).unwrap();
        assert!(tr.instant.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn regret_increments_are_bounded() {
        let spec = BanditSpec { d: 5, k: 20, theta_norm: 1.0, a_max: 1.0 };
        let env = BanditEnv::generate(&spec, 100, 0.05, 0.1, 3, 4).unwrap();
        let mut p = lb_policy_new(&env.offline, 5, &LbConfig::new(0.06, 300, 1.0, 1.0, 0.1)).unwrap();
        let tr = lb_run(&env, &mut p, 300, "lb_offline_ucb", 0).unwrap();
        let cap = 2.0 * env.actions.max_norm() * env.theta_star.norm();
        assert!(tr.instant.iter().all(|&r| (0.0..=cap).contains(&r)));
    }

    #[test]
    fn empty_offline_log_matches_online_policy_bitwise() {
        let spec = BanditSpec { d: 5, k: 20, theta_norm: 1.0, a_max: 1.0 };
        let env = BanditEnv::generate(&spec, 0, 0.0, 0.1, 5, 6).unwrap();
        let c = LbConfig::new(0.0, 400, 1.0, 1.0, 0.1);
        let a = lb_run(&env, &mut lb_policy_new(&[], 5, &c).unwrap(), 400, "x", 0).unwrap();
        let b = lb_run(&env, &mut lb_ucb_new(5, &c).unwrap(), 400, "x", 0).unwrap();
        assert_eq!(a.instant, b.instant);
    }

    #[test]
    fn unbiased_dispersed_log_is_nearly_greedy() {
        let spec = BanditSpec { d: 5, k: 20, theta_norm: 1.0, a_max: 1.0 };
        let env = BanditEnv::generate(&spec, 200_000, 0.0, 0.1, 7, 8).unwrap();
        let mut p = lb_policy_new(&env.offline, 5, &LbConfig::new(0.0, 100, 1.0, 1.0, 0.1)).unwrap();
        let tr = lb_run(&env, &mut p, 100, "lb_offline_ucb", 0).unwrap();
        assert_eq!(tr.cumulative[99], 0.0);
    }
}
