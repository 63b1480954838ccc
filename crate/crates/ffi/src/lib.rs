//! C ABI over `pricing-lab`.
//!
//! Every entry point returns a [`PlStatus`]; on failure a message is kept per
//! thread and can be read with [`pl_last_error_message`]. Handles are opaque
//! heap objects owned by the caller and released with the matching `*_free`
//! function. A handle must not be used from two threads at once.
//! Panics never cross the boundary; they are reported as `PL_STATUS_PANIC`.
//!
//! # Safety
//!
//! For every function: pointer arguments are either null (reported as
//! `PL_STATUS_NULL_POINTER`) or valid for the access described. Vector
//! arguments point to at least `d1` or `d2` doubles as fixed by the handle or
//! spec, strings are NUL-terminated, and handles come from the matching
//! constructor and have not been freed.

// The shared contract above applies to each `unsafe extern` item.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalgebra::DVector;
use pricing_lab::config::ExperimentConfig;
use pricing_lab::model::{Context, DemandParams, ProblemSpec};
use pricing_lab::offline::{build_summary, OfflineDataset, OfflineSummary};
use pricing_lab::policy::{
    default_eps, ClairvoyantPolicy, Co3Config, GreedyOfflinePolicy, OfuPolicy, PolicyKind, PricingPolicy, Rco3Config,
    Rco3Policy, TsConfig, TsPolicy, DEFAULT_GRID_SIZE, DEFAULT_RESTARTS,
};
use pricing_lab::sim::{self, ExperimentResult};
use pricing_lab::PricingError;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Malformed argument: wrong dimension, non-finite value, bad UTF-8.
    InvalidInput = 2,
    /// Rejected configuration or policy parameters.
    Config = 3,
    /// A linear-algebra routine failed.
    Numeric = 4,
    /// Calls made in the wrong order, e.g. observing before choosing a price.
    Contract = 5,
    /// Problem instance violates a modelling assumption (elasticity sign, bias too large).
    Infeasible = 6,
    /// Reading or writing files failed.
    Io = 7,
    /// Internal panic; the handle involved should be discarded.
    Panic = 8,
}

impl From<&PricingError> for PlStatus {
    fn from(e: &PricingError) -> Self {
        match e {
            PricingError::InvalidInput(_) | PricingError::UnsupportedDimension(_) => PlStatus::InvalidInput,
            PricingError::Config(_) => PlStatus::Config,
            PricingError::Numeric(_) => PlStatus::Numeric,
            PricingError::Contract(_) => PlStatus::Contract,
            PricingError::DegenerateElasticity(_) | PricingError::InfeasibleBias { .. } => PlStatus::Infeasible,
            PricingError::Io(_) | PricingError::Csv(_) => PlStatus::Io,
        }
    }
}

struct Failure(PlStatus, String);

impl From<PricingError> for Failure {
    fn from(e: PricingError) -> Self {
        Failure(PlStatus::from(&e), e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PlStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            PlStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PlStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PlStatus::InvalidInput, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn vector(p: *const f64, len: usize, what: &str) -> FfiResult<DVector<f64>> {
    if len == 0 {
        return Ok(DVector::zeros(0));
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(DVector::from_column_slice(std::slice::from_raw_parts(p, len)))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("`{what}` is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Known bounds of a pricing problem.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlProblemSpec {
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
    pub noise_r: f64,
    pub lambda_min_exx: f64,
}

impl From<&PlProblemSpec> for ProblemSpec {
    fn from(s: &PlProblemSpec) -> Self {
        ProblemSpec {
            d1: s.d1,
            d2: s.d2,
            alpha_max: s.alpha_max,
            beta_max: s.beta_max,
            x_max: s.x_max,
            y_max: s.y_max,
            y_min: s.y_min,
            l_alpha: s.l_alpha,
            u_alpha: s.u_alpha,
            l_beta: s.l_beta,
            u_beta: s.u_beta,
            noise_r: s.noise_r,
            lambda_min_exx: s.lambda_min_exx,
        }
    }
}

/// Tuning of a pricing policy. Fields a kind does not use are ignored.
/// Start from [`pl_policy_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlPolicyParams {
    pub horizon: usize,
    /// Bias bound `V` (co3, gco3).
    pub v_bound: f64,
    pub lam: f64,
    pub eps: f64,
    pub grid_size: usize,
    pub restarts: usize,
    /// Test exponent (rco3).
    pub alpha_exp: f64,
    /// Test-length constant (rco3).
    pub test_scale: f64,
    /// Prior covariance multiplier (ts, ts_offline).
    pub prior_cov_scale: f64,
    /// Assumed noise level (ts, ts_offline); NaN uses the spec's `noise_r`.
    pub noise_sigma: f64,
}

/// Defaults for a run of `horizon` rounds.
#[no_mangle]
pub extern "C" fn pl_policy_params_default(horizon: usize) -> PlPolicyParams {
    PlPolicyParams {
        horizon,
        v_bound: 0.0,
        lam: 1.0,
        eps: default_eps(horizon),
        grid_size: DEFAULT_GRID_SIZE,
        restarts: DEFAULT_RESTARTS,
        alpha_exp: 0.25,
        test_scale: 1.0,
        prior_cov_scale: 1.0,
        noise_sigma: f64::NAN,
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn pl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Offline log of `(x, y, price, demand)` rows.
pub struct PlOffline {
    data: OfflineDataset,
}

#[no_mangle]
pub unsafe extern "C" fn pl_offline_new(d1: usize, d2: usize, out: *mut *mut PlOffline) -> PlStatus {
    guard(|| {
        if d1 == 0 || d2 == 0 {
            return Err(invalid("d1 and d2 must be at least 1"));
        }
        let h = Box::into_raw(Box::new(PlOffline { data: OfflineDataset::new(d1, d2) }));
        write_out(out, h, "out").inspect_err(|_| drop(Box::from_raw(h)))
    })
}

/// Appends one row; `x` has `d1` entries and `y` has `d2`.
#[no_mangle]
pub unsafe extern "C" fn pl_offline_push(
    h: *mut PlOffline,
    x: *const f64,
    y: *const f64,
    price: f64,
    demand: f64,
) -> PlStatus {
    guard(|| {
        let h = deref_mut(h, "offline")?;
        let (d1, d2) = (h.data.d1, h.data.d2);
        let ctx = Context::new(vector(x, d1, "x")?, vector(y, d2, "y")?);
        h.data.push(ctx, price, demand)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pl_offline_len(h: *const PlOffline, out: *mut usize) -> PlStatus {
    guard(|| write_out(out, deref(h, "offline")?.data.len(), "out"))
}

/// Releases an offline log; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn pl_offline_free(h: *mut PlOffline) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// A pricing policy for one episode.
pub struct PlPolicy {
    inner: Box<dyn PricingPolicy>,
    d1: usize,
    d2: usize,
}

fn summary_for(offline: Option<&PlOffline>, spec: &ProblemSpec) -> FfiResult<OfflineSummary> {
    match offline {
        Some(o) if !o.data.is_empty() => {
            if (o.data.d1, o.data.d2) != (spec.d1, spec.d2) {
                return Err(invalid("offline log dimensions do not match the spec"));
            }
            Ok(build_summary(&o.data)?)
        }
        _ => Ok(OfflineSummary::empty(spec.d1, spec.d2)),
    }
}

/// Creates a policy by kind name: `co3`, `gco3`, `rco3`, `ucb`,
/// `ucb_offline`, `ts`, `ts_offline` or `greedy_offline`. `offline` may be
/// null for kinds that do not use a log. Use [`pl_policy_new_clairvoyant`]
/// for the benchmark policy.
#[no_mangle]
pub unsafe extern "C" fn pl_policy_new(
    kind: *const c_char,
    spec: *const PlProblemSpec,
    params: *const PlPolicyParams,
    offline: *const PlOffline,
    seed: u64,
    out: *mut *mut PlPolicy,
) -> PlStatus {
    guard(|| {
        let kind: PolicyKind = string(kind, "kind")?.parse()?;
        let spec = ProblemSpec::from(deref(spec, "spec")?);
        spec.validate()?;
        let p = deref(params, "params")?;
        let summary = summary_for(offline.as_ref(), &spec)?;
        let co3 = Co3Config {
            v_bound: p.v_bound,
            lam: p.lam,
            eps: p.eps,
            horizon: p.horizon,
            grid_size: p.grid_size,
            restarts: p.restarts,
        };
        let ts = TsConfig {
            prior_cov_scale: p.prior_cov_scale,
            noise_sigma: if p.noise_sigma.is_nan() { spec.noise_r } else { p.noise_sigma },
            lam: p.lam,
        };
        let inner: Box<dyn PricingPolicy> = match kind {
            PolicyKind::Co3 => Box::new(OfuPolicy::co3(&spec, &summary, &co3, seed)?),
            PolicyKind::Gco3 => Box::new(OfuPolicy::gco3(&spec, &summary, &co3, seed)?),
            PolicyKind::Ucb => Box::new(OfuPolicy::ucb(&spec, &co3, seed)?),
            PolicyKind::UcbOffline => Box::new(OfuPolicy::ucb_offline(&spec, &summary, &co3, seed)?),
            PolicyKind::Rco3 => {
                let mut c = Rco3Config::new(p.alpha_exp, p.horizon);
                c.lam = p.lam;
                c.eps = p.eps;
                c.grid_size = p.grid_size;
                c.restarts = p.restarts;
                c.test_scale = p.test_scale;
                Box::new(Rco3Policy::new(&spec, &summary, &c, seed)?)
            }
            PolicyKind::Ts => Box::new(TsPolicy::online(&spec, &ts, seed)?),
            PolicyKind::TsOffline => Box::new(TsPolicy::offline(&spec, &summary, &ts, seed)?),
            PolicyKind::GreedyOffline => Box::new(GreedyOfflinePolicy::new(&spec, &summary)?),
            other => return Err(invalid(format!("`{other}` cannot be created with pl_policy_new"))),
        };
        let h = Box::into_raw(Box::new(PlPolicy { inner, d1: spec.d1, d2: spec.d2 }));
        write_out(out, h, "out").inspect_err(|_| drop(Box::from_raw(h)))
    })
}

/// Policy that always charges the optimal price for `(alpha, beta)`.
#[no_mangle]
pub unsafe extern "C" fn pl_policy_new_clairvoyant(
    alpha: *const f64,
    beta: *const f64,
    spec: *const PlProblemSpec,
    out: *mut *mut PlPolicy,
) -> PlStatus {
    guard(|| {
        let spec = ProblemSpec::from(deref(spec, "spec")?);
        spec.validate()?;
        let theta = DemandParams::new(vector(alpha, spec.d1, "alpha")?, vector(beta, spec.d2, "beta")?);
        let inner = Box::new(ClairvoyantPolicy::new(&theta, &spec)?);
        let h = Box::into_raw(Box::new(PlPolicy { inner, d1: spec.d1, d2: spec.d2 }));
        write_out(out, h, "out").inspect_err(|_| drop(Box::from_raw(h)))
    })
}

/// Price for context `(x, y)`; must be followed by [`pl_policy_observe`].
#[no_mangle]
pub unsafe extern "C" fn pl_policy_choose_price(
    h: *mut PlPolicy,
    x: *const f64,
    y: *const f64,
    out_price: *mut f64,
) -> PlStatus {
    guard(|| {
        let h = deref_mut(h, "policy")?;
        if out_price.is_null() {
            return Err(null("out_price"));
        }
        let ctx = Context::new(vector(x, h.d1, "x")?, vector(y, h.d2, "y")?);
        let p = h.inner.choose_price(&ctx)?;
        write_out(out_price, p, "out_price")
    })
}

/// Demand realized at the last chosen price.
#[no_mangle]
pub unsafe extern "C" fn pl_policy_observe(h: *mut PlPolicy, demand: f64) -> PlStatus {
    guard(|| Ok(deref_mut(h, "policy")?.inner.observe(demand)?))
}

/// Writes the policy's fixed internal decision (for example `greedy` or
/// `optimistic`) into `buf` as a NUL-terminated string, truncating to
/// `len` bytes. Writes an empty string for kinds without one.
#[no_mangle]
pub unsafe extern "C" fn pl_policy_status(h: *const PlPolicy, buf: *mut c_char, len: usize) -> PlStatus {
    guard(|| {
        let h = deref(h, "policy")?;
        if buf.is_null() || len == 0 {
            return Err(null("buf"));
        }
        let s = h.inner.status().unwrap_or_default();
        let n = s.len().min(len - 1);
        ptr::copy_nonoverlapping(s.as_ptr().cast::<c_char>(), buf, n);
        buf.add(n).write(0);
        Ok(())
    })
}

/// Releases a policy; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn pl_policy_free(h: *mut PlPolicy) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Results of a replicated experiment.
pub struct PlExperiment {
    config: ExperimentConfig,
    result: ExperimentResult,
}

/// Runs the experiment described by a JSON config on `threads` workers
/// (0 picks one per core). Results do not depend on `threads`.
#[no_mangle]
pub unsafe extern "C" fn pl_experiment_run(
    config_json: *const c_char,
    threads: usize,
    out: *mut *mut PlExperiment,
) -> PlStatus {
    guard(|| {
        let config = ExperimentConfig::from_json(string(config_json, "config_json")?)?;
        let threads = if threads == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { threads };
        let result = sim::run_experiment_threads(&config, threads)?;
        let h = Box::into_raw(Box::new(PlExperiment { config, result }));
        write_out(out, h, "out").inspect_err(|_| drop(Box::from_raw(h)))
    })
}

/// Mean cumulative regret at the horizon of the policy labelled `label`.
#[no_mangle]
pub unsafe extern "C" fn pl_experiment_mean_final(
    h: *const PlExperiment,
    label: *const c_char,
    out: *mut f64,
) -> PlStatus {
    guard(|| {
        let h = deref(h, "experiment")?;
        let label = string(label, "label")?;
        let v = h.result.mean_final(label).ok_or_else(|| invalid(format!("no policy labelled `{label}`")))?;
        write_out(out, v, "out")
    })
}

/// Writes `traces.csv`, `aggregate.csv` and `manifest.json` into `dir`.
#[no_mangle]
pub unsafe extern "C" fn pl_experiment_write(h: *const PlExperiment, dir: *const c_char) -> PlStatus {
    guard(|| {
        let h = deref(h, "experiment")?;
        let dir = string(dir, "dir")?;
        let outputs = sim::render_outputs(&h.config, &h.result)?;
        sim::write_outputs(Path::new(dir), &outputs)?;
        Ok(())
    })
}

/// Releases an experiment; null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn pl_experiment_free(h: *mut PlExperiment) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
