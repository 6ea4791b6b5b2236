//! C ABI over `voi-core`.
//!
//! Objects cross the boundary as opaque handles created by a `*_new` or
//! `*_build` function and released with the matching `*_free`. Every
//! fallible function returns a [`VoiStatus`]; on failure the message is
//! available from [`voi_last_error_message`] on the same thread until the
//! next failing call. Panics are caught at the boundary and reported as
//! [`VoiStatus::Panic`].
//!
//! Arrays are passed as pointer plus length. Dense transition tensors are
//! row-major `P[s][a][s']` and reward matrices `R[s][a]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use voi_core::cli::{run, ExperimentConfig};
use voi_core::dp::{exact_performance, policy_evaluation, value_iteration, PolicyTable, TabularMdp};
use voi_core::vehicle::{RewardWeights, VehicleGridConfig, VehicleGridModel, VehicleParams};
use voi_core::voi::lemma2_check;
use voi_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoiStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Malformed input: bad sizes, non-stochastic rows, out-of-range values.
    InvalidInput = 2,
    DimensionMismatch = 3,
    ContractViolation = 4,
    Unsupported = 5,
    Diverged = 6,
    Io = 7,
    Config = 8,
    /// A Rust panic was caught at the boundary.
    Panic = 9,
}

/// Which built-in grid a vehicle model uses.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoiGridKind {
    /// The control-quality grid (about 21k states, tens of seconds to build).
    Default = 0,
    /// A coarse grid for quick cross-checks (about 1.3k states).
    Small = 1,
}

/// Opaque tabular MDP.
pub struct VoiMdp {
    inner: TabularMdp,
}

/// Opaque discretised vehicle-following model with its DP solution.
pub struct VoiVehicleModel {
    inner: VehicleGridModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> VoiStatus {
    match e {
        Error::Dimension { .. } => VoiStatus::DimensionMismatch,
        Error::Contract { .. } => VoiStatus::ContractViolation,
        Error::Unsupported { .. } => VoiStatus::Unsupported,
        Error::Invalid { .. } => VoiStatus::InvalidInput,
        Error::Diverged { .. } => VoiStatus::Diverged,
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) => VoiStatus::Io,
        Error::Config(_) => VoiStatus::Config,
    }
}

enum Failure {
    Null(&'static str),
    Input(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VoiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VoiStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            VoiStatus::NullPointer
        }
        Ok(Err(Failure::Input(msg))) => {
            set_error(msg);
            VoiStatus::InvalidInput
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            VoiStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

fn policy_from(actions: &[u32], mdp: &TabularMdp, what: &str) -> Result<PolicyTable, Failure> {
    if actions.len() != mdp.n_states() {
        return Err(Failure::Input(format!("{what} has {} entries for {} states", actions.len(), mdp.n_states())));
    }
    if let Some(a) = actions.iter().find(|&&a| a as usize >= mdp.n_actions()) {
        return Err(Failure::Input(format!("{what} uses action {a} of {}", mdp.n_actions())));
    }
    Ok(PolicyTable::Deterministic(actions.iter().map(|&a| a as usize).collect()))
}

/// Message of the last failure on this thread, or null if there was none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn voi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Clears the last-error message of this thread.
#[no_mangle]
pub extern "C" fn voi_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn voi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `J_inf − J_sup`.
#[no_mangle]
pub extern "C" fn voi_evoi(j_inf: f64, j_sup: f64) -> f64 {
    voi_core::voi::evoi(j_inf, j_sup)
}

/// Builds an MDP from a dense `P[s][a][s']` tensor (`n_states² · n_actions`
/// values), `R[s][a]` (`n_states · n_actions`) and an initial distribution
/// (`n_states`). On success `*out` owns a handle for [`voi_mdp_free`].
///
/// # Safety
/// Each pointer must be valid for the stated number of reads; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn voi_mdp_new(
    n_states: usize,
    n_actions: usize,
    transitions: *const f64,
    rewards: *const f64,
    gamma: f64,
    init: *const f64,
    out: *mut *mut VoiMdp,
) -> VoiStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        *out = ptr::null_mut();
        let n = n_states
            .checked_mul(n_states)
            .and_then(|x| x.checked_mul(n_actions))
            .ok_or_else(|| Failure::Input("MDP size overflows".into()))?;
        let p = slice(transitions, n, "transitions")?;
        let r = slice(rewards, n_states * n_actions, "rewards")?;
        let init = slice(init, n_states, "init")?;
        let rows = (0..n_states * n_actions)
            .map(|i| {
                p[i * n_states..(i + 1) * n_states]
                    .iter()
                    .enumerate()
                    .filter(|(_, &q)| q != 0.0)
                    .map(|(j, &q)| (j, q))
                    .collect()
            })
            .collect();
        let mdp = TabularMdp::new(n_states, n_actions, rows, r.to_vec(), gamma, init.to_vec())?;
        *out = Box::into_raw(Box::new(VoiMdp { inner: mdp }));
        Ok(())
    })
}

/// Releases an MDP handle. Null is a no-op.
///
/// # Safety
/// `mdp` must come from [`voi_mdp_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn voi_mdp_free(mdp: *mut VoiMdp) {
    if !mdp.is_null() {
        drop(Box::from_raw(mdp));
    }
}

/// Number of states and actions.
///
/// # Safety
/// `mdp` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn voi_mdp_shape(mdp: *const VoiMdp, n_states: *mut usize, n_actions: *mut usize) -> VoiStatus {
    guard(|| {
        let m = &handle(mdp, "mdp")?.inner;
        *out(n_states, "n_states")? = m.n_states();
        *out(n_actions, "n_actions")? = m.n_actions();
        Ok(())
    })
}

/// Value iteration to sup-norm residual `tol`. Writes `n_states` values and
/// greedy actions; either output may be null to skip it.
///
/// # Safety
/// `mdp` must be a live handle; non-null outputs must hold `n_states` entries.
#[no_mangle]
pub unsafe extern "C" fn voi_mdp_value_iteration(
    mdp: *const VoiMdp,
    tol: f64,
    values: *mut f64,
    policy: *mut u32,
    len: usize,
) -> VoiStatus {
    guard(|| {
        let m = &handle(mdp, "mdp")?.inner;
        if len != m.n_states() {
            return Err(Failure::Input(format!("output length {len} for {} states", m.n_states())));
        }
        let sol = value_iteration(m, tol)?;
        if !values.is_null() {
            slice_mut(values, len, "values")?.copy_from_slice(&sol.values);
        }
        if !policy.is_null() {
            for (o, &a) in slice_mut(policy, len, "policy")?.iter_mut().zip(&sol.policy) {
                *o = a as u32;
            }
        }
        Ok(())
    })
}

/// Exact state values and initial-distribution performance of a
/// deterministic policy. `values` may be null.
///
/// # Safety
/// `mdp` must be a live handle; `policy` and non-null `values` must hold
/// `len == n_states` entries; `performance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn voi_mdp_evaluate(
    mdp: *const VoiMdp,
    policy: *const u32,
    len: usize,
    values: *mut f64,
    performance: *mut f64,
) -> VoiStatus {
    guard(|| {
        let m = &handle(mdp, "mdp")?.inner;
        let pi = policy_from(slice(policy, len, "policy")?, m, "policy")?;
        let perf = out(performance, "performance")?;
        if !values.is_null() {
            let v = policy_evaluation(m, &pi, 1e-12)?;
            slice_mut(values, len, "values")?.copy_from_slice(&v);
        }
        *perf = exact_performance(m, &pi)?;
        Ok(())
    })
}

/// Exact EVoI of two deterministic policies and its occupancy-weighted
/// IVoI decomposition.
///
/// # Safety
/// `mdp` must be a live handle; both policies must hold `len == n_states`
/// entries; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn voi_mdp_evoi_decomposition(
    mdp: *const VoiMdp,
    pi_inf: *const u32,
    pi_sup: *const u32,
    len: usize,
    evoi: *mut f64,
    weighted_ivoi: *mut f64,
) -> VoiStatus {
    guard(|| {
        let m = &handle(mdp, "mdp")?.inner;
        let inf = policy_from(slice(pi_inf, len, "pi_inf")?, m, "pi_inf")?;
        let sup = policy_from(slice(pi_sup, len, "pi_sup")?, m, "pi_sup")?;
        let (e, w) = (out(evoi, "evoi")?, out(weighted_ivoi, "weighted_ivoi")?);
        let rep = lemma2_check(m, &inf, &sup)?;
        *e = rep.evoi;
        *w = rep.weighted_ivoi;
        Ok(())
    })
}

/// Discretises the follower dynamics with default vehicle parameters and
/// reward weights and solves the resulting MDP.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn voi_vehicle_model_build(grid: VoiGridKind, seed: u64, out: *mut *mut VoiVehicleModel) -> VoiStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        *out = ptr::null_mut();
        let cfg = match grid {
            VoiGridKind::Default => VehicleGridConfig::default(),
            VoiGridKind::Small => VehicleGridConfig::small(),
        };
        let model = VehicleGridModel::build(&VehicleParams::default(), &RewardWeights::default(), &cfg, seed)?;
        *out = Box::into_raw(Box::new(VoiVehicleModel { inner: model }));
        Ok(())
    })
}

/// Releases a vehicle model. Null is a no-op.
///
/// # Safety
/// `model` must come from [`voi_vehicle_model_build`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn voi_vehicle_model_free(model: *mut VoiVehicleModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of grid states.
///
/// # Safety
/// `model` must be a live handle and `n` writable.
#[no_mangle]
pub unsafe extern "C" fn voi_vehicle_model_n_states(model: *const VoiVehicleModel, n: *mut usize) -> VoiStatus {
    guard(|| {
        *out(n, "n")? = handle(model, "model")?.inner.n_states();
        Ok(())
    })
}

unsafe fn observation(obs: *const f64, len: usize) -> Result<[f64; 4], Failure> {
    let o = slice(obs, len, "obs")?;
    <[f64; 4]>::try_from(o).map_err(|_| Failure::Input(format!("observation has {len} values, expected 4")))
}

/// Superior control for an observation `[e_p, e_v, acc, acc_pred]`.
///
/// # Safety
/// `model` must be a live handle, `obs` must hold `len` values and `u`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn voi_vehicle_model_action(
    model: *const VoiVehicleModel,
    obs: *const f64,
    len: usize,
    u: *mut f64,
) -> VoiStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        let o = observation(obs, len)?;
        let u = out(u, "u")?;
        *u = voi_core::ssdp::Policy::act(&m.sup_policy(), &o)[0];
        Ok(())
    })
}

/// IVoI of control `u` at an observation: the superior policy's advantage
/// `A(obs, u)`, never positive.
///
/// # Safety
/// `model` must be a live handle, `obs` must hold `len` values and `ivoi`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn voi_vehicle_model_ivoi(
    model: *const VoiVehicleModel,
    obs: *const f64,
    len: usize,
    u: f64,
    ivoi: *mut f64,
) -> VoiStatus {
    guard(|| {
        let m = &handle(model, "model")?.inner;
        let o = observation(obs, len)?;
        if !u.is_finite() {
            return Err(Failure::Input("control is not finite".into()));
        }
        *out(ivoi, "ivoi")? = m.advantage(&o, u);
        Ok(())
    })
}

/// Runs an experiment described by TOML text. `*pass` receives 1 when the
/// scenario's checks pass and 0 otherwise; artifacts go to the configured
/// output directory.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string and `pass` writable.
#[no_mangle]
pub unsafe extern "C" fn voi_run_config(config_toml: *const c_char, pass: *mut i32) -> VoiStatus {
    guard(|| {
        if config_toml.is_null() {
            return Err(Failure::Null("config_toml"));
        }
        let text = CStr::from_ptr(config_toml)
            .to_str()
            .map_err(|_| Failure::Input("config is not UTF-8".into()))?;
        let p = out(pass, "pass")?;
        let cfg = ExperimentConfig::from_toml(text)?;
        *p = i32::from(run(&cfg)?.pass);
        Ok(())
    })
}
