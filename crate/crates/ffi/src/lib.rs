//! C interface: opaque handles for models, paths and estimates, integer
//! status codes matching the CLI exit codes, and a thread-local message for
//! the last failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mixlfsm::estimators::{estimate, default_f1, EstimationResult, MomentDesign, SolveOptions};
use mixlfsm::lfsm::{k_order_increments, Component, ModelParams, Path, SamplingScheme, Simulator};
use mixlfsm::stable::{sample_sym_stable, RngHandle};
use mixlfsm::Error;

pub const MLFSM_OK: i32 = 0;
pub const MLFSM_ERR_CONFIG: i32 = 2;
pub const MLFSM_ERR_INPUT: i32 = 3;
pub const MLFSM_ERR_NUMERICAL: i32 = 4;
pub const MLFSM_ERR_SOLVER: i32 = 5;
pub const MLFSM_ERR_CAPACITY: i32 = 6;
/// A required pointer argument was null.
pub const MLFSM_ERR_NULL: i32 = 7;
/// A Rust panic was caught at the boundary.
pub const MLFSM_ERR_PANIC: i32 = 8;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard<F: FnOnce() -> Result<(), (i32, String)>>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MLFSM_OK
        }
        Ok(Err((code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            MLFSM_ERR_PANIC
        }
    }
}

fn lib(e: Error) -> (i32, String) {
    (e.exit_code(), e.to_string())
}

fn null(name: &str) -> (i32, String) {
    (MLFSM_ERR_NULL, format!("{name} is null"))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mlfsm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mlfsm_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(c) => c,
        Err(_) => c"",
    };
    V.as_ptr()
}

/// Opaque mixed model `Σ b_j Y^{H_j, β_j}`.
pub struct MlfsmModel(ModelParams);

/// Opaque sampled path `X_Δ, …, X_{nΔ}`.
pub struct MlfsmPath(Path);

/// Opaque estimation result.
pub struct MlfsmEstimate(EstimationResult);

unsafe fn slice<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], (i32, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Create a model of `q` components from three arrays of length `q`.
///
/// # Safety
/// `b`, `hurst` and `beta` point to `q` readable doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn mlfsm_model_new(
    q: usize,
    b: *const f64,
    hurst: *const f64,
    beta: *const f64,
    out: *mut *mut MlfsmModel,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let (b, h, s) = (slice(b, q, "b")?, slice(hurst, q, "hurst")?, slice(beta, q, "beta")?);
        let comps = (0..q).map(|j| Component::new(b[j], h[j], s[j])).collect();
        let m = ModelParams::new(comps).map_err(lib)?;
        *out = Box::into_raw(Box::new(MlfsmModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` is null or was returned by [`mlfsm_model_new`] and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlfsm_model_free(model: *mut MlfsmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Simulate `n` observations with step `delta`, kernel truncation sized for
/// increments of order `k` at lags up to `max_gamma`.
///
/// # Safety
/// `model` is a live model handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn mlfsm_simulate(
    model: *const MlfsmModel,
    n: usize,
    delta: f64,
    k: usize,
    max_gamma: usize,
    seed: u64,
    out: *mut *mut MlfsmPath,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let scheme = SamplingScheme::new(n, delta, k, vec![max_gamma.max(1)]).map_err(lib)?;
        let path = Simulator::new(&m.0, &scheme)
            .and_then(|s| s.simulate(&RngHandle::new(seed, 0)))
            .map_err(lib)?;
        *out = Box::into_raw(Box::new(MlfsmPath(path)));
        Ok(())
    })
}

/// Wrap `n` observed values with step `delta`.
///
/// # Safety
/// `values` points to `n` readable doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn mlfsm_path_from_values(
    values: *const f64,
    n: usize,
    delta: f64,
    out: *mut *mut MlfsmPath,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let v = slice(values, n, "values")?;
        if v.is_empty() || !(delta > 0.0) || v.iter().any(|x| !x.is_finite()) {
            return Err((MLFSM_ERR_INPUT, "a path needs finite values and a positive step".into()));
        }
        *out = Box::into_raw(Box::new(MlfsmPath(Path {
            delta,
            values: v.to_vec(),
        })));
        Ok(())
    })
}

/// Number of observations of a path (0 for null).
///
/// # Safety
/// `path` is null or a live path handle.
#[no_mangle]
pub unsafe extern "C" fn mlfsm_path_len(path: *const MlfsmPath) -> usize {
    path.as_ref().map_or(0, |p| p.0.values.len())
}

/// Copy up to `cap` values into `out`; fails when `cap` is too small.
///
/// # Safety
/// `path` is a live path handle; `out` has room for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn mlfsm_path_values(path: *const MlfsmPath, out: *mut f64, cap: usize) -> i32 {
    guard(|| {
        let p = path.as_ref().ok_or_else(|| null("path"))?;
        let v = &p.0.values;
        if cap < v.len() {
            return Err((MLFSM_ERR_CAPACITY, format!("buffer holds {cap} values, the path has {}", v.len())));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), out, v.len());
        Ok(())
    })
}

/// # Safety
/// `path` is null or a path handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlfsm_path_free(path: *mut MlfsmPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Fit `q` components with the adaptive equations on increments of order
/// `k`, using the default design and solver settings. A result is returned
/// even when the solver does not converge; check
/// [`mlfsm_estimate_converged`].
///
/// # Safety
/// `path` is a live path handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn mlfsm_estimate_adaptive(
    path: *const MlfsmPath,
    q: usize,
    k: usize,
    out: *mut *mut MlfsmEstimate,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let p = path.as_ref().ok_or_else(|| null("path"))?;
        if q == 0 {
            return Err((MLFSM_ERR_CONFIG, "q must be positive".into()));
        }
        let design = MomentDesign::default_adaptive(q, default_f1());
        let panel = k_order_increments(&p.0, k, &design.gammas()).map_err(lib)?;
        let r = estimate(&panel, &design, q, None, None, &SolveOptions::default()).map_err(lib)?;
        *out = Box::into_raw(Box::new(MlfsmEstimate(r)));
        Ok(())
    })
}

/// Length of θ̂ (0 for null).
///
/// # Safety
/// `est` is null or a live estimate handle.
#[no_mangle]
pub unsafe extern "C" fn mlfsm_estimate_dim(est: *const MlfsmEstimate) -> usize {
    est.as_ref().map_or(0, |e| e.0.theta_hat.coords.len())
}

/// 1 when the solver converged, 0 otherwise (or for null).
///
/// # Safety
/// `est` is null or a live estimate handle.
#[no_mangle]
pub unsafe extern "C" fn mlfsm_estimate_converged(est: *const MlfsmEstimate) -> i32 {
    est.as_ref().map_or(0, |e| e.0.converged as i32)
}

/// Copy θ̂ `(b̃_1, H_1, β_1, …)` into `out`.
///
/// # Safety
/// `est` is a live estimate handle; `out` has room for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn mlfsm_estimate_theta(est: *const MlfsmEstimate, out: *mut f64, cap: usize) -> i32 {
    guard(|| {
        let e = est.as_ref().ok_or_else(|| null("estimate"))?;
        let t = &e.0.theta_hat.coords;
        if cap < t.len() {
            return Err((MLFSM_ERR_CAPACITY, format!("buffer holds {cap} values, θ has {}", t.len())));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(t.as_ptr(), out, t.len());
        Ok(())
    })
}

/// # Safety
/// `est` is null or an estimate handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlfsm_estimate_free(est: *mut MlfsmEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// `n` symmetric stable draws with `E exp(iλZ) = exp(-|scale λ|^β)` from
/// stream `stream` of `seed`.
///
/// # Safety
/// `out` has room for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn mlfsm_sample_stable(
    beta: f64,
    scale: f64,
    n: usize,
    seed: u64,
    stream: u64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let v = sample_sym_stable(beta, scale, n, &RngHandle::new(seed, stream)).map_err(lib)?;
        if n > 0 && out.is_null() {
            return Err(null("out"));
        }
        if n > 0 {
            ptr::copy_nonoverlapping(v.as_ptr(), out, n);
        }
        Ok(())
    })
}

/// `b̃ = b^β ∫|g_{H,β,k}|^β`.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn mlfsm_btilde(b: f64, hurst: f64, beta: f64, k: usize, out: *mut f64) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = mixlfsm::estimators::spectral_scale(b, hurst, beta, k).map_err(lib)?;
        Ok(())
    })
}
