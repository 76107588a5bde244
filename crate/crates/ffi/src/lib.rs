//! C interface to the powertrain-sizing toolkit.
//!
//! Objects cross the boundary as opaque handles created by `pts_*_new` or
//! `pts_*_load` functions and released by the matching `pts_*_free`. Every
//! fallible function returns a [`PtsStatus`]; on failure a message for the
//! calling thread is available from [`pts_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use powertrain_sizing::config::ToolkitConfig;
use powertrain_sizing::designopt::{solve, DesignProblem, DesignVector};
use powertrain_sizing::oracle::{oracle_loss, MotorDesign, MotorTechSpec};
use powertrain_sizing::pipeline::{build_problem, Bundle};
use powertrain_sizing::surrogate::LossSurrogate;
use powertrain_sizing::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    Io = 5,
    Infeasible = 6,
    FitFailed = 7,
    OutsideEnvelope = 8,
    Panic = 99,
}

/// A point in the design space.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtsDesign {
    /// Rated power [W].
    pub p_rated: f64,
    /// Relative length [-].
    pub lambda: f64,
    /// Fixed gear ratio [-].
    pub gamma_fgt: f64,
}

impl From<DesignVector> for PtsDesign {
    fn from(d: DesignVector) -> Self {
        Self {
            p_rated: d.p_rated,
            lambda: d.lambda,
            gamma_fgt: d.gamma_fgt,
        }
    }
}

/// Fitted loss surrogate.
pub struct PtsSurrogate {
    inner: LossSurrogate,
}

/// Design problem assembled from a configuration and a fitted bundle.
pub struct PtsProblem {
    inner: DesignProblem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PtsStatus {
    match e {
        Error::EmptyFeasibleSet { .. } | Error::NoFeasibleStart { .. } => PtsStatus::Infeasible,
        Error::RankDeficient(_)
        | Error::EigenFailure
        | Error::LevelFit { .. }
        | Error::CollinearSamples => PtsStatus::FitFailed,
        Error::OutsideEnvelope { .. } => PtsStatus::OutsideEnvelope,
        Error::Io { .. } | Error::MissingInput { .. } => PtsStatus::Io,
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) | Error::Config { .. } => {
            PtsStatus::Parse
        }
        _ => PtsStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and catching panics.
fn guard(f: impl FnOnce() -> Result<(), PtsStatus>) -> PtsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PtsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside ptsize".into());
            PtsStatus::Panic
        }
    }
}

fn fail(e: Error) -> PtsStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null_arg(name: &str) -> PtsStatus {
    set_error(format!("`{name}` is null"));
    PtsStatus::NullArgument
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, PtsStatus> {
    if p.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("`{name}` is not valid UTF-8"));
        PtsStatus::InvalidUtf8
    })
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, PtsStatus> {
    p.as_mut().ok_or_else(|| null_arg(name))
}

/// Copies the calling thread's last error message into `buf` (always
/// NUL-terminated when `len > 0`) and returns the full message length
/// excluding the terminator; 0 when no error has been recorded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pts_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loss [W] of the built-in motor oracle with default technology data.
///
/// # Safety
/// `out_loss` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pts_oracle_loss(
    p_rated: f64,
    lambda: f64,
    omega: f64,
    torque: f64,
    out_loss: *mut f64,
) -> PtsStatus {
    guard(|| {
        let out = out_arg(out_loss, "out_loss")?;
        let d = MotorDesign::new(p_rated, lambda);
        *out = oracle_loss(&MotorTechSpec::default(), &d, omega, torque).map_err(fail)?;
        Ok(())
    })
}

/// Parses a surrogate from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pts_surrogate_from_json(
    json: *const c_char,
    out: *mut *mut PtsSurrogate,
) -> PtsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let s = LossSurrogate::from_json(str_arg(json, "json")?).map_err(fail)?;
        s.validate().map_err(fail)?;
        *out = Box::into_raw(Box::new(PtsSurrogate { inner: s }));
        Ok(())
    })
}

/// Loads the surrogate from the bundle written by `ptsize fit` in `out_dir`.
///
/// # Safety
/// `out_dir` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pts_surrogate_load(
    out_dir: *const c_char,
    out: *mut *mut PtsSurrogate,
) -> PtsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let b = Bundle::load(Path::new(str_arg(out_dir, "out_dir")?)).map_err(fail)?;
        *out = Box::into_raw(Box::new(PtsSurrogate { inner: b.surrogate }));
        Ok(())
    })
}

/// Predicted loss [W] at motor speed `omega` [rad/s] and mechanical power
/// `p_m` [W].
///
/// # Safety
/// `s` must be a live handle; `out_loss` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pts_surrogate_predict_loss(
    s: *const PtsSurrogate,
    omega: f64,
    p_rated: f64,
    lambda: f64,
    p_m: f64,
    out_loss: *mut f64,
) -> PtsStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null_arg("s"))?;
        let out = out_arg(out_loss, "out_loss")?;
        *out = s
            .inner
            .predict_loss(omega, &MotorDesign::new(p_rated, lambda), p_m);
        Ok(())
    })
}

/// Releases a surrogate handle; null is ignored.
///
/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pts_surrogate_free(s: *mut PtsSurrogate) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Builds the design problem from a TOML configuration (null for defaults)
/// and the bundle in `out_dir`.
///
/// # Safety
/// `config_path` must be null or a NUL-terminated string; `out_dir` must be a
/// NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pts_problem_load(
    config_path: *const c_char,
    out_dir: *const c_char,
    out: *mut *mut PtsProblem,
) -> PtsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg_path = if config_path.is_null() {
            None
        } else {
            Some(Path::new(str_arg(config_path, "config_path")?))
        };
        let cfg = ToolkitConfig::load(cfg_path).map_err(fail)?;
        let bundle = Bundle::load(Path::new(str_arg(out_dir, "out_dir")?)).map_err(fail)?;
        let prob = build_problem(&cfg, &bundle).map_err(fail)?;
        *out = Box::into_raw(Box::new(PtsProblem { inner: prob }));
        Ok(())
    })
}

/// Battery energy `ΔE_b` [J] of a design; `out_feasible` receives 1 when
/// every constraint holds, else 0.
///
/// # Safety
/// `p` must be a live handle; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pts_problem_objective(
    p: *const PtsProblem,
    design: PtsDesign,
    out_delta_e: *mut f64,
    out_feasible: *mut c_int,
) -> PtsStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null_arg("p"))?;
        let de = out_arg(out_delta_e, "out_delta_e")?;
        let feas = out_arg(out_feasible, "out_feasible")?;
        let (p_rated, lambda, gamma) = (design.p_rated, design.lambda, design.gamma_fgt);
        let e = p.inner.evaluate(&DesignVector::new(p_rated, lambda, gamma));
        *de = e.delta_e;
        *feas = c_int::from(e.feasible());
        Ok(())
    })
}

/// Multi-start solve, cross-checked against the dense grid when
/// `crosscheck` is nonzero.
///
/// # Safety
/// `p` must be a live handle; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pts_problem_solve(
    p: *const PtsProblem,
    starts: u32,
    seed: u64,
    crosscheck: c_int,
    out_design: *mut PtsDesign,
    out_delta_e: *mut f64,
) -> PtsStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null_arg("p"))?;
        let d = out_arg(out_design, "out_design")?;
        let de = out_arg(out_delta_e, "out_delta_e")?;
        let cfg = powertrain_sizing::designopt::SolverConfig {
            starts: starts as usize,
            seed,
            crosscheck: crosscheck != 0,
            ..Default::default()
        };
        let r = solve(&p.inner, &cfg).map_err(fail)?;
        *d = r.design.into();
        *de = r.delta_e;
        Ok(())
    })
}

/// Releases a problem handle; null is ignored.
///
/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pts_problem_free(p: *mut PtsProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}
