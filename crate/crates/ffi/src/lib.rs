//! C ABI for `regime-lq`.
//!
//! Every function returns an [`RlqStatus`]; on failure the message is
//! available from [`rlq_last_error`] on the same thread. Objects are opaque
//! handles released with their `_free` function. Regime indices are 0-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use regime_lq::feedback::{build_law, FeedbackLaw};
use regime_lq::model::config::{load_model, ModelConfig};
use regime_lq::model::RegimeModel;
use regime_lq::riccati::{solve, solve_upper_bound, RiccatiSolution, SolverGrid, Variant};
use regime_lq::sim::{verify, SimConfig, VerifyConfig};
use regime_lq::{Error, ErrorClass};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    Solver = 4,
    Verification = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlqVariant {
    Full = 0,
    Truncated = 1,
    UpperBound = 2,
    LowerBound = 3,
}

/// Opaque model handle.
pub struct RlqModel(RegimeModel);

/// Opaque Riccati solution handle.
pub struct RlqSolution(RiccatiSolution);

/// Opaque feedback law handle.
pub struct RlqLaw {
    law: FeedbackLaw,
    m1: usize,
    m2: usize,
}

/// Inputs of [`rlq_verify`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RlqVerifyOptions {
    pub grid_n: usize,
    pub grid_sim: usize,
    pub n_paths: u64,
    pub seed: u64,
    pub x: f64,
    pub regime: usize,
    pub n_adversaries: usize,
    /// 0 uses every available core.
    pub workers: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: RlqStatus, msg: impl Into<String>) -> RlqStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> RlqStatus {
    let status = match e.class() {
        ErrorClass::Validation => RlqStatus::Validation,
        ErrorClass::Solver => RlqStatus::Solver,
        ErrorClass::Verification => RlqStatus::Verification,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> RlqStatus) -> RlqStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(RlqStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, RlqStatus> {
    if p.is_null() {
        return Err(fail(RlqStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(RlqStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_error(e),
        }
    };
}

macro_rules! deref {
    ($p:expr, $what:expr) => {
        match unsafe { $p.as_ref() } {
            Some(r) => r,
            None => return fail(RlqStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

fn put<T>(out: *mut *mut T, value: T) -> RlqStatus {
    unsafe { *out = Box::into_raw(Box::new(value)) };
    RlqStatus::Ok
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn rlq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a model from a JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlq_model_from_json(json: *const c_char, out: *mut *mut RlqModel) -> RlqStatus {
    guard(|| {
        if out.is_null() {
            return fail(RlqStatus::NullPointer, "out is null");
        }
        let text = match str_arg(json, "json") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let model = try_ffi!(ModelConfig::from_json(text).and_then(ModelConfig::into_model));
        put(out, RlqModel(model))
    })
}

/// Loads a model from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlq_model_from_file(path: *const c_char, out: *mut *mut RlqModel) -> RlqStatus {
    guard(|| {
        if out.is_null() {
            return fail(RlqStatus::NullPointer, "out is null");
        }
        let path = match str_arg(path, "path") {
            Ok(s) => s,
            Err(s) => return s,
        };
        put(out, RlqModel(try_ffi!(load_model(path))))
    })
}

/// # Safety
/// `model` must come from `rlq_model_from_*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rlq_model_free(model: *mut RlqModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of regimes and the control dimensions `m1`, `m2`.
///
/// # Safety
/// Pointers must be valid; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn rlq_model_dims(
    model: *const RlqModel,
    n_regimes: *mut usize,
    m1: *mut usize,
    m2: *mut usize,
    n_atoms: *mut usize,
) -> RlqStatus {
    guard(|| {
        let m = &deref!(model, "model").0;
        let d = m.dims();
        for (p, v) in [(n_regimes, m.n_regimes()), (m1, d.m1), (m2, d.m2), (n_atoms, m.nu().len())] {
            if !p.is_null() {
                *p = v;
            }
        }
        RlqStatus::Ok
    })
}

/// Checks the model against a case (`"standard"`, `"I"`, `"II"`, `"III"`) and margin `delta`.
///
/// # Safety
/// `model` must be valid and `case_name` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rlq_model_validate(model: *const RlqModel, case_name: *const c_char, delta: f64) -> RlqStatus {
    guard(|| {
        let m = &deref!(model, "model").0;
        let case = match str_arg(case_name, "case_name") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let flags = try_ffi!(regime_lq::cli::parse_flags(case, delta));
        try_ffi!(regime_lq::model::validate(m, &flags));
        RlqStatus::Ok
    })
}

/// Integrates the Riccati system on `steps` uniform steps. `radius` is used by `Truncated` only.
///
/// # Safety
/// `model` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlq_solve(
    model: *const RlqModel,
    steps: usize,
    variant: RlqVariant,
    radius: f64,
    out: *mut *mut RlqSolution,
) -> RlqStatus {
    guard(|| {
        let m = &deref!(model, "model").0;
        if out.is_null() {
            return fail(RlqStatus::NullPointer, "out is null");
        }
        let grid = try_ffi!(SolverGrid::new(m.horizon(), steps));
        let sol = match variant {
            RlqVariant::Full => solve(m, &grid, Variant::Full),
            RlqVariant::Truncated => solve(m, &grid, Variant::Truncated(radius)),
            RlqVariant::UpperBound => solve_upper_bound(m, &grid),
            RlqVariant::LowerBound => solve(m, &grid, Variant::LowerBound),
        };
        put(out, RlqSolution(try_ffi!(sol)))
    })
}

/// # Safety
/// `solution` must come from `rlq_solve` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rlq_solution_free(solution: *mut RlqSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Number of solver steps (nodes are `0..=steps`).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rlq_solution_steps(solution: *const RlqSolution, steps: *mut usize) -> RlqStatus {
    guard(|| {
        let s = &deref!(solution, "solution").0;
        if steps.is_null() {
            return fail(RlqStatus::NullPointer, "steps is null");
        }
        *steps = s.grid().steps;
        RlqStatus::Ok
    })
}

/// `P1`, `P2` of `regime` at node `node`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rlq_solution_node(
    solution: *const RlqSolution,
    regime: usize,
    node: usize,
    p1: *mut f64,
    p2: *mut f64,
) -> RlqStatus {
    guard(|| {
        let s = &deref!(solution, "solution").0;
        if p1.is_null() || p2.is_null() {
            return fail(RlqStatus::NullPointer, "output is null");
        }
        if regime >= s.n_regimes() || node > s.grid().steps {
            return fail(RlqStatus::InvalidArgument, format!("regime {regime} or node {node} out of range"));
        }
        *p1 = s.p1(regime, node);
        *p2 = s.p2(regime, node);
        RlqStatus::Ok
    })
}

/// `P1`, `P2` of `regime` at time `t`, linearly interpolated between nodes.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rlq_solution_at(
    solution: *const RlqSolution,
    regime: usize,
    t: f64,
    p1: *mut f64,
    p2: *mut f64,
) -> RlqStatus {
    guard(|| {
        let s = &deref!(solution, "solution").0;
        if p1.is_null() || p2.is_null() {
            return fail(RlqStatus::NullPointer, "output is null");
        }
        let horizon = s.grid().horizon;
        if regime >= s.n_regimes() || !(0.0..=horizon).contains(&t) {
            return fail(RlqStatus::InvalidArgument, format!("regime {regime} or time {t} out of range"));
        }
        (*p1, *p2) = s.at(regime, t);
        RlqStatus::Ok
    })
}

/// `V(x, regime) = P1(0)(x⁺)² + P2(0)(x⁻)²`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rlq_solution_value(
    solution: *const RlqSolution,
    x: f64,
    regime: usize,
    value: *mut f64,
) -> RlqStatus {
    guard(|| {
        let s = &deref!(solution, "solution").0;
        if value.is_null() {
            return fail(RlqStatus::NullPointer, "value is null");
        }
        if regime >= s.n_regimes() {
            return fail(RlqStatus::InvalidArgument, format!("regime {regime} out of range"));
        }
        *value = s.value(x, regime);
        RlqStatus::Ok
    })
}

/// Builds the optimal feedback law of a full solution.
///
/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rlq_law_new(
    model: *const RlqModel,
    solution: *const RlqSolution,
    out: *mut *mut RlqLaw,
) -> RlqStatus {
    guard(|| {
        let m = &deref!(model, "model").0;
        let s = &deref!(solution, "solution").0;
        if out.is_null() {
            return fail(RlqStatus::NullPointer, "out is null");
        }
        let law = try_ffi!(build_law(m, s));
        let d = m.dims();
        put(out, RlqLaw { law, m1: d.m1, m2: d.m2 })
    })
}

/// # Safety
/// `law` must come from `rlq_law_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rlq_law_free(law: *mut RlqLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}

/// Controls at `(t, X(t-) = x, regime)`. `u1` receives `m1` values, `u2`
/// receives `n_atoms * m2` values, atom-major.
///
/// # Safety
/// `u1` and `u2` must hold `u1_len` and `u2_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rlq_law_control_at(
    law: *const RlqLaw,
    t: f64,
    x: f64,
    regime: usize,
    u1: *mut f64,
    u1_len: usize,
    u2: *mut f64,
    u2_len: usize,
) -> RlqStatus {
    guard(|| {
        let l = deref!(law, "law");
        let need2 = l.law.n_atoms() * l.m2;
        if u1_len < l.m1 || u2_len < need2 {
            return fail(
                RlqStatus::InvalidArgument,
                format!("buffers need {} and {need2} entries, got {u1_len} and {u2_len}", l.m1),
            );
        }
        if (l.m1 > 0 && u1.is_null()) || (need2 > 0 && u2.is_null()) {
            return fail(RlqStatus::NullPointer, "output buffer is null");
        }
        if regime >= l.law.solution().n_regimes() {
            return fail(RlqStatus::InvalidArgument, format!("regime {regime} out of range"));
        }
        let horizon = l.law.grid().horizon;
        if !(t >= 0.0 && t <= horizon * (1.0 + 1e-12)) {
            return fail(RlqStatus::InvalidArgument, format!("time {t} outside [0, {horizon}]"));
        }
        let (a, b) = try_ffi!(l.law.control_at(t, x, regime));
        if l.m1 > 0 {
            std::slice::from_raw_parts_mut(u1, l.m1).copy_from_slice(a.as_slice());
        }
        if need2 > 0 {
            let dst = std::slice::from_raw_parts_mut(u2, need2);
            for (k, v) in b.iter().enumerate() {
                dst[k * l.m2..(k + 1) * l.m2].copy_from_slice(v.as_slice());
            }
        }
        RlqStatus::Ok
    })
}

/// Runs the verification harness and returns the report as a JSON string
/// (free with [`rlq_string_free`]). A failed verdict still returns `Ok`;
/// `passed` receives 1 or 0.
///
/// # Safety
/// Pointers must be valid; `case_name` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rlq_verify(
    model: *const RlqModel,
    case_name: *const c_char,
    delta: f64,
    options: *const RlqVerifyOptions,
    report_json: *mut *mut c_char,
    passed: *mut i32,
) -> RlqStatus {
    guard(|| {
        let m = &deref!(model, "model").0;
        let o = *deref!(options, "options");
        if report_json.is_null() {
            return fail(RlqStatus::NullPointer, "report_json is null");
        }
        let case = match str_arg(case_name, "case_name") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let flags = try_ffi!(regime_lq::cli::parse_flags(case, delta));
        let cfg = VerifyConfig {
            grid_n: o.grid_n,
            sim: SimConfig {
                grid_sim: o.grid_sim,
                n_paths: o.n_paths,
                seed: o.seed,
                workers: (o.workers > 0).then_some(o.workers),
            },
            x: o.x,
            i0: o.regime,
            n_adversaries: o.n_adversaries,
        };
        let report = try_ffi!(verify(m, &flags, &cfg));
        let json = try_ffi!(report.to_json());
        if !passed.is_null() {
            *passed = i32::from(report.passed);
        }
        *report_json = CString::new(json).unwrap_or_default().into_raw();
        RlqStatus::Ok
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rlq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
