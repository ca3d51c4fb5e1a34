//! C ABI over the `symred` scene pipelines.
//!
//! Scenes and outcomes are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns a
//! [`SymredStatus`]; on anything other than `SYMRED_STATUS_OK` or
//! `SYMRED_STATUS_CHECK_FAILED` a message is available from
//! [`symred_last_error`] on the same thread. Strings returned by the
//! library are freed with [`symred_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use symred::cli::{run_pipeline, Outcome, Pipeline};
use symred::scene::Scene;

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymredStatus {
    Ok = 0,
    /// The pipeline ran and at least one check failed; the outcome is set.
    CheckFailed = 1,
    /// The scene or the request is invalid.
    InvalidInput = 2,
    NullPointer = 3,
    InvalidUtf8 = 4,
    /// An internal panic was caught at the boundary.
    Panic = 5,
}

/// A validated scene.
pub struct SymredScene(Scene);

/// The report of a pipeline run with the scenes it produced.
pub struct SymredOutcome(Outcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn guard(f: impl FnOnce() -> SymredStatus) -> SymredStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            SymredStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, SymredStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(SymredStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|e| {
        set_error(format!("argument is not UTF-8: {e}"));
        SymredStatus::InvalidUtf8
    })
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn symred_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn symred_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse and validate a scene from JSON text.
///
/// # Safety
/// `json` must be NULL or a NUL-terminated string; `out` must be NULL or
/// point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn symred_scene_from_json(json: *const c_char, out: *mut *mut SymredScene) -> SymredStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return SymredStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Scene::from_json(text) {
            Ok(scene) => {
                *out = Box::into_raw(Box::new(SymredScene(scene)));
                SymredStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                SymredStatus::InvalidInput
            }
        }
    })
}

/// Serialize a scene to JSON; free the result with `symred_string_free`.
/// Returns NULL if `scene` is NULL.
///
/// # Safety
/// `scene` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn symred_scene_to_json(scene: *const SymredScene) -> *mut c_char {
    match scene.as_ref() {
        Some(s) => into_c_string(s.0.to_json()),
        None => ptr::null_mut(),
    }
}

/// Override the sampling seed.
///
/// # Safety
/// `scene` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn symred_scene_set_seed(scene: *mut SymredScene, seed: u64) -> SymredStatus {
    guard(|| match scene.as_mut() {
        Some(s) => {
            s.0.seed = seed;
            SymredStatus::Ok
        }
        None => {
            set_error("null scene");
            SymredStatus::NullPointer
        }
    })
}

/// Override the tolerance of every adjustable check; must be positive.
///
/// # Safety
/// `scene` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn symred_scene_set_tolerance(scene: *mut SymredScene, tol: f64) -> SymredStatus {
    guard(|| {
        let Some(s) = scene.as_mut() else {
            set_error("null scene");
            return SymredStatus::NullPointer;
        };
        if !(tol.is_finite() && tol > 0.0) {
            set_error(format!("tolerance must be positive, got {tol}"));
            return SymredStatus::InvalidInput;
        }
        s.0.tolerance = Some(tol);
        SymredStatus::Ok
    })
}

/// Dimension of the scene's chart, or 0 for NULL.
///
/// # Safety
/// `scene` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn symred_scene_dim(scene: *const SymredScene) -> usize {
    scene.as_ref().map_or(0, |s| s.0.chart.dim())
}

/// # Safety
/// `scene` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn symred_scene_free(scene: *mut SymredScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

unsafe fn run(scene: *const SymredScene, pipeline: Pipeline, out: *mut *mut SymredOutcome) -> SymredStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return SymredStatus::NullPointer;
        }
        *out = ptr::null_mut();
        let Some(s) = scene.as_ref() else {
            set_error("null scene");
            return SymredStatus::NullPointer;
        };
        match run_pipeline(&s.0, pipeline) {
            Ok(outcome) => {
                let passed = outcome.report.passed;
                *out = Box::into_raw(Box::new(SymredOutcome(outcome)));
                if passed {
                    SymredStatus::Ok
                } else {
                    SymredStatus::CheckFailed
                }
            }
            Err(e) => {
                set_error(e.to_string());
                SymredStatus::InvalidInput
            }
        }
    })
}

/// Check the form and connection of a scene.
///
/// # Safety
/// `scene` must be NULL or a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn symred_check(scene: *const SymredScene, out: *mut *mut SymredOutcome) -> SymredStatus {
    run(scene, Pipeline::Check, out)
}

/// Lift the base connection to the cotangent bundle, optionally
/// symmetrized and corrected against the canonical form.
///
/// # Safety
/// As for `symred_check`.
#[no_mangle]
pub unsafe extern "C" fn symred_lift(
    scene: *const SymredScene,
    symplectify: bool,
    out: *mut *mut SymredOutcome,
) -> SymredStatus {
    run(scene, Pipeline::Lift { symplectify }, out)
}

/// Reduce to the quotient of a moment-map level set.
///
/// # Safety
/// As for `symred_check`.
#[no_mangle]
pub unsafe extern "C" fn symred_reduce(scene: *const SymredScene, out: *mut *mut SymredOutcome) -> SymredStatus {
    run(scene, Pipeline::Reduce, out)
}

/// Build a presymplectic connection, optionally reduced to the leaf space.
///
/// # Safety
/// As for `symred_check`.
#[no_mangle]
pub unsafe extern "C" fn symred_presymplectic(
    scene: *const SymredScene,
    reduce: bool,
    out: *mut *mut SymredOutcome,
) -> SymredStatus {
    run(scene, Pipeline::Presymplectic { reduce }, out)
}

/// Whether every check passed; false for NULL.
///
/// # Safety
/// `outcome` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn symred_outcome_passed(outcome: *const SymredOutcome) -> bool {
    outcome.as_ref().is_some_and(|o| o.0.report.passed)
}

/// `{"report": …, "scene": …, "quotient": …}` as JSON; free with
/// `symred_string_free`.
///
/// # Safety
/// `outcome` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn symred_outcome_to_json(outcome: *const SymredOutcome) -> *mut c_char {
    match outcome.as_ref() {
        Some(o) => into_c_string(o.0.to_json()),
        None => ptr::null_mut(),
    }
}

/// Human-readable report; free with `symred_string_free`.
///
/// # Safety
/// `outcome` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn symred_outcome_report_text(outcome: *const SymredOutcome) -> *mut c_char {
    match outcome.as_ref() {
        Some(o) => into_c_string(o.0.report.to_text()),
        None => ptr::null_mut(),
    }
}

/// A new handle to the scene the pipeline produced, or NULL if none.
///
/// # Safety
/// `outcome` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn symred_outcome_scene(outcome: *const SymredOutcome) -> *mut SymredScene {
    match outcome.as_ref().and_then(|o| o.0.scene.clone()) {
        Some(s) => Box::into_raw(Box::new(SymredScene(s))),
        None => ptr::null_mut(),
    }
}

/// A new handle to the reduced scene, or NULL if none.
///
/// # Safety
/// `outcome` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn symred_outcome_quotient(outcome: *const SymredOutcome) -> *mut SymredScene {
    match outcome.as_ref().and_then(|o| o.0.quotient.clone()) {
        Some(s) => Box::into_raw(Box::new(SymredScene(s))),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `outcome` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn symred_outcome_free(outcome: *mut SymredOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn symred_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
