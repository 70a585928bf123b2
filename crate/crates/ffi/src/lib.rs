//! C ABI over the synthesis engine.
//!
//! Problems and solutions are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns an
//! [`MsStatus`]; the message of the last failure on the calling thread is
//! available from [`ms_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use modsynth::bench::{generate, BenchSpec};
use modsynth::engine::{comp_synthesis, monolithic_synthesis, EngineOptions, FirstTwo};
use modsynth::format::{parse_controllers, parse_problem, print_controllers, print_problem};
use modsynth::lts::Lts;
use modsynth::problem::ControlProblem;
use modsynth::verify::{check_solution_bounded, DEFAULT_BUDGET};
use modsynth::Error;

/// Result codes. Values are stable.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Text was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Input text or a benchmark spec failed to parse or validate.
    InvalidInput = 3,
    /// A composition exceeded the state budget.
    Budget = 4,
    /// The engine panicked or broke an internal contract.
    Internal = 5,
}

/// Synthesis strategy for [`ms_solve`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsMode {
    Compositional = 0,
    Monolithic = 1,
}

/// Opaque parsed control problem.
pub struct MsProblem {
    inner: ControlProblem,
}

/// Opaque synthesis result.
pub struct MsSolution {
    controllers: Option<Vec<Lts>>,
    max_states: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> MsStatus {
    match e {
        Error::Budget { .. } => MsStatus::Budget,
        Error::Internal(_) => MsStatus::Internal,
        _ => MsStatus::InvalidInput,
    }
}

/// Runs `f`, recording its error and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (MsStatus, String)>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside modsynth");
            MsStatus::Internal
        }
    }
}

fn engine(e: Error) -> (MsStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, (MsStatus, String)> {
    if p.is_null() {
        return Err((MsStatus::NullArgument, "null string argument".into()));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (MsStatus::InvalidUtf8, e.to_string()))
}

fn null(what: &str) -> (MsStatus, String) {
    (MsStatus::NullArgument, format!("null {what}"))
}

fn into_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ms_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a problem from NUL-terminated text.
///
/// # Safety
/// `src` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_problem_parse(src: *const c_char, out: *mut *mut MsProblem) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let p = parse_problem(text(src)?).map_err(engine)?;
        *out = Box::into_raw(Box::new(MsProblem { inner: p }));
        Ok(())
    })
}

/// Builds a benchmark problem from a spec such as `dp:3` or `tl:2:2`.
///
/// # Safety
/// `spec` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_problem_generate(spec: *const c_char, out: *mut *mut MsProblem) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let spec: BenchSpec = text(spec)?.parse().map_err(engine)?;
        let p = generate(spec).map_err(engine)?;
        *out = Box::into_raw(Box::new(MsProblem { inner: p }));
        Ok(())
    })
}

/// Prints the problem back to text. Free the result with [`ms_string_free`].
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_problem_print(problem: *const MsProblem) -> *mut c_char {
    match problem.as_ref() {
        Some(p) => into_c(print_problem(&p.inner)),
        None => ptr::null_mut(),
    }
}

/// Number of components of the plant, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_problem_part_count(problem: *const MsProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.parts.len())
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_problem_free(problem: *mut MsProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Solves `problem`. An unrealizable problem still yields `Ok` and a solution
/// whose [`ms_solution_is_realizable`] is false. `budget` of 0 selects the
/// default.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_solve(
    problem: *const MsProblem,
    mode: MsMode,
    budget: usize,
    out: *mut *mut MsSolution,
) -> MsStatus {
    guard(|| {
        let p = &problem.as_ref().ok_or_else(|| null("problem"))?.inner;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let budget = if budget == 0 { DEFAULT_BUDGET } else { budget };
        let sol = match mode {
            MsMode::Compositional => {
                let opts = EngineOptions {
                    budget,
                    ..Default::default()
                };
                let r = comp_synthesis(p, &FirstTwo, &opts).map_err(engine)?;
                MsSolution {
                    max_states: r.max_subplant(),
                    controllers: r.bundle.map(|b| b.controllers),
                }
            }
            MsMode::Monolithic => {
                let r = monolithic_synthesis(p, budget).map_err(engine)?;
                MsSolution {
                    max_states: r.plant_states,
                    controllers: r.verdict.controller().map(|c| vec![c.clone()]),
                }
            }
        };
        *out = Box::into_raw(Box::new(sol));
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_solution_is_realizable(sol: *const MsSolution) -> bool {
    sol.as_ref().is_some_and(|s| s.controllers.is_some())
}

/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_solution_controller_count(sol: *const MsSolution) -> usize {
    sol.as_ref().and_then(|s| s.controllers.as_ref()).map_or(0, Vec::len)
}

/// Largest LTS the run synthesized over.
///
/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_solution_max_states(sol: *const MsSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.max_states)
}

/// Controllers in the text format, or null when unrealizable. Free the
/// result with [`ms_string_free`].
///
/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_solution_controllers(sol: *const MsSolution) -> *mut c_char {
    match sol.as_ref().and_then(|s| s.controllers.as_ref()) {
        Some(c) => into_c(print_controllers(c)),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `sol` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_solution_free(sol: *mut MsSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Checks controllers given as text against `problem`; `*ok` receives the
/// verdict.
///
/// # Safety
/// `problem` must be a live handle, `controllers` a valid NUL-terminated
/// string and `ok` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_verify(problem: *const MsProblem, controllers: *const c_char, ok: *mut bool) -> MsStatus {
    guard(|| {
        let p = &problem.as_ref().ok_or_else(|| null("problem"))?.inner;
        if ok.is_null() {
            return Err(null("output pointer"));
        }
        let ctrls = parse_controllers(text(controllers)?, &p.events).map_err(engine)?;
        let report = check_solution_bounded(p, &ctrls, DEFAULT_BUDGET).map_err(engine)?;
        *ok = report.ok();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
