//! C ABI over `ccd-core`.
//!
//! Problems and results are opaque heap handles owned by the caller and
//! released with the matching `_free` function. Every entry point returns a
//! [`CcdStatus`]; on failure a message is stored per thread and can be read
//! with [`ccd_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ccd_core::cli::{parse_config, preset, resolve_grid, ConfigError, GridChoice, RunError, RunSpec};
use ccd_core::discretization::{assemble, closed_loop_matrix, GridConfig};
use ccd_core::lyapunov::{cost_jf, max_real_eig};
use ccd_core::model::{theorem1_margins, DesignPoint};
use ccd_core::optimizer::{run_ccd, CcdOutcome};
use ccd_core::pdesim::{cost_quadrature, simulate};
use ccd_core::sensitivity::gradient_jf;
use ccd_core::{CcdError, TerminalStatus};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Infeasible = 4,
    NotHurwitz = 5,
    Numerical = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// How a descent ended.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcdTermination {
    GradToleranceMet = 0,
    CostChangeToleranceMet = 1,
    MaxIters = 2,
    LineSearchStalled = 3,
}

impl From<TerminalStatus> for CcdTermination {
    fn from(s: TerminalStatus) -> Self {
        match s {
            TerminalStatus::GradToleranceMet => CcdTermination::GradToleranceMet,
            TerminalStatus::CostChangeToleranceMet => CcdTermination::CostChangeToleranceMet,
            TerminalStatus::MaxIters => CcdTermination::MaxIters,
            TerminalStatus::LineSearchStalled => CcdTermination::LineSearchStalled,
        }
    }
}

/// Design variables in the order `a, b, k1, k2`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcdPoint {
    pub a: f64,
    pub b: f64,
    pub k1: f64,
    pub k2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcdMargins {
    pub kbar: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub max_re_eig: f64,
    /// Nonzero when all margins are negative and the closed loop is Hurwitz.
    pub feasible: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcdTraceRow {
    pub iter: usize,
    pub point: CcdPoint,
    pub jf: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub backtracks: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcdPdeCost {
    pub j_control: f64,
    pub j_total: f64,
    pub j_total_time_scaled: f64,
}

/// A configured co-design problem and its current design point.
pub struct CcdProblem {
    spec: RunSpec,
    grid: GridConfig,
}

/// Outcome of [`ccd_problem_optimize`].
pub struct CcdResult {
    outcome: CcdOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(CcdStatus, String);

impl From<CcdError> for Failure {
    fn from(e: CcdError) -> Self {
        let status = match &e {
            CcdError::GridTooSmall(_) | CcdError::NonFinite(_) | CcdError::InvalidArgument(_) => {
                CcdStatus::InvalidArgument
            }
            CcdError::Infeasible(_) => CcdStatus::Infeasible,
            CcdError::NotHurwitz { .. } => CcdStatus::NotHurwitz,
            CcdError::SchurNoConvergence(_) | CcdError::SingularSylvester { .. } | CcdError::SingularStep { .. } => {
                CcdStatus::Numerical
            }
        };
        Failure(status, e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let status = match e {
            ConfigError::Infeasible(_) => CcdStatus::Infeasible,
            _ => CcdStatus::Config,
        };
        Failure(status, e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        let msg = e.to_string();
        match e {
            RunError::Module { source, .. } => Failure(Failure::from(source).0, msg),
            _ => Failure(CcdStatus::InvalidArgument, msg),
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CcdStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body` with panics contained and errors recorded.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CcdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            CcdStatus::Ok
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
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(&format!("internal panic: {msg}"));
            CcdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn to_point(p: &DesignPoint) -> CcdPoint {
    CcdPoint {
        a: p.a,
        b: p.b,
        k1: p.k1,
        k2: p.k2,
    }
}

fn new_problem(spec: RunSpec) -> Result<Box<CcdProblem>, Failure> {
    let (grid, _) = resolve_grid(spec.grid)?;
    Ok(Box::new(CcdProblem { spec, grid }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ccd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated
/// and always NUL-terminated when `len > 0`). Returns the length the full
/// message needs including the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ccd_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = (bytes.len() - 1).min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates a problem from a built-in scenario name such as `case1-hom`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccd_problem_from_preset(name: *const c_char, out: *mut *mut CcdProblem) -> CcdStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = ptr::null_mut();
        let name = CStr::from_ptr(deref(name, "name")?)
            .to_str()
            .map_err(|_| Failure(CcdStatus::InvalidArgument, "name is not UTF-8".into()))?;
        let spec = preset(name)
            .ok_or_else(|| Failure(CcdStatus::InvalidArgument, format!("unknown preset `{name}`")))?;
        *out = Box::into_raw(new_problem(spec)?);
        Ok(())
    })
}

/// Creates a problem from a `key = value` configuration document.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccd_problem_from_config(text: *const c_char, out: *mut *mut CcdProblem) -> CcdStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = ptr::null_mut();
        let text = CStr::from_ptr(deref(text, "text")?)
            .to_str()
            .map_err(|_| Failure(CcdStatus::Config, "configuration is not UTF-8".into()))?;
        *out = Box::into_raw(new_problem(parse_config(text)?)?);
        Ok(())
    })
}

/// Creates a problem for case 1, 2 or 3 with default settings on a grid of
/// `n` nodes, or on the calibrated grid when `n == 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccd_problem_new(
    case_id: u32,
    homogeneous: bool,
    n: usize,
    out: *mut *mut CcdProblem,
) -> CcdStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = ptr::null_mut();
        if !(1..=3).contains(&case_id) {
            return Err(Failure(CcdStatus::InvalidArgument, format!("case must be 1, 2 or 3, got {case_id}")));
        }
        let mut spec = RunSpec::for_case(case_id as u8, homogeneous);
        spec.grid = if n == 0 { GridChoice::Calibrated } else { GridChoice::Fixed(n) };
        *out = Box::into_raw(new_problem(spec)?);
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from a `ccd_problem_*` constructor
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ccd_problem_free(problem: *mut CcdProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of grid nodes the problem uses for the Lyapunov cost.
///
/// # Safety
/// `problem` must be a live handle; `n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccd_problem_grid_size(problem: *const CcdProblem, n: *mut usize) -> CcdStatus {
    guard(|| {
        *deref_mut(n, "n")? = deref(problem, "problem")?.grid.n;
        Ok(())
    })
}

/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccd_problem_point(problem: *const CcdProblem, out: *mut CcdPoint) -> CcdStatus {
    guard(|| {
        *deref_mut(out, "out")? = to_point(&deref(problem, "problem")?.spec.p0);
        Ok(())
    })
}

/// Replaces the design point; frozen variables are overwritten as well.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccd_problem_set_point(problem: *mut CcdProblem, point: CcdPoint) -> CcdStatus {
    guard(|| {
        let problem = deref_mut(problem, "problem")?;
        let p = DesignPoint {
            a: point.a,
            b: point.b,
            k1: point.k1,
            k2: point.k2,
            free_mask: problem.spec.p0.free_mask,
        };
        p.validate()?;
        problem.spec.p0 = p;
        Ok(())
    })
}

/// Stability margins and closed-loop spectral abscissa at the current point.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccd_problem_margins(problem: *const CcdProblem, out: *mut CcdMargins) -> CcdStatus {
    guard(|| {
        let problem = deref(problem, "problem")?;
        let out = deref_mut(out, "out")?;
        let p = &problem.spec.p0;
        let max_re = max_real_eig(&closed_loop_matrix(p, &problem.grid))?;
        let report = theorem1_margins(p).with_hurwitz(max_re < ccd_core::lyapunov::HURWITZ_THRESHOLD);
        *out = CcdMargins {
            kbar: report.kbar,
            m1: report.m1,
            m2: report.m2,
            m3: report.m3,
            max_re_eig: max_re,
            feasible: report.in_d as i32,
        };
        Ok(())
    })
}

/// Lyapunov cost `f_d + tr(P X0)` at the current point.
///
/// # Safety
/// `problem` must be a live handle; `jf` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccd_problem_cost(problem: *const CcdProblem, jf: *mut f64) -> CcdStatus {
    guard(|| {
        let problem = deref(problem, "problem")?;
        let jf = deref_mut(jf, "jf")?;
        let s = &problem.spec;
        let sys = assemble(&s.p0, &s.weights, &problem.grid, s.x0_mode)?;
        *jf = cost_jf(&sys, &s.p0, &s.weights)?.jf;
        Ok(())
    })
}

/// Gradient of the cost in the order `a, b, k1, k2`; frozen entries are 0.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccd_problem_gradient(problem: *const CcdProblem, out: *mut CcdPoint) -> CcdStatus {
    guard(|| {
        let problem = deref(problem, "problem")?;
        let out = deref_mut(out, "out")?;
        let s = &problem.spec;
        let sys = assemble(&s.p0, &s.weights, &problem.grid, s.x0_mode)?;
        let eval = cost_jf(&sys, &s.p0, &s.weights)?;
        let g = gradient_jf(&s.p0, &s.weights, &sys, &eval)?.g;
        *out = CcdPoint {
            a: g[0],
            b: g[1],
            k1: g[2],
            k2: g[3],
        };
        Ok(())
    })
}

/// Time-domain cost of the current point on the problem's simulation grid.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccd_problem_pde_cost(problem: *const CcdProblem, out: *mut CcdPdeCost) -> CcdStatus {
    guard(|| {
        let problem = deref(problem, "problem")?;
        let out = deref_mut(out, "out")?;
        let s = &problem.spec;
        let sol = simulate(&s.p0, &s.sim)?;
        let c = cost_quadrature(&sol, &s.p0, &s.weights);
        *out = CcdPdeCost {
            j_control: c.j_control,
            j_total: c.j_total,
            j_total_time_scaled: c.j_total_time_scaled,
        };
        Ok(())
    })
}

/// Runs the descent from the current point.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccd_problem_optimize(problem: *const CcdProblem, out: *mut *mut CcdResult) -> CcdStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = ptr::null_mut();
        let problem = deref(problem, "problem")?;
        let s = &problem.spec;
        let (outcome, _) = run_ccd(&s.p0, &s.weights, &problem.grid, s.x0_mode, &s.optimizer)?;
        *out = Box::into_raw(Box::new(CcdResult { outcome }));
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle from [`ccd_problem_optimize`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn ccd_result_free(result: *mut CcdResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Final point and cost.
///
/// # Safety
/// `result` must be a live handle; `point` and `jf` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccd_result_optimum(result: *const CcdResult, point: *mut CcdPoint, jf: *mut f64) -> CcdStatus {
    guard(|| {
        let result = deref(result, "result")?;
        *deref_mut(point, "point")? = to_point(&result.outcome.p_star);
        *deref_mut(jf, "jf")? = result.outcome.jf_star;
        Ok(())
    })
}

/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccd_result_termination(result: *const CcdResult, out: *mut CcdTermination) -> CcdStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(result, "result")?.outcome.trace.status.into();
        Ok(())
    })
}

/// Number of trace rows, the starting point included.
///
/// # Safety
/// `result` must be a live handle; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccd_result_trace_len(result: *const CcdResult, len: *mut usize) -> CcdStatus {
    guard(|| {
        *deref_mut(len, "len")? = deref(result, "result")?.outcome.trace.rows.len();
        Ok(())
    })
}

/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccd_result_trace_row(
    result: *const CcdResult,
    index: usize,
    out: *mut CcdTraceRow,
) -> CcdStatus {
    guard(|| {
        let result = deref(result, "result")?;
        let out = deref_mut(out, "out")?;
        let rows = &result.outcome.trace.rows;
        let r = rows.get(index).ok_or_else(|| {
            Failure(
                CcdStatus::OutOfRange,
                format!("trace row {index} out of range (len {})", rows.len()),
            )
        })?;
        *out = CcdTraceRow {
            iter: r.iter,
            point: CcdPoint {
                a: r.a,
                b: r.b,
                k1: r.k1,
                k2: r.k2,
            },
            jf: r.jf,
            grad_norm: r.grad_norm,
            step: r.step,
            backtracks: r.backtracks,
        };
        Ok(())
    })
}
