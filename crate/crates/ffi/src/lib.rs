//! C interface to the `nlms` solvers.
//!
//! Every function returns an [`NlmsStatus`]; results are written through out
//! pointers. Objects cross the boundary as opaque handles that the caller
//! releases with the matching `*_free` function. After a non-zero status,
//! `nlms_last_error` copies a description of the failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nlms::cli::{execute, Artifacts, ExperimentConfig};
use nlms::domain::{ExteriorSpec, FractionalOrder, GraphFunction, Obstacle};
use nlms::kernels::{GraphOperator, KernelSpec};
use nlms::solvers::{solve_fractional_obstacle, solve_two_membranes, MembraneProblem, SolveReport, SolverConfig, SolverMode};
use nlms::Error;

/// Status codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlmsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Ordering = 4,
    NotConverged = 5,
    OracleRefusal = 6,
    Numerical = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Sampled graph function on a cell-centered grid.
pub struct NlmsGraph(GraphFunction);

/// Outcome of a solve.
pub struct NlmsReport(SolveReport);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> NlmsStatus {
    match e {
        Error::Config(_) | Error::Parse { .. } => NlmsStatus::Config,
        Error::Ordering(_) => NlmsStatus::Ordering,
        Error::OracleRefusal(_) => NlmsStatus::OracleRefusal,
        Error::Io { .. } => NlmsStatus::Io,
        Error::Singular | Error::Divergent(_) | Error::SteepGraph { .. } | Error::InsufficientRadii { .. } => {
            NlmsStatus::Numerical
        }
        _ => NlmsStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (NlmsStatus, String)>) -> NlmsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NlmsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside nlms".into());
            NlmsStatus::Panic
        }
    }
}

fn lift<T>(r: nlms::Result<T>) -> Result<T, (NlmsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null() -> (NlmsStatus, String) {
    (NlmsStatus::NullPointer, "null pointer argument".into())
}

unsafe fn slice<'a>(ptr: *const f64, len: usize) -> Result<&'a [f64], (NlmsStatus, String)> {
    if ptr.is_null() {
        return if len == 0 { Ok(&[]) } else { Err(null()) };
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn graph<'a>(g: *const NlmsGraph) -> Result<&'a GraphFunction, (NlmsStatus, String)> {
    g.as_ref().map(|g| &g.0).ok_or_else(null)
}

fn config(s: f64, spacing: f64, exact: bool, max_iters: usize, tol_kkt: f64) -> Result<(KernelSpec, SolverConfig), (NlmsStatus, String)> {
    let spec = lift(FractionalOrder::new(s).and_then(|o| KernelSpec::new(o, spacing)))?;
    let mut cfg = SolverConfig { mode: if exact { SolverMode::ExactSet } else { SolverMode::Quadratic }, ..SolverConfig::default() };
    if max_iters > 0 {
        cfg.max_iters = max_iters;
    }
    if tol_kkt > 0.0 {
        cfg.tol_kkt = tol_kkt;
    }
    lift(cfg.validate())?;
    Ok((spec, cfg))
}

fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), (NlmsStatus, String)> {
    if out.is_null() {
        return Err(null());
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Copies the message of the last failure on this thread, NUL-terminated.
/// `needed` receives the buffer size required, terminator included.
///
/// # Safety
/// `buf` must point to `cap` writable bytes or be null with `cap == 0`.
#[no_mangle]
pub unsafe extern "C" fn nlms_last_error(buf: *mut c_char, cap: usize, needed: *mut usize) -> NlmsStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    let bytes = msg.as_bytes();
    if !needed.is_null() {
        *needed = bytes.len() + 1;
    }
    if cap < bytes.len() + 1 {
        return NlmsStatus::BufferTooSmall;
    }
    if buf.is_null() {
        return NlmsStatus::NullPointer;
    }
    std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
    *buf.add(bytes.len()) = 0;
    NlmsStatus::Ok
}

/// Creates a graph on `[-radius, radius]^dim` from `len` cell values in
/// row-major order. Outside the box the graph equals `exterior_value`.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nlms_graph_new(
    dim: usize,
    radius: f64,
    spacing: f64,
    values: *const f64,
    len: usize,
    exterior_value: f64,
    out: *mut *mut NlmsGraph,
) -> NlmsStatus {
    guard(|| {
        let v = slice(values, len)?.to_vec();
        let g = lift(GraphFunction::new(dim, radius, spacing, v, ExteriorSpec::flat(dim, exterior_value)))?;
        write_out(out, NlmsGraph(g))
    })
}

/// # Safety
/// `g` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nlms_graph_free(g: *mut NlmsGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live graph handle and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn nlms_graph_len(g: *const NlmsGraph, len: *mut usize) -> NlmsStatus {
    guard(|| {
        let g = graph(g)?;
        *len.as_mut().ok_or_else(null)? = g.len();
        Ok(())
    })
}

/// Copies the cell values into `buf`, which must hold `nlms_graph_len` doubles.
///
/// # Safety
/// `g` must be a live graph handle and `buf` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nlms_graph_values(g: *const NlmsGraph, buf: *mut f64, cap: usize) -> NlmsStatus {
    guard(|| {
        let g = graph(g)?;
        if cap < g.len() {
            return Err((NlmsStatus::BufferTooSmall, format!("need {} doubles", g.len())));
        }
        if buf.is_null() {
            return Err(null());
        }
        std::ptr::copy_nonoverlapping(g.values().as_ptr(), buf, g.len());
        Ok(())
    })
}

/// Fractional mean curvature of the subgraph of `g` at every cell, order `s`.
///
/// # Safety
/// `g` must be a live graph handle and `buf` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nlms_graph_curvature(g: *const NlmsGraph, s: f64, buf: *mut f64, cap: usize) -> NlmsStatus {
    guard(|| {
        let g = graph(g)?;
        if cap < g.len() {
            return Err((NlmsStatus::BufferTooSmall, format!("need {} doubles", g.len())));
        }
        let spec = lift(FractionalOrder::new(s).and_then(|o| KernelSpec::new(o, g.spacing())))?;
        let k = lift(GraphOperator::new(&spec, g).and_then(|op| op.curvature_all(g)))?;
        if buf.is_null() {
            return Err(null());
        }
        std::ptr::copy_nonoverlapping(k.as_ptr(), buf, k.len());
        Ok(())
    })
}

/// Minimizes the nonlocal graph energy plus `int f u` over `u >= phi`. The
/// exterior datum of `u` is that of `phi`. `f` may be null for zero forcing.
/// `exact` selects the graph s-perimeter instead of the quadratic model;
/// `max_iters == 0` and `tol_kkt <= 0` keep the defaults.
///
/// # Safety
/// Handles must be live or null where allowed; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nlms_solve_obstacle(
    phi: *const NlmsGraph,
    f: *const NlmsGraph,
    s: f64,
    exact: bool,
    max_iters: usize,
    tol_kkt: f64,
    out: *mut *mut NlmsReport,
) -> NlmsStatus {
    guard(|| {
        let phi = graph(phi)?;
        let zero;
        let f = match f.as_ref() {
            Some(f) => &f.0,
            None => {
                zero = lift(phi.with_values(vec![0.0; phi.len()]))?;
                &zero
            }
        };
        let (spec, cfg) = config(s, phi.spacing(), exact, max_iters, tol_kkt)?;
        let ext = phi.exterior().clone();
        let report = lift(solve_fractional_obstacle(&Obstacle::graph(phi.clone()), &ext, f, &spec, &cfg))?;
        write_out(out, NlmsReport(report))
    })
}

/// Solves the two-membranes problem with forcings `f` (nonlocal membrane)
/// and `g` (classical membrane); the exterior data of `u` and `v` are those
/// of `f` and `g`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nlms_solve_two_membranes(
    f: *const NlmsGraph,
    g: *const NlmsGraph,
    s: f64,
    exact: bool,
    max_iters: usize,
    tol_kkt: f64,
    out: *mut *mut NlmsReport,
) -> NlmsStatus {
    guard(|| {
        let (f, g) = (graph(f)?, graph(g)?);
        let (spec, cfg) = config(s, f.spacing(), exact, max_iters, tol_kkt)?;
        let problem = lift(MembraneProblem::new(f.exterior().clone(), g.exterior().clone(), f.clone(), g.clone()))?;
        let report = lift(solve_two_membranes(&problem, &spec, &cfg))?;
        write_out(out, NlmsReport(report))
    })
}

/// # Safety
/// `r` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nlms_report_free(r: *mut NlmsReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Convergence flag, iteration count and final energy of a solve.
///
/// # Safety
/// `r` must be a live report; each out pointer may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn nlms_report_summary(
    r: *const NlmsReport,
    converged: *mut bool,
    iterations: *mut usize,
    energy: *mut f64,
) -> NlmsStatus {
    guard(|| {
        let r = &r.as_ref().ok_or_else(null)?.0;
        if let Some(c) = converged.as_mut() {
            *c = r.converged;
        }
        if let Some(i) = iterations.as_mut() {
            *i = r.iterations;
        }
        if let Some(e) = energy.as_mut() {
            *e = r.final_energy();
        }
        Ok(())
    })
}

/// Returns a new handle to the solution graph: `u` when `which == 0`, `v`
/// (two-membranes only) when `which == 1`.
///
/// # Safety
/// `r` must be a live report; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nlms_report_graph(r: *const NlmsReport, which: u32, out: *mut *mut NlmsGraph) -> NlmsStatus {
    guard(|| {
        let r = &r.as_ref().ok_or_else(null)?.0;
        let g = match (which, r.graph(), r.pair()) {
            (0, Some(u), _) => u,
            (0, None, Some((u, _))) => u,
            (1, _, Some((_, v))) => v,
            _ => return Err((NlmsStatus::InvalidInput, format!("report has no graph number {which}"))),
        };
        write_out(out, NlmsGraph(g.clone()))
    })
}

/// Number of contact cells of a graph solve.
///
/// # Safety
/// `r` must be a live report and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn nlms_report_contact_count(r: *const NlmsReport, count: *mut usize) -> NlmsStatus {
    guard(|| {
        let r = &r.as_ref().ok_or_else(null)?.0;
        *count.as_mut().ok_or_else(null)? = r.contact.as_ref().map_or(0, |c| c.indices.len());
        Ok(())
    })
}

/// Runs an experiment config (TOML or JSON) like `nlms run`, writing the
/// artifacts below `output_dir` (the config's own directory setting when
/// null). Non-convergence and failed analyses give `NotConverged`.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `output_dir` may be null.
#[no_mangle]
pub unsafe extern "C" fn nlms_run_config(config_path: *const c_char, output_dir: *const c_char) -> NlmsStatus {
    guard(|| {
        let text = |p: *const c_char| -> Result<String, (NlmsStatus, String)> {
            CStr::from_ptr(p)
                .to_str()
                .map(str::to_string)
                .map_err(|_| (NlmsStatus::InvalidInput, "path is not UTF-8".into()))
        };
        if config_path.is_null() {
            return Err(null());
        }
        let (config, _, _) = lift(ExperimentConfig::load(Path::new(&text(config_path)?)))?;
        let dir = if output_dir.is_null() {
            config.output_dir.clone().unwrap_or_else(|| "out".into())
        } else {
            text(output_dir)?.into()
        };
        let mut out = lift(Artifacts::new(&dir))?;
        let result = lift(execute(&config, &mut out))?;
        if result.succeeded() {
            Ok(())
        } else {
            Err((NlmsStatus::NotConverged, result.errors.join("; ")))
        }
    })
}
