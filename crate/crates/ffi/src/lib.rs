//! C ABI over `offload-core`.
//!
//! Objects are opaque heap handles created by `*_load`, `*_from_json` or the
//! solvers and released with the matching `*_free`. Every fallible call
//! returns an [`OffloadStatus`]; on failure a message is available from
//! [`offload_last_error`] on the same thread until the next call. Strings
//! returned through out-pointers are owned by the caller and released with
//! [`offload_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use offload_core::io;
use offload_core::parallel::{latency_recursion, solve_parallel_general};
use offload_core::quant::QuantGrid;
use offload_core::serial::{evaluate_serial, solve_serial_general};
use offload_core::{sim, CallGraph, ConcurrencyProfile, NodeId, OffloadError, PlatformProfile};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffloadStatus {
    Ok = 0,
    /// Malformed or invalid input (graph, profile, plan or argument).
    InvalidInput = 1,
    /// No plan meets the constraints, or the plan cannot finish.
    Infeasible = 2,
    /// The graph shape is not supported by the requested solver.
    Unsupported = 3,
    NullPointer = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

/// Opaque call graph.
pub struct OffloadGraph(CallGraph);

/// Opaque platform profile.
pub struct OffloadProfile(PlatformProfile);

/// Opaque offloading plan.
pub struct OffloadPlan(offload_core::OffloadPlan);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &OffloadError) -> OffloadStatus {
    match err.exit_code() {
        2 => OffloadStatus::Infeasible,
        3 => OffloadStatus::Unsupported,
        _ => OffloadStatus::InvalidInput,
    }
}

struct Null;

enum Failure {
    Core(OffloadError),
    Null,
}

impl From<OffloadError> for Failure {
    fn from(e: OffloadError) -> Self {
        Failure::Core(e)
    }
}

impl From<Null> for Failure {
    fn from(_: Null) -> Self {
        Failure::Null
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> OffloadStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OffloadStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null)) => {
            set_error("null pointer argument".into());
            OffloadStatus::NullPointer
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            OffloadStatus::Internal
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T) -> Result<&'a T, Null> {
    p.as_ref().ok_or(Null)
}

unsafe fn as_str<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null);
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| OffloadError::InvalidArgument("string is not UTF-8".into()).into())
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Null> {
    if out.is_null() {
        return Err(Null);
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn offload_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn offload_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a graph from JSON text. The graph is checked for validity.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn offload_graph_from_json(json: *const c_char, out: *mut *mut OffloadGraph) -> OffloadStatus {
    guard(|| {
        let g = io::parse_graph(as_str(json)?)?;
        g.ensure_valid()?;
        put(out, boxed(OffloadGraph(g)))?;
        Ok(())
    })
}

/// Loads and validates a graph file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn offload_graph_load(path: *const c_char, out: *mut *mut OffloadGraph) -> OffloadStatus {
    guard(|| {
        let g = io::load_graph(Path::new(as_str(path)?))?;
        g.ensure_valid()?;
        put(out, boxed(OffloadGraph(g)))?;
        Ok(())
    })
}

/// Number of nodes, or 0 for NULL.
///
/// # Safety
/// `graph` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn offload_graph_node_count(graph: *const OffloadGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.node_count())
}

/// # Safety
/// `graph` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn offload_graph_free(graph: *mut OffloadGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Parses a platform profile from JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn offload_profile_from_json(
    json: *const c_char,
    out: *mut *mut OffloadProfile,
) -> OffloadStatus {
    guard(|| {
        let p = io::parse_profile(as_str(json)?)?;
        put(out, boxed(OffloadProfile(p)))?;
        Ok(())
    })
}

/// Loads a platform profile file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn offload_profile_load(path: *const c_char, out: *mut *mut OffloadProfile) -> OffloadStatus {
    guard(|| {
        let p = io::load_profile(Path::new(as_str(path)?))?;
        put(out, boxed(OffloadProfile(p)))?;
        Ok(())
    })
}

/// The built-in default profile.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn offload_profile_default(out: *mut *mut OffloadProfile) -> OffloadStatus {
    guard(|| {
        put(out, boxed(OffloadProfile(offload_core::fixtures::paper_profile())))?;
        Ok(())
    })
}

/// # Safety
/// `profile` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn offload_profile_free(profile: *mut OffloadProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Parses a plan (`{"decisions": {...}, "powers": {...}}`) for `graph`.
///
/// # Safety
/// `graph` must be a live handle, `json` a nul-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn offload_plan_from_json(
    graph: *const OffloadGraph,
    json: *const c_char,
    out: *mut *mut OffloadPlan,
) -> OffloadStatus {
    guard(|| {
        let g = as_ref(graph)?;
        let plan = io::parse_plan(as_str(json)?, &g.0)?;
        put(out, boxed(OffloadPlan(plan)))?;
        Ok(())
    })
}

/// Serializes a plan to JSON. Free the result with `offload_string_free`.
///
/// # Safety
/// `plan` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn offload_plan_to_json(plan: *const OffloadPlan, out: *mut *mut c_char) -> OffloadStatus {
    guard(|| {
        let plan = as_ref(plan)?;
        let text = CString::new(io::plan_to_json(&plan.0)).expect("JSON has no nul");
        put(out, text.into_raw())?;
        Ok(())
    })
}

/// Whether node `id` (1-based) runs remotely.
///
/// # Safety
/// `plan` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn offload_plan_is_offloaded(plan: *const OffloadPlan, id: u32, out: *mut bool) -> OffloadStatus {
    guard(|| {
        let plan = as_ref(plan)?;
        if id == 0 || id as usize > plan.0.offloaded.len() {
            return Err(OffloadError::UnknownNode(NodeId(id)).into());
        }
        put(out, plan.0.is_offloaded(id as usize - 1))?;
        Ok(())
    })
}

/// # Safety
/// `plan` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn offload_plan_free(plan: *mut OffloadPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Minimizes E + lambda L under serial execution. `out_objective` may be
/// NULL.
///
/// # Safety
/// Handles must be live; `out_plan` must be writable.
#[no_mangle]
pub unsafe extern "C" fn offload_solve_serial(
    graph: *const OffloadGraph,
    profile: *const OffloadProfile,
    lambda: f64,
    out_plan: *mut *mut OffloadPlan,
    out_objective: *mut f64,
) -> OffloadStatus {
    guard(|| {
        let (g, p) = (as_ref(graph)?, as_ref(profile)?);
        if out_plan.is_null() {
            return Err(Failure::Null);
        }
        let sol = solve_serial_general(&g.0, &p.0, lambda)?;
        if !out_objective.is_null() {
            out_objective.write(sol.objective);
        }
        out_plan.write(boxed(OffloadPlan(sol.plan)));
        Ok(())
    })
}

/// Minimum planning energy subject to latency <= `lmax` under parallel
/// execution with `conc` concurrent streams and tasks of each kind, on a
/// grid of step `eps`. `out_energy` may be NULL.
///
/// # Safety
/// Handles must be live; `out_plan` must be writable.
#[no_mangle]
pub unsafe extern "C" fn offload_solve_parallel(
    graph: *const OffloadGraph,
    profile: *const OffloadProfile,
    conc: u32,
    lmax: f64,
    eps: f64,
    out_plan: *mut *mut OffloadPlan,
    out_energy: *mut f64,
) -> OffloadStatus {
    guard(|| {
        let (g, p) = (as_ref(graph)?, as_ref(profile)?);
        if out_plan.is_null() {
            return Err(Failure::Null);
        }
        let grid = QuantGrid::new(lmax, eps)?;
        let sol = solve_parallel_general(&g.0, &p.0, &ConcurrencyProfile::uniform(conc), &grid)?;
        if !out_energy.is_null() {
            out_energy.write(sol.energy);
        }
        out_plan.write(boxed(OffloadPlan(sol.plan)));
        Ok(())
    })
}

/// Energy and latency of a plan under serial execution.
///
/// # Safety
/// Handles must be live; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn offload_evaluate_serial(
    graph: *const OffloadGraph,
    profile: *const OffloadProfile,
    plan: *const OffloadPlan,
    out_energy: *mut f64,
    out_latency: *mut f64,
) -> OffloadStatus {
    guard(|| {
        let (g, p, plan) = (as_ref(graph)?, as_ref(profile)?, as_ref(plan)?);
        if out_energy.is_null() || out_latency.is_null() {
            return Err(Failure::Null);
        }
        let el = evaluate_serial(&g.0, &p.0, &plan.0)?;
        out_energy.write(el.energy);
        out_latency.write(el.latency);
        Ok(())
    })
}

/// Completion time of the root under parallel execution; +inf when an
/// uplink has zero power.
///
/// # Safety
/// Handles must be live; `out_latency` must be writable.
#[no_mangle]
pub unsafe extern "C" fn offload_latency_recursion(
    graph: *const OffloadGraph,
    profile: *const OffloadProfile,
    plan: *const OffloadPlan,
    conc: u32,
    out_latency: *mut f64,
) -> OffloadStatus {
    guard(|| {
        let (g, p, plan) = (as_ref(graph)?, as_ref(profile)?, as_ref(plan)?);
        let l = latency_recursion(&g.0, &p.0, &ConcurrencyProfile::uniform(conc), &plan.0)?;
        put(out_latency, l)?;
        Ok(())
    })
}

/// Fixed-step simulation of the plan; energy and latency upper bounds.
///
/// # Safety
/// Handles must be live; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn offload_simulate(
    graph: *const OffloadGraph,
    profile: *const OffloadProfile,
    plan: *const OffloadPlan,
    eps_d: f64,
    out_energy: *mut f64,
    out_latency: *mut f64,
) -> OffloadStatus {
    guard(|| {
        let (g, p, plan) = (as_ref(graph)?, as_ref(profile)?, as_ref(plan)?);
        if out_energy.is_null() || out_latency.is_null() {
            return Err(Failure::Null);
        }
        let run = sim::run(&g.0, &p.0, &plan.0, eps_d)?;
        out_energy.write(run.energy);
        out_latency.write(run.latency);
        Ok(())
    })
}
