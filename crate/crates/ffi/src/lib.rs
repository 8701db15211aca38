//! C interface to the gasket quantum walk.
//!
//! A `GqwWalk` owns a gasket, its evolution operator and one walker state.
//! Every fallible function returns a `GqwStatus`; on failure the message is
//! kept per thread and can be fetched with `gqw_last_error_message`. Panics
//! never cross the boundary: they are reported as `GQW_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gasket_qw::{
    contains, fit_power_law, limiting, probability, stddev, Boundary, GasketSpec, LimitSource, QuantumWalk,
    QwError, Vertex, WalkerState,
};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GqwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownVertex = 3,
    CapExceeded = 4,
    BufferTooSmall = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GqwBoundary {
    Periodic = 0,
    Reflective = 1,
}

impl From<GqwBoundary> for Boundary {
    fn from(b: GqwBoundary) -> Self {
        match b {
            GqwBoundary::Periodic => Boundary::Periodic,
            GqwBoundary::Reflective => Boundary::Reflective,
        }
    }
}

/// Fitted `sigma = prefactor * t^exponent`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GqwPowerLaw {
    pub prefactor: f64,
    pub exponent: f64,
    pub residual: f64,
    pub points: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GqwStdDev {
    pub t: u64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma: f64,
}

/// Opaque walk handle.
pub struct GqwWalk {
    walk: QuantumWalk,
    state: WalkerState,
}

/// Largest generation accepted by `gqw_walk_new`.
pub const GQW_MAX_GENERATION: u32 = 12;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
}

fn fail(status: GqwStatus, message: impl Into<String>) -> GqwStatus {
    set_error(message);
    status
}

fn from_qw(e: QwError) -> GqwStatus {
    let status = match e {
        QwError::UnknownVertex { .. } => GqwStatus::UnknownVertex,
        QwError::DimensionCap { .. } => GqwStatus::CapExceeded,
        QwError::InvalidArgument(_) | QwError::Fit(_) => GqwStatus::InvalidArgument,
        _ => GqwStatus::Internal,
    };
    fail(status, e.to_string())
}

fn guard(body: impl FnOnce() -> GqwStatus) -> GqwStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => {
            if status == GqwStatus::Ok {
                set_error("");
            }
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(GqwStatus::Internal, format!("panic: {msg}"))
        }
    }
}

unsafe fn out_slice<'a, T>(ptr: *mut T, len: usize, need: usize) -> Result<&'a mut [T], GqwStatus> {
    if ptr.is_null() {
        return Err(fail(GqwStatus::NullPointer, "output buffer is null"));
    }
    if len < need {
        return Err(fail(
            GqwStatus::BufferTooSmall,
            format!("buffer holds {len} values, {need} required"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, need))
}

/// Create a walk on the generation-`generation` gasket. The walker starts in
/// the uniform coin state at the bottom-center vertex `(2^g, 0)`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn gqw_walk_new(generation: u32, boundary: GqwBoundary, out: *mut *mut GqwWalk) -> GqwStatus {
    guard(|| {
        if out.is_null() {
            return fail(GqwStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        if generation > GQW_MAX_GENERATION {
            return fail(
                GqwStatus::InvalidArgument,
                format!("generation {generation} exceeds {GQW_MAX_GENERATION}"),
            );
        }
        let spec = GasketSpec::new(generation, boundary.into());
        let walk = QuantumWalk::new(spec);
        let state = match walk.initial_state(spec.bottom_center()) {
            Ok(s) => s,
            Err(e) => return from_qw(e),
        };
        *out = Box::into_raw(Box::new(GqwWalk { walk, state }));
        GqwStatus::Ok
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `walk` must be null or a handle from `gqw_walk_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gqw_walk_free(walk: *mut GqwWalk) {
    if !walk.is_null() {
        drop(Box::from_raw(walk));
    }
}

/// Number of vertices, or 0 for a null handle.
///
/// # Safety
/// `walk` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gqw_walk_vertex_count(walk: *const GqwWalk) -> usize {
    walk.as_ref().map_or(0, |w| w.walk.graph().len())
}

/// Number of valid (vertex, direction) ports, or 0 for a null handle.
///
/// # Safety
/// `walk` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gqw_walk_port_count(walk: *const GqwWalk) -> usize {
    walk.as_ref().map_or(0, |w| w.walk.graph().port_count())
}

/// Steps taken since the last reset, or 0 for a null handle.
///
/// # Safety
/// `walk` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gqw_walk_time(walk: *const GqwWalk) -> u64 {
    walk.as_ref().map_or(0, |w| w.state.time())
}

/// Vertex coordinates in index order as `x0, y0, x1, y1, ...`; `len` counts
/// `int64_t` slots and must be at least twice the vertex count.
///
/// # Safety
/// `walk` must be a live handle and `xy` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn gqw_walk_vertices(walk: *const GqwWalk, xy: *mut i64, len: usize) -> GqwStatus {
    guard(|| {
        let Some(w) = walk.as_ref() else {
            return fail(GqwStatus::NullPointer, "walk is null");
        };
        let vertices = w.walk.graph().vertices();
        let out = match out_slice(xy, len, 2 * vertices.len()) {
            Ok(s) => s,
            Err(s) => return s,
        };
        for (pair, v) in out.chunks_exact_mut(2).zip(vertices) {
            pair[0] = v.x;
            pair[1] = v.y;
        }
        GqwStatus::Ok
    })
}

/// Restart from the uniform coin state at `(x, y)` with time 0.
///
/// # Safety
/// `walk` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gqw_walk_reset(walk: *mut GqwWalk, x: i64, y: i64) -> GqwStatus {
    guard(|| {
        let Some(w) = walk.as_mut() else {
            return fail(GqwStatus::NullPointer, "walk is null");
        };
        match w.walk.initial_state(Vertex::new(x, y)) {
            Ok(s) => {
                w.state = s;
                GqwStatus::Ok
            }
            Err(e) => from_qw(e),
        }
    })
}

/// Apply `steps` coin-then-shift steps.
///
/// # Safety
/// `walk` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gqw_walk_step(walk: *mut GqwWalk, steps: u64) -> GqwStatus {
    guard(|| {
        let Some(w) = walk.as_mut() else {
            return fail(GqwStatus::NullPointer, "walk is null");
        };
        for _ in 0..steps {
            if let Err(e) = w.walk.step(&mut w.state) {
                return from_qw(e);
            }
        }
        GqwStatus::Ok
    })
}

/// Per-vertex probabilities of the current state, in vertex index order.
///
/// # Safety
/// `walk` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gqw_walk_probabilities(walk: *const GqwWalk, out: *mut f64, len: usize) -> GqwStatus {
    guard(|| {
        let Some(w) = walk.as_ref() else {
            return fail(GqwStatus::NullPointer, "walk is null");
        };
        let buf = match out_slice(out, len, w.walk.graph().len()) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match probability(w.walk.graph(), &w.state) {
            Ok(p) => {
                buf.copy_from_slice(p.values());
                GqwStatus::Ok
            }
            Err(e) => from_qw(e),
        }
    })
}

/// Standard deviation of the current position distribution.
///
/// # Safety
/// `walk` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gqw_walk_stddev(walk: *const GqwWalk, out: *mut GqwStdDev) -> GqwStatus {
    guard(|| {
        let Some(w) = walk.as_ref() else {
            return fail(GqwStatus::NullPointer, "walk is null");
        };
        let Some(out) = out.as_mut() else {
            return fail(GqwStatus::NullPointer, "out is null");
        };
        match probability(w.walk.graph(), &w.state) {
            Ok(p) => {
                let s = stddev(&p);
                *out = GqwStdDev {
                    t: s.t,
                    sigma_x: s.sigma_x,
                    sigma_y: s.sigma_y,
                    sigma: s.sigma,
                };
                GqwStatus::Ok
            }
            Err(e) => from_qw(e),
        }
    })
}

/// Limiting distribution of the time-averaged walk started from the current
/// state. Uses the spectral decomposition when the port count is at most
/// `dense_cap`, otherwise the time average over `horizon` steps. `spectral`
/// (optional) receives whether the spectral route was taken.
///
/// # Safety
/// `walk` must be a live handle, `out` must point to `len` writable doubles,
/// and `spectral` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn gqw_walk_limiting(
    walk: *const GqwWalk,
    dense_cap: usize,
    horizon: u64,
    out: *mut f64,
    len: usize,
    spectral: *mut bool,
) -> GqwStatus {
    guard(|| {
        let Some(w) = walk.as_ref() else {
            return fail(GqwStatus::NullPointer, "walk is null");
        };
        if horizon == 0 {
            return fail(GqwStatus::InvalidArgument, "horizon must be at least 1");
        }
        let buf = match out_slice(out, len, w.walk.graph().len()) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match limiting(&w.walk, &w.state, dense_cap, horizon) {
            Ok((field, source)) => {
                buf.copy_from_slice(field.values());
                if let Some(flag) = spectral.as_mut() {
                    *flag = source == LimitSource::Spectral;
                }
                GqwStatus::Ok
            }
            Err(e) => from_qw(e),
        }
    })
}

/// Whether `(x, y)` lies on the generation-`generation` gasket.
#[no_mangle]
pub extern "C" fn gqw_contains(generation: u32, x: i64, y: i64) -> bool {
    contains(generation, x, y)
}

/// Least-squares fit of `y = a t^b` in log-log space over `t_min <= t <= t_max`.
///
/// # Safety
/// `t` and `y` must point to `n` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gqw_fit_power_law(
    t: *const f64,
    y: *const f64,
    n: usize,
    t_min: f64,
    t_max: f64,
    out: *mut GqwPowerLaw,
) -> GqwStatus {
    guard(|| {
        if t.is_null() || y.is_null() || out.is_null() {
            return fail(GqwStatus::NullPointer, "null input or output pointer");
        }
        let ts = std::slice::from_raw_parts(t, n);
        let ys = std::slice::from_raw_parts(y, n);
        let series: Vec<(f64, f64)> = ts.iter().copied().zip(ys.iter().copied()).collect();
        match fit_power_law(&series, (t_min, t_max)) {
            Ok(fit) => {
                *out = GqwPowerLaw {
                    prefactor: fit.prefactor,
                    exponent: fit.exponent,
                    residual: fit.residual,
                    points: fit.points,
                };
                GqwStatus::Ok
            }
            Err(e) => from_qw(e.into()),
        }
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn gqw_status_str(status: GqwStatus) -> *const c_char {
    let s: &'static CStr = match status {
        GqwStatus::Ok => c"ok",
        GqwStatus::NullPointer => c"null pointer",
        GqwStatus::InvalidArgument => c"invalid argument",
        GqwStatus::UnknownVertex => c"vertex not on the gasket",
        GqwStatus::CapExceeded => c"dimension cap exceeded",
        GqwStatus::BufferTooSmall => c"buffer too small",
        GqwStatus::Internal => c"internal error",
    };
    s.as_ptr()
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to fit). Returns the buffer size needed for the full message,
/// including the terminator. Passing a null `buf` only queries the size.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn gqw_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}
