//! C ABI over the `planewave` crate.
//!
//! Every function returns a [`PwStatus`]. On failure the message is kept per
//! thread and can be copied out with [`pw_last_error_message`]. Handles are
//! opaque and must be released with their `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use planewave::dynamics::{Model, Trajectory};
use planewave::electromagnetics::line_momentum;
use planewave::io::parse_case;
use planewave::modal::{damping_ratio, prony_fit, PronyMode, TimeSeries};
use planewave::scenarios::{load_benchmark, measure_rocof, reference_kappa, CaseDefinition};
use planewave::{Error, ErrorClass};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwStatus {
    Ok = 0,
    /// Invalid input, case or argument.
    Validation = 2,
    /// Non-convergence, blow-up or degenerate data.
    Numerical = 3,
    Io = 4,
    NullPointer = 5,
    /// Internal panic caught at the boundary.
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwModel {
    PlaneWave = 0,
    Classical = 1,
}

/// One identified mode. `omega` is non-negative; conjugate pairs appear once.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwMode {
    pub sigma: f64,
    pub omega: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub energy: f64,
    /// NaN for a zero eigenvalue.
    pub damping_ratio: f64,
}

pub struct PwCase(CaseDefinition);
pub struct PwTrajectory(Trajectory);
pub struct PwModes(Vec<PronyMode>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(e: Error) -> PwStatus {
    set_error(e.to_string());
    match e.class() {
        ErrorClass::Validation => PwStatus::Validation,
        ErrorClass::Numerical => PwStatus::Numerical,
        ErrorClass::Io => PwStatus::Io,
    }
}

fn null(what: &str) -> PwStatus {
    set_error(format!("null pointer: {what}"));
    PwStatus::NullPointer
}

fn guard(f: impl FnOnce() -> PwStatus) -> PwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == PwStatus::Ok {
                set_error(String::new());
            }
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            PwStatus::Internal
        }
    }
}

unsafe fn cstr<'a>(p: *const c_char) -> Option<&'a str> {
    if p.is_null() {
        None
    } else {
        CStr::from_ptr(p).to_str().ok()
    }
}

/// Copies the calling thread's last error message into `buf` with a
/// terminating NUL, truncating to `len - 1` bytes. Returns the full message
/// length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pw_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Loads an embedded benchmark (`"wscc9"` or `"ne39"`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pw_case_load_benchmark(
    name: *const c_char,
    out: *mut *mut PwCase,
) -> PwStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let Some(name) = cstr(name) else {
            return null("name");
        };
        match load_benchmark(name) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(PwCase(c)));
                PwStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Parses a TOML case file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pw_case_parse_file(
    path: *const c_char,
    out: *mut *mut PwCase,
) -> PwStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let Some(path) = cstr(path) else {
            return null("path");
        };
        match parse_case(path) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(PwCase(c)));
                PwStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `case` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn pw_case_free(case: *mut PwCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}

/// # Safety
/// `case` must be a live handle and `buses`, `generators` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pw_case_size(
    case: *const PwCase,
    buses: *mut usize,
    generators: *mut usize,
) -> PwStatus {
    guard(|| {
        let Some(c) = case.as_ref() else {
            return null("case");
        };
        if buses.is_null() || generators.is_null() {
            return null("out");
        }
        *buses = c.0.network.bus_count();
        *generators = c.0.generators.len();
        PwStatus::Ok
    })
}

/// Sets every synchronous machine to inertia constant `h` seconds.
///
/// # Safety
/// `case` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pw_case_set_inertia(case: *mut PwCase, h: f64) -> PwStatus {
    guard(|| {
        let Some(c) = case.as_mut() else {
            return null("case");
        };
        if !(h >= 0.0 && h.is_finite()) {
            return fail(Error::Argument(format!(
                "inertia constant must be non-negative, got {h}"
            )));
        }
        c.0 = c.0.with_inertia(h);
        PwStatus::Ok
    })
}

/// Simulates the case with its own events. `horizon <= 0` uses the case horizon.
///
/// # Safety
/// `case` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pw_simulate(
    case: *const PwCase,
    model: PwModel,
    horizon: f64,
    out: *mut *mut PwTrajectory,
) -> PwStatus {
    guard(|| {
        let Some(c) = case.as_ref() else {
            return null("case");
        };
        if out.is_null() {
            return null("out");
        }
        let c = &c.0;
        let model = match model {
            PwModel::PlaneWave => Model::PlaneWave,
            PwModel::Classical => Model::Classical,
        };
        let horizon = if horizon > 0.0 {
            horizon
        } else {
            c.options.horizon
        };
        let run = c
            .kappa()
            .and_then(|k| c.simulate(model, c.setup(k), &c.events, horizon));
        match run {
            Ok(t) => {
                *out = Box::into_raw(Box::new(PwTrajectory(t)));
                PwStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `traj` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn pw_trajectory_free(traj: *mut PwTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// # Safety
/// `traj` must be a live handle and `samples`, `nodes` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pw_trajectory_size(
    traj: *const PwTrajectory,
    samples: *mut usize,
    nodes: *mut usize,
) -> PwStatus {
    guard(|| {
        let Some(t) = traj.as_ref() else {
            return null("traj");
        };
        if samples.is_null() || nodes.is_null() {
            return null("out");
        }
        *samples = t.0.len();
        *nodes = t.0.node_count();
        PwStatus::Ok
    })
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> PwStatus {
    if buf.is_null() {
        return null("buf");
    }
    if len < src.len() {
        return fail(Error::Argument(format!(
            "buffer holds {len} values, {} needed",
            src.len()
        )));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    PwStatus::Ok
}

/// Copies the sample times (s) into `buf`, which holds `len` doubles.
///
/// # Safety
/// `traj` must be a live handle and `buf` point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pw_trajectory_times(
    traj: *const PwTrajectory,
    buf: *mut f64,
    len: usize,
) -> PwStatus {
    guard(|| match traj.as_ref() {
        Some(t) => copy_out(&t.0.times, buf, len),
        None => null("traj"),
    })
}

/// Copies the frequency deviation (rad/s) of `node` into `buf`.
///
/// # Safety
/// `traj` must be a live handle and `buf` point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pw_trajectory_omega(
    traj: *const PwTrajectory,
    node: usize,
    buf: *mut f64,
    len: usize,
) -> PwStatus {
    guard(|| {
        let Some(t) = traj.as_ref() else {
            return null("traj");
        };
        match t.0.omega.get(node) {
            Some(s) => copy_out(s, buf, len),
            None => fail(Error::Argument(format!("node {node} out of range"))),
        }
    })
}

/// Copies the internal voltage magnitude (pu) of `node` into `buf`.
///
/// # Safety
/// `traj` must be a live handle and `buf` point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pw_trajectory_voltage(
    traj: *const PwTrajectory,
    node: usize,
    buf: *mut f64,
    len: usize,
) -> PwStatus {
    guard(|| {
        let Some(t) = traj.as_ref() else {
            return null("traj");
        };
        match t.0.v.get(node) {
            Some(s) => copy_out(s, buf, len),
            None => fail(Error::Argument(format!("node {node} out of range"))),
        }
    })
}

/// Center-of-inertia ROCOF in Hz/s after `event_time`.
///
/// # Safety
/// `traj` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pw_measure_rocof(
    traj: *const PwTrajectory,
    event_time: f64,
    window: f64,
    out: *mut f64,
) -> PwStatus {
    guard(|| {
        let Some(t) = traj.as_ref() else {
            return null("traj");
        };
        if out.is_null() {
            return null("out");
        }
        match measure_rocof(&t.0, event_time, window) {
            Ok(r) => {
                *out = r.hz_per_s;
                PwStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// The reference momentum constant.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pw_reference_kappa(out: *mut f64) -> PwStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match reference_kappa() {
            Ok(k) => {
                *out = k;
                PwStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Physical line momentum in kg m/s for `flow_pu` apparent power on
/// `base_mva` over `length_m`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pw_line_momentum(
    flow_pu: f64,
    length_m: f64,
    base_mva: f64,
    out: *mut f64,
) -> PwStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let flow = planewave::C64::new(flow_pu, 0.0);
        match line_momentum(0, (0, 1), flow, length_m, base_mva, 0.0) {
            Ok(m) => {
                *out = m.physical;
                PwStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Prony fit of `n` uniformly sampled values.
///
/// # Safety
/// `samples` must point to `n` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pw_prony_fit(
    samples: *const f64,
    n: usize,
    dt: f64,
    order: usize,
    out: *mut *mut PwModes,
) -> PwStatus {
    guard(|| {
        if samples.is_null() {
            return null("samples");
        }
        if out.is_null() {
            return null("out");
        }
        let data = std::slice::from_raw_parts(samples, n).to_vec();
        match TimeSeries::new(dt, data, "signal").and_then(|s| prony_fit(&s, order)) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(PwModes(m)));
                PwStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `modes` must be a live handle and `count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pw_modes_count(modes: *const PwModes, count: *mut usize) -> PwStatus {
    guard(|| {
        let Some(m) = modes.as_ref() else {
            return null("modes");
        };
        if count.is_null() {
            return null("count");
        }
        *count = m.0.len();
        PwStatus::Ok
    })
}

/// # Safety
/// `modes` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pw_modes_get(
    modes: *const PwModes,
    index: usize,
    out: *mut PwMode,
) -> PwStatus {
    guard(|| {
        let Some(m) = modes.as_ref() else {
            return null("modes");
        };
        if out.is_null() {
            return null("out");
        }
        let Some(mode) = m.0.get(index) else {
            return fail(Error::Argument(format!("mode {index} out of range")));
        };
        *out = PwMode {
            sigma: mode.sigma,
            omega: mode.omega,
            amplitude: mode.amplitude,
            phase: mode.phase,
            energy: mode.energy,
            damping_ratio: damping_ratio(mode).unwrap_or(f64::NAN),
        };
        PwStatus::Ok
    })
}

/// # Safety
/// `modes` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn pw_modes_free(modes: *mut PwModes) {
    if !modes.is_null() {
        drop(Box::from_raw(modes));
    }
}
