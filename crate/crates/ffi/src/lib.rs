// SPDX-License-Identifier: Apache-2.0

//! C interface to `switchsynth`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns an [`SsStatus`];
//! on failure [`ss_last_error`] describes the most recent error on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use switchsynth::artifact::{synthesize, Artifact};
use switchsynth::config::Config;
use switchsynth::runtime::verify::verify_artifact;
use switchsynth::runtime::{simulate, Outcome, Schedule, Trajectory};
use switchsynth::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Schema or value error in a config, artifact or schedule.
    Config = 3,
    Parse = 4,
    Io = 5,
    Dimension = 6,
    Model = 7,
    /// Synthesis could not produce a controller.
    Synthesis = 8,
    /// The state left the controlled domain or hit a missing table entry.
    Domain = 9,
    /// An output buffer is too small.
    BufferTooSmall = 10,
    IndexOutOfRange = 11,
    Panic = 99,
}

impl From<&Error> for SsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config { .. } => SsStatus::Config,
            Error::Parse(_) => SsStatus::Parse,
            Error::Io { .. } => SsStatus::Io,
            Error::Dimension { .. } => SsStatus::Dimension,
            Error::Model(_) => SsStatus::Model,
            Error::Refinement { .. } | Error::NoCommonLength { .. } | Error::Unbounded => {
                SsStatus::Synthesis
            }
            Error::OutOfDomain { .. } | Error::TableMiss { .. } => SsStatus::Domain,
        }
    }
}

/// A synthesized controller together with its system.
pub struct SsArtifact {
    inner: Artifact,
}

/// A simulated closed-loop trajectory.
pub struct SsTrajectory {
    inner: Trajectory,
    dim: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: SsStatus, msg: impl Into<String>) -> SsStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> SsStatus {
    let status = SsStatus::from(&e);
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> SsStatus) -> SsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SsStatus::Panic, "internal panic"),
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, SsStatus> {
    if p.is_null() {
        return Err(fail(SsStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(SsStatus::InvalidUtf8, "path is not valid UTF-8"))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> SsStatus {
    *out = Box::into_raw(Box::new(value));
    SsStatus::Ok
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ss_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads a config file and runs the synthesis it describes.
///
/// # Safety
/// `config_path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_artifact_synthesize(
    config_path: *const c_char,
    out: *mut *mut SsArtifact,
) -> SsStatus {
    guard(|| {
        if out.is_null() {
            return fail(SsStatus::NullPointer, "out is null");
        }
        let path = match path_arg(config_path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Config::load(&path).and_then(|c| synthesize(&c)) {
            Ok(inner) => put(out, SsArtifact { inner }),
            Err(e) => from_error(e),
        }
    })
}

/// Loads an artifact file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_artifact_load(
    path: *const c_char,
    out: *mut *mut SsArtifact,
) -> SsStatus {
    guard(|| {
        if out.is_null() {
            return fail(SsStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Artifact::load(&path) {
            Ok(inner) => put(out, SsArtifact { inner }),
            Err(e) => from_error(e),
        }
    })
}

/// Writes an artifact file.
///
/// # Safety
/// `art` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ss_artifact_save(art: *const SsArtifact, path: *const c_char) -> SsStatus {
    guard(|| {
        let Some(art) = art.as_ref() else {
            return fail(SsStatus::NullPointer, "artifact is null");
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match art.inner.save(&path) {
            Ok(()) => SsStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Releases an artifact. Null is ignored.
///
/// # Safety
/// `art` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ss_artifact_free(art: *mut SsArtifact) {
    if !art.is_null() {
        drop(Box::from_raw(art));
    }
}

/// Re-checks every certificate. Writes the number of checks and of
/// failures; returns `Ok` even when some checks fail.
///
/// # Safety
/// `art` must come from this library; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ss_artifact_verify(
    art: *const SsArtifact,
    checks: *mut usize,
    failures: *mut usize,
) -> SsStatus {
    guard(|| {
        let Some(art) = art.as_ref() else {
            return fail(SsStatus::NullPointer, "artifact is null");
        };
        if checks.is_null() || failures.is_null() {
            return fail(SsStatus::NullPointer, "out is null");
        }
        let report = verify_artifact(&art.inner);
        *checks = report.checks.len();
        *failures = report.failures().count();
        SsStatus::Ok
    })
}

/// State dimension, or 0 for null.
///
/// # Safety
/// `art` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn ss_artifact_dim(art: *const SsArtifact) -> usize {
    art.as_ref().map_or(0, |a| a.inner.system.dim())
}

/// Number of capture rings (the stability ring is not counted), or 0 for null.
///
/// # Safety
/// `art` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn ss_artifact_ring_count(art: *const SsArtifact) -> usize {
    art.as_ref().map_or(0, |a| a.inner.ring_count())
}

/// Sum of the ring extensions, or NaN for null.
///
/// # Safety
/// `art` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn ss_artifact_total_extension(art: *const SsArtifact) -> f64 {
    art.as_ref().map_or(f64::NAN, |a| a.inner.total_extension())
}

/// Copies the per-ring extensions, innermost first, into `out[0..len]`.
///
/// # Safety
/// `art` must come from this library and `out` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ss_artifact_extensions(
    art: *const SsArtifact,
    out: *mut f64,
    len: usize,
) -> SsStatus {
    guard(|| {
        let Some(art) = art.as_ref() else {
            return fail(SsStatus::NullPointer, "artifact is null");
        };
        let ext = art.inner.extensions();
        copy_out(&ext, out, len)
    })
}

/// Bounds of the capture set `S` into `lo[0..len]` and `hi[0..len]`.
///
/// # Safety
/// `art` must come from this library and both buffers hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ss_artifact_outer_box(
    art: *const SsArtifact,
    lo: *mut f64,
    hi: *mut f64,
    len: usize,
) -> SsStatus {
    guard(|| {
        let Some(art) = art.as_ref() else {
            return fail(SsStatus::NullPointer, "artifact is null");
        };
        let s = art.inner.outer_box();
        match copy_out(&s.lo(), lo, len) {
            SsStatus::Ok => copy_out(&s.hi(), hi, len),
            other => other,
        }
    })
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> SsStatus {
    if out.is_null() {
        return fail(SsStatus::NullPointer, "buffer is null");
    }
    if len < src.len() {
        return fail(
            SsStatus::BufferTooSmall,
            format!("need {} entries, got {len}", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    SsStatus::Ok
}

/// Simulates the closed loop from `x0[0..dim]` for `steps` steps.
/// `schedule_path` may be null (no perturbation).
///
/// # Safety
/// `art` must come from this library, `x0` hold `dim` doubles,
/// `schedule_path` be null or NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ss_simulate(
    art: *const SsArtifact,
    x0: *const f64,
    dim: usize,
    steps: usize,
    schedule_path: *const c_char,
    out: *mut *mut SsTrajectory,
) -> SsStatus {
    guard(|| {
        let Some(art) = art.as_ref() else {
            return fail(SsStatus::NullPointer, "artifact is null");
        };
        if x0.is_null() || out.is_null() {
            return fail(SsStatus::NullPointer, "x0 or out is null");
        }
        let schedule = if schedule_path.is_null() {
            Schedule::default()
        } else {
            match path_arg(schedule_path).map(|p| Schedule::load(&p)) {
                Ok(Ok(s)) => s,
                Ok(Err(e)) => return from_error(e),
                Err(s) => return s,
            }
        };
        let x0 = std::slice::from_raw_parts(x0, dim);
        match simulate(&art.inner, x0, steps, &schedule) {
            Ok(inner) => put(out, SsTrajectory { inner, dim }),
            Err(e) => from_error(e),
        }
    })
}

/// Releases a trajectory. Null is ignored.
///
/// # Safety
/// `traj` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_free(traj: *mut SsTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of recorded states (steps + 1 unless the run escaped), or 0 for null.
///
/// # Safety
/// `traj` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_len(traj: *const SsTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.steps.len())
}

/// Step at which the state escaped the controlled domain, or -1 if the
/// run completed (or `traj` is null).
///
/// # Safety
/// `traj` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_escape_step(traj: *const SsTrajectory) -> i64 {
    match traj.as_ref().map(|t| t.inner.outcome) {
        Some(Outcome::Escaped { step }) => step as i64,
        _ => -1,
    }
}

/// Copies state `index` into `out[0..len]` and, if `ring` is non-null,
/// the ring in charge at that step (0 = stability ring).
///
/// # Safety
/// `traj` must come from this library, `out` hold `len` doubles and
/// `ring` be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_state(
    traj: *const SsTrajectory,
    index: usize,
    out: *mut f64,
    len: usize,
    ring: *mut usize,
) -> SsStatus {
    guard(|| {
        let Some(t) = traj.as_ref() else {
            return fail(SsStatus::NullPointer, "trajectory is null");
        };
        let Some(step) = t.inner.steps.get(index) else {
            return fail(
                SsStatus::IndexOutOfRange,
                format!("index {index} out of {}", t.inner.steps.len()),
            );
        };
        debug_assert_eq!(step.x.len(), t.dim);
        let s = copy_out(&step.x, out, len);
        if s == SsStatus::Ok && !ring.is_null() {
            *ring = step.ring;
        }
        s
    })
}
