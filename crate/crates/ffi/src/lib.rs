//! C ABI over the scrutinator pipeline.
//!
//! Objects cross the boundary as opaque handles created by `scr_*` functions
//! and released by the matching `*_free`. Fallible calls return a
//! [`ScrStatus`] and write their result through an out-pointer; on failure
//! the message is available from [`scr_last_error_message`] on the same
//! thread. Strings returned to the caller are owned by it and must be
//! released with [`scr_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use scrutinator::analyzer::{analyze_trace, AnalysisConfig, AnalysisResult};
use scrutinator::catalog::DeviceProfile;
use scrutinator::cross_app::{detect_shared_identifiers, SharedIdFinding};
use scrutinator::error::{Error, ExitClass};
use scrutinator::party::TrackerList;
use scrutinator::report::{aggregate_stats, StatsInput};
use scrutinator::trace::{parse_trace, EventTrace};

/// Result of a fallible call. The first four values match the command-line
/// exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScrStatus {
    Ok = 0,
    Usage = 1,
    InputFormat = 2,
    Internal = 3,
    NullArgument = 4,
    InvalidUtf8 = 5,
    Panic = 6,
}

pub struct ScrProfile {
    inner: DeviceProfile,
}

pub struct ScrTrackers {
    inner: TrackerList,
}

pub struct ScrTrace {
    inner: EventTrace,
}

pub struct ScrAnalysis {
    result: AnalysisResult,
    shared: Vec<SharedIdFinding>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: ScrStatus, msg: impl Into<String>) -> ScrStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> ScrStatus {
    let status = match e.exit_class() {
        ExitClass::Success => ScrStatus::Ok,
        ExitClass::Usage => ScrStatus::Usage,
        ExitClass::InputFormat => ScrStatus::InputFormat,
        ExitClass::Internal => ScrStatus::Internal,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning a panic into [`ScrStatus::Panic`].
fn guard(f: impl FnOnce() -> ScrStatus) -> ScrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(ScrStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, ScrStatus> {
    if p.is_null() {
        return Err(fail(ScrStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ScrStatus::InvalidUtf8, "argument is not UTF-8"))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> ScrStatus {
    *out = Box::into_raw(Box::new(value));
    ScrStatus::Ok
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> ScrStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            ScrStatus::Ok
        }
        Err(_) => fail(ScrStatus::Internal, "output contains a NUL byte"),
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(ScrStatus::NullArgument, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn scr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next `scr_*` call on the same thread.
#[no_mangle]
pub extern "C" fn scr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a device profile JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn scr_profile_from_json(json: *const c_char, out: *mut *mut ScrProfile) -> ScrStatus {
    guard(|| {
        non_null!(out);
        let json = match text(json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match DeviceProfile::from_json(json) {
            Ok(inner) => put(out, ScrProfile { inner }),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `profile` must be NULL or a handle from [`scr_profile_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scr_profile_free(profile: *mut ScrProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// The tracker list shipped with the library.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn scr_trackers_bundled(out: *mut *mut ScrTrackers) -> ScrStatus {
    guard(|| {
        non_null!(out);
        put(
            out,
            ScrTrackers {
                inner: TrackerList::bundled(),
            },
        )
    })
}

/// Parses a tracker list: one host per line, `#` comments.
///
/// # Safety
/// `list` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn scr_trackers_from_text(list: *const c_char, out: *mut *mut ScrTrackers) -> ScrStatus {
    guard(|| {
        non_null!(out);
        let list = match text(list) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match TrackerList::parse(list) {
            Ok(inner) => put(out, ScrTrackers { inner }),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `trackers` must be NULL or a live tracker handle.
#[no_mangle]
pub unsafe extern "C" fn scr_trackers_free(trackers: *mut ScrTrackers) {
    if !trackers.is_null() {
        drop(Box::from_raw(trackers));
    }
}

/// Parses an NDJSON trace from `len` bytes at `data`. Malformed lines are
/// skipped and counted; see [`scr_trace_warning_count`].
///
/// # Safety
/// `data` must point to `len` readable bytes (it may be NULL when `len` is 0)
/// and `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn scr_trace_parse(data: *const u8, len: usize, out: *mut *mut ScrTrace) -> ScrStatus {
    guard(|| {
        non_null!(out);
        if data.is_null() && len > 0 {
            return fail(ScrStatus::NullArgument, "`data` is null");
        }
        let bytes = if len == 0 { &[][..] } else { std::slice::from_raw_parts(data, len) };
        match parse_trace(bytes) {
            Ok(inner) => put(out, ScrTrace { inner }),
            Err(e) => from_error(e),
        }
    })
}

/// Number of events in the trace; 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn scr_trace_event_count(trace: *const ScrTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.inner.len())
}

/// Number of lines skipped while parsing; 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn scr_trace_warning_count(trace: *const ScrTrace) -> u64 {
    trace.as_ref().map_or(0, |t| t.inner.warning_count())
}

/// # Safety
/// `trace` must be NULL or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn scr_trace_free(trace: *mut ScrTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Analyzes a trace. `trackers` may be NULL for the bundled list,
/// `workers` 0 uses one thread per core and `max_depth` 0 keeps the default
/// chain depth.
///
/// # Safety
/// `trace` and `profile` must be live handles, `trackers` NULL or a live
/// handle, and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn scr_analyze(
    trace: *const ScrTrace,
    profile: *const ScrProfile,
    trackers: *const ScrTrackers,
    workers: usize,
    max_depth: usize,
    out: *mut *mut ScrAnalysis,
) -> ScrStatus {
    guard(|| {
        non_null!(trace, profile, out);
        let (trace, profile) = (&(*trace).inner, &(*profile).inner);
        let bundled;
        let trackers = match trackers.as_ref() {
            Some(t) => &t.inner,
            None => {
                bundled = TrackerList::bundled();
                &bundled
            }
        };
        let mut config = match AnalysisConfig::from_env() {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        config.workers = workers;
        if max_depth > 0 {
            config.max_depth = max_depth;
        }
        match analyze_trace(trace, profile, trackers, &config) {
            Ok(mut result) => {
                for (k, v) in trace.warnings() {
                    *result.warnings.entry(k.clone()).or_insert(0) += v;
                }
                let shared = detect_shared_identifiers(trace, &result);
                put(out, ScrAnalysis { result, shared })
            }
            Err(e) => from_error(e),
        }
    })
}

/// Total number of findings over all apps; 0 for NULL.
///
/// # Safety
/// `analysis` must be NULL or a live analysis handle.
#[no_mangle]
pub unsafe extern "C" fn scr_analysis_finding_count(analysis: *const ScrAnalysis) -> usize {
    analysis.as_ref().map_or(0, |a| a.result.findings().count())
}

/// Per-app findings as a JSON document.
///
/// # Safety
/// `analysis` must be a live handle and `out` a writable pointer. The string
/// written to `out` must be released with [`scr_string_free`].
#[no_mangle]
pub unsafe extern "C" fn scr_analysis_to_json(analysis: *const ScrAnalysis, out: *mut *mut c_char) -> ScrStatus {
    guard(|| {
        non_null!(analysis, out);
        match serde_json::to_string_pretty(&(*analysis).result) {
            Ok(s) => put_string(out, s),
            Err(e) => fail(ScrStatus::Internal, e.to_string()),
        }
    })
}

/// Aggregate statistics of an analysis as a JSON document.
///
/// # Safety
/// As for [`scr_analysis_to_json`].
#[no_mangle]
pub unsafe extern "C" fn scr_stats_json(analysis: *const ScrAnalysis, out: *mut *mut c_char) -> ScrStatus {
    guard(|| {
        non_null!(analysis, out);
        let a = &*analysis;
        let stats = match StatsInput::from_analysis(&a.result, &a.shared).and_then(|i| aggregate_stats(&i)) {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        match serde_json::to_string_pretty(&stats) {
            Ok(s) => put_string(out, s),
            Err(e) => fail(ScrStatus::Internal, e.to_string()),
        }
    })
}

/// # Safety
/// `analysis` must be NULL or a live analysis handle.
#[no_mangle]
pub unsafe extern "C" fn scr_analysis_free(analysis: *mut ScrAnalysis) {
    if !analysis.is_null() {
        drop(Box::from_raw(analysis));
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a string returned by an `scr_*` function and not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn scr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn message() -> String {
        unsafe { CStr::from_ptr(scr_last_error_message()) }
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn panics_become_status() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, ScrStatus::Panic);
        assert_eq!(message(), "panic: boom");
    }

    #[test]
    fn success_clears_previous_error() {
        fail(ScrStatus::Internal, "stale");
        assert_eq!(guard(|| ScrStatus::Ok), ScrStatus::Ok);
        assert!(scr_last_error_message().is_null());
    }

    #[test]
    fn interior_nul_does_not_lose_message() {
        set_error("a\0b");
        assert_eq!(message(), "a b");
    }

    #[test]
    fn status_codes_follow_exit_classes() {
        assert_eq!(from_error(Error::Usage("x".into())), ScrStatus::Usage);
        assert_eq!(from_error(Error::Invariant("x".into())), ScrStatus::Internal);
        assert_eq!(from_error(Error::Config("x".into())), ScrStatus::InputFormat);
    }
}
