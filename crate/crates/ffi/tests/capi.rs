//! Drives the library through its C entry points only.

use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use scrutinator::analyzer::{analyze_trace, AnalysisConfig};
use scrutinator::catalog::DeviceProfile;
use scrutinator::cross_app::detect_shared_identifiers;
use scrutinator::party::TrackerList;
use scrutinator::report::{aggregate_stats, StatsInput};
use scrutinator::synth::manifest::LeakManifest;
use scrutinator::synth::{synthesize_trace, SynthConfig};
use scrutinator_ffi::*;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/fixtures")
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixtures().join(name)).unwrap()
}

fn last_error() -> String {
    let p = scr_last_error_message();
    assert!(!p.is_null(), "no error message recorded");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    scr_string_free(s);
    out
}

fn fixture_trace(platform: &str) -> (String, String) {
    let profile_json = read(&format!("{platform}_profile.json"));
    let manifest = LeakManifest::from_json(&read(&format!("{platform}_manifest.json"))).unwrap();
    let profile = DeviceProfile::from_json(&profile_json).unwrap();
    let (trace, _) = synthesize_trace(&manifest, &profile, 11, &SynthConfig::default()).unwrap();
    (profile_json, trace.to_ndjson())
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(scr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn stats_through_c_abi_match_library() {
    let (profile_json, ndjson) = fixture_trace("android");

    let profile_rs = DeviceProfile::from_json(&profile_json).unwrap();
    let trace_rs = scrutinator::trace::parse_trace(ndjson.as_bytes()).unwrap();
    let result = analyze_trace(&trace_rs, &profile_rs, &TrackerList::bundled(), &AnalysisConfig::default()).unwrap();
    let shared = detect_shared_identifiers(&trace_rs, &result);
    let expected = aggregate_stats(&StatsInput::from_analysis(&result, &shared).unwrap()).unwrap();
    let expected = serde_json::to_value(&expected).unwrap();

    unsafe {
        let c_profile = CString::new(profile_json).unwrap();
        let mut profile = ptr::null_mut();
        assert_eq!(scr_profile_from_json(c_profile.as_ptr(), &mut profile), ScrStatus::Ok);
        let mut trace = ptr::null_mut();
        assert_eq!(scr_trace_parse(ndjson.as_ptr(), ndjson.len(), &mut trace), ScrStatus::Ok);
        assert_eq!(scr_trace_event_count(trace), trace_rs.len());
        assert_eq!(scr_trace_warning_count(trace), 0);

        let mut analysis = ptr::null_mut();
        assert_eq!(scr_analyze(trace, profile, ptr::null(), 2, 0, &mut analysis), ScrStatus::Ok);
        assert_eq!(scr_analysis_finding_count(analysis), result.findings().count());

        let mut s = ptr::null_mut();
        assert_eq!(scr_stats_json(analysis, &mut s), ScrStatus::Ok);
        let stats: serde_json::Value = serde_json::from_str(&take(s)).unwrap();
        assert_eq!(stats, expected);

        assert_eq!(scr_analysis_to_json(analysis, &mut s), ScrStatus::Ok);
        let doc: serde_json::Value = serde_json::from_str(&take(s)).unwrap();
        assert_eq!(doc, serde_json::to_value(&result).unwrap());

        scr_analysis_free(analysis);
        scr_trace_free(trace);
        scr_profile_free(profile);
    }
}

#[test]
fn custom_tracker_list_changes_parties() {
    let (profile_json, ndjson) = fixture_trace("ios");
    unsafe {
        let c_profile = CString::new(profile_json).unwrap();
        let (mut profile, mut trace) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(scr_profile_from_json(c_profile.as_ptr(), &mut profile), ScrStatus::Ok);
        assert_eq!(scr_trace_parse(ndjson.as_ptr(), ndjson.len(), &mut trace), ScrStatus::Ok);

        let stats = |trackers: *const ScrTrackers| {
            let mut analysis = ptr::null_mut();
            assert_eq!(scr_analyze(trace, profile, trackers, 1, 0, &mut analysis), ScrStatus::Ok);
            let mut s = ptr::null_mut();
            assert_eq!(scr_stats_json(analysis, &mut s), ScrStatus::Ok);
            scr_analysis_free(analysis);
            serde_json::from_str::<serde_json::Value>(&take(s)).unwrap()
        };

        let mut bundled = ptr::null_mut();
        assert_eq!(scr_trackers_bundled(&mut bundled), ScrStatus::Ok);
        let empty_list = CString::new("# nothing\n").unwrap();
        let mut empty = ptr::null_mut();
        assert_eq!(scr_trackers_from_text(empty_list.as_ptr(), &mut empty), ScrStatus::Ok);

        let with_bundled = stats(bundled);
        assert_eq!(stats(ptr::null()), with_bundled);
        assert_ne!(stats(empty), with_bundled);

        scr_trackers_free(bundled);
        scr_trackers_free(empty);
        scr_trace_free(trace);
        scr_profile_free(profile);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut profile = ptr::null_mut();
        assert_eq!(scr_profile_from_json(ptr::null(), &mut profile), ScrStatus::NullArgument);
        assert!(profile.is_null());
        assert!(!last_error().is_empty());

        let bad = CString::new(r#"{"platform":"android","identifiers":{}}"#).unwrap();
        assert_eq!(scr_profile_from_json(bad.as_ptr(), &mut profile), ScrStatus::InputFormat);
        assert!(profile.is_null());
        assert!(!last_error().is_empty());

        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(
            scr_profile_from_json(invalid.as_ptr().cast(), &mut profile),
            ScrStatus::InvalidUtf8
        );

        let line = r#"{"seq":1,"ts_ms":0,"platform":"android","app_id":"com.a","kind":"pii_access","body":{"pii_kind":"imei","value":"41"}}"#;
        let dup = format!("{line}\n{line}\n");
        let mut trace = ptr::null_mut();
        assert_eq!(scr_trace_parse(dup.as_ptr(), dup.len(), &mut trace), ScrStatus::InputFormat);
        assert!(last_error().contains("seq"), "{}", last_error());
        assert_eq!(scr_trace_parse(ptr::null(), 5, &mut trace), ScrStatus::NullArgument);

        let mixed = format!("{line}\nnot json\n");
        assert_eq!(scr_trace_parse(mixed.as_ptr(), mixed.len(), &mut trace), ScrStatus::Ok);
        assert_eq!(scr_trace_event_count(trace), 1);
        assert_eq!(scr_trace_warning_count(trace), 1);
        assert!(scr_last_error_message().is_null());

        let mut analysis = ptr::null_mut();
        assert_eq!(
            scr_analyze(trace, ptr::null(), ptr::null(), 1, 0, &mut analysis),
            ScrStatus::NullArgument
        );
        let mut s = ptr::null_mut();
        assert_eq!(scr_stats_json(ptr::null(), &mut s), ScrStatus::NullArgument);
        assert!(s.is_null());
        scr_trace_free(trace);
    }
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        scr_profile_free(ptr::null_mut());
        scr_trackers_free(ptr::null_mut());
        scr_trace_free(ptr::null_mut());
        scr_analysis_free(ptr::null_mut());
        scr_string_free(ptr::null_mut());
        assert_eq!(scr_trace_event_count(ptr::null()), 0);
        assert_eq!(scr_analysis_finding_count(ptr::null()), 0);
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("scrutinator.h").is_file());
    let dir = tempfile::tempdir().unwrap();
    let src = r#"#include "scrutinator.h"
int probe(const unsigned char *data, size_t len) {
    ScrTrace *trace = NULL;
    ScrStatus st = scr_trace_parse(data, len, &trace);
    if (st != SCR_STATUS_OK) return (int)st;
    size_t n = scr_trace_event_count(trace);
    scr_trace_free(trace);
    return n > 0 ? 0 : SCR_STATUS_INPUT_FORMAT;
}
"#;
    for (file, compiler) in [("probe.c", "cc"), ("probe.cpp", "c++")] {
        let path = dir.path().join(file);
        std::fs::write(&path, src).unwrap();
        let out = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
            .arg(&include)
            .arg(&path)
            .output()
            .unwrap_or_else(|e| panic!("{compiler} unavailable: {e}"));
        assert!(out.status.success(), "{compiler}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
