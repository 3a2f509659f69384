//! End-to-end runs of the command-line driver.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_scrutinator"));
    c.env_remove("SCRUTINATOR_MIN_NEEDLE_LEN");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/fixtures")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

/// Runs synthesize, analyze, report, baseline and compare into `dir`.
fn pipeline(dir: &Path, platform: &str, workers: &str) {
    let manifest = fixtures().join(format!("{platform}_manifest.json"));
    let profile = fixtures().join(format!("{platform}_profile.json"));
    let (trace, truth) = (dir.join("trace.ndjson"), dir.join("truth.json"));
    let (analysis, baseline) = (dir.join("analysis.json"), dir.join("baseline.json"));
    ok(&run(&["synthesize", "--manifest", s(&manifest), "--seed", "5", "--out", s(&trace), "--truth", s(&truth)]));
    ok(&run(&[
        "analyze", "--trace", s(&trace), "--profile", s(&profile), "--out", s(&analysis), "--workers", workers,
    ]));
    for format in ["table", "csv", "json"] {
        ok(&run(&["report", "--analysis", s(&analysis), "--format", format, "--out", s(&dir.join(format))]));
    }
    ok(&run(&["baseline", "--trace", s(&trace), "--profile", s(&profile), "--out", s(&baseline)]));
    ok(&run(&[
        "compare",
        "--analysis",
        s(&analysis),
        "--baseline",
        s(&baseline),
        "--truth",
        s(&truth),
        "--out",
        s(&dir.join("comparison.json")),
    ]));
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn full_pipeline_reproduces_counters_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), "ios", "0");
    let summary = json(&dir.path().join("json/ios_summary.json"));
    assert_eq!(summary["apps_with_any_stable_id"], 84);
    assert_eq!(summary["reset_resilience"]["count"], 93);
    let index = json(&dir.path().join("json/index.json"));
    assert_eq!(index["tool_version"], scrutinator::TOOL_VERSION);
    assert_eq!(index["inputs"]["analysis"].as_str().unwrap().len(), 64);
    let cmp = json(&dir.path().join("comparison.json"));
    assert_eq!(cmp["truth"]["analyzer"]["recall"], 1.0);
    assert_eq!(cmp["truth"]["analyzer"]["precision"], 1.0);
    assert_eq!(cmp["truth"]["partition_matches_truth"], true);
    assert!(cmp["baseline_only"].as_array().unwrap().is_empty());
    let analysis = json(&dir.path().join("analysis.json"));
    for input in ["trace", "profile", "trackers"] {
        assert_eq!(analysis["inputs"][input].as_str().unwrap().len(), 64);
    }
}

#[test]
fn outputs_are_identical_across_worker_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path(), "android", "1");
    pipeline(b.path(), "android", "4");
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert!(ta.len() > 10);
    assert_eq!(ta, tb);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["analyze", "--trace"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let analysis = dir.path().join("a.json");
    fs::write(&analysis, "{}").unwrap();
    let o = run(&["report", "--analysis", s(&analysis), "--format", "pdf", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let profile = fixtures().join("android_profile.json");
    let missing = dir.path().join("nope.ndjson");
    let out = dir.path().join("r.json");
    let o = run(&["analyze", "--trace", s(&missing), "--profile", s(&profile), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let trace = dir.path().join("t.ndjson");
    let line = r#"{"seq":1,"ts_ms":0,"platform":"android","app_id":"com.a","kind":"pii_access","body":{"pii_kind":"imei","value":"41"}}"#;
    fs::write(&trace, format!("{line}\n{line}\n")).unwrap();
    let o = run(&["analyze", "--trace", s(&trace), "--profile", s(&profile), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "duplicate seq");

    let bad_profile = dir.path().join("p.json");
    fs::write(&bad_profile, r#"{"platform":"android","identifiers":{}}"#).unwrap();
    fs::write(&trace, format!("{line}\n")).unwrap();
    let o = run(&["analyze", "--trace", s(&trace), "--profile", s(&bad_profile), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "profile lacks mandatory identifiers");

    let o = bin()
        .args(["analyze", "--trace", s(&trace), "--profile", s(&profile), "--out", s(&out)])
        .env("SCRUTINATOR_MIN_NEEDLE_LEN", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "zero needle length");
}

#[test]
fn malformed_lines_are_warned_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let profile = fixtures().join("android_profile.json");
    let trace = dir.path().join("t.ndjson");
    let good = r#"{"seq":1,"ts_ms":0,"platform":"android","app_id":"com.a","kind":"pii_access","body":{"pii_kind":"imei","value":"41"}}"#;
    let unknown = r#"{"seq":2,"ts_ms":0,"platform":"android","app_id":"com.a","kind":"file_write","body":{}}"#;
    fs::write(&trace, format!("{good}\nnot json\n{unknown}\n")).unwrap();
    let out = dir.path().join("r.json");
    let o = run(&["analyze", "--trace", s(&trace), "--profile", s(&profile), "--out", s(&out)]);
    ok(&o);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let doc = json(&out);
    assert_eq!(doc["warnings"]["malformed"], 1);
    assert_eq!(doc["warnings"]["unknown_kind"], 1);
}

#[test]
fn compare_rejects_mismatched_traces() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path(), "android", "0");
    pipeline(b.path(), "ios", "0");
    let o = run(&[
        "compare",
        "--analysis",
        s(&a.path().join("analysis.json")),
        "--baseline",
        s(&b.path().join("baseline.json")),
        "--out",
        s(&a.path().join("c.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
