#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde_json::Value;

use scrutinator::analyzer::{analyze_trace, AnalysisConfig, AnalysisResult};
use scrutinator::catalog::{DeviceProfile, Platform};
use scrutinator::cross_app::{detect_shared_identifiers, SharedIdFinding};
use scrutinator::matcher::{Needle, View};
use scrutinator::party::{normalize_destination, TrackerList};
use scrutinator::report::{aggregate_stats, AggregateStats, StatsInput};
use scrutinator::synth::{synthesize_trace, GroundTruth, LeakManifest, SynthConfig};
use scrutinator::trace::EventTrace;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn fixture(platform: Platform) -> (LeakManifest, DeviceProfile) {
    let dir = data_dir().join("fixtures");
    let text = std::fs::read_to_string(dir.join(format!("{platform}_manifest.json"))).unwrap();
    let manifest = LeakManifest::from_json(&text).unwrap();
    let profile = manifest.load_profile(&dir).unwrap();
    (manifest, profile)
}

pub struct Run {
    pub trace: EventTrace,
    pub truth: GroundTruth,
    pub result: AnalysisResult,
    pub shared: Vec<SharedIdFinding>,
    pub stats: AggregateStats,
    pub profile: DeviceProfile,
}

pub fn run_fixture(platform: Platform, seed: u64, workers: usize) -> Run {
    let (manifest, profile) = fixture(platform);
    let (trace, truth) = synthesize_trace(&manifest, &profile, seed, &SynthConfig::default()).unwrap();
    let config = AnalysisConfig {
        workers,
        ..AnalysisConfig::default()
    };
    let result = analyze_trace(&trace, &profile, &TrackerList::bundled(), &config).unwrap();
    let shared = detect_shared_identifiers(&trace, &result);
    let stats = aggregate_stats(&StatsInput::from_analysis(&result, &shared).unwrap()).unwrap();
    Run {
        trace,
        truth,
        result,
        shared,
        stats,
        profile,
    }
}

pub fn golden(name: &str) -> Value {
    let text = std::fs::read_to_string(data_dir().join("golden").join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// (party, channel, server, column key) cells of a matrix document, with
/// servers reduced to their registrable domain.
pub type Cell = (String, String, String, String);

pub fn matrix_cells(doc: &Value) -> BTreeSet<Cell> {
    let mut out = BTreeSet::new();
    for row in doc["rows"].as_array().unwrap() {
        let server = normalize_destination(row["server"].as_str().unwrap()).registrable;
        for key in row["checked"].as_array().unwrap() {
            out.insert((
                row["party"].as_str().unwrap().to_string(),
                row["channel"].as_str().unwrap().to_string(),
                server.clone(),
                key.as_str().unwrap().to_string(),
            ));
        }
    }
    out
}

pub const MATRIX_TABLES: &[(&str, Platform)] = &[
    ("android_system_identifiers", Platform::Android),
    ("android_personal_data", Platform::Android),
    ("ios_system_identifiers", Platform::Ios),
    ("ios_identifier_for_vendor", Platform::Ios),
    ("ios_personal_data", Platform::Ios),
];

/// The kind part of a column key such as `imei:modified`.
pub fn column_kind(key: &str) -> &str {
    key.split(':').next().unwrap()
}

/// Expected cells for one layout: its own golden rows, plus cells of the
/// same columns listed in the platform's other golden tables. The same
/// flows appear in more than one published table and are not always
/// repeated in both.
pub fn expected_cells(table: &str, platform: Platform, columns: &[String]) -> BTreeSet<Cell> {
    let mut out = matrix_cells(&golden(table));
    for (other, p) in MATRIX_TABLES {
        if *p != platform || *other == table {
            continue;
        }
        for cell in matrix_cells(&golden(other)) {
            if columns.contains(&cell.3) {
                out.insert(cell);
            }
        }
    }
    out
}

/// Installed-app knowledge from a golden table, with `@all` expanded.
pub fn golden_knowledge(platform: Platform, all_apps: &BTreeSet<String>) -> BTreeMap<(String, String), BTreeSet<String>> {
    let doc = golden(&format!("{platform}_installed_apps"));
    let mut out: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
    for row in doc["rows"].as_array().unwrap() {
        let key = (
            row["third_party"].as_str().unwrap().to_string(),
            row["channel"].as_str().unwrap().to_string(),
        );
        let apps: BTreeSet<String> = match &row["apps"] {
            Value::String(s) if s == "@all" => all_apps.clone(),
            Value::Array(a) => a.iter().map(|v| v.as_str().unwrap().to_string()).collect(),
            other => panic!("unexpected apps value {other}"),
        };
        out.entry(key).or_default().extend(apps);
    }
    out
}

pub fn channel_str(c: scrutinator::trace::Channel) -> String {
    serde_json::to_value(c).unwrap().as_str().unwrap().to_string()
}

pub type Fact = (String, scrutinator::analyzer::FindingKey, Option<scrutinator::party::PartyClass>, BTreeSet<String>);

pub fn analysis_facts(result: &AnalysisResult) -> BTreeSet<Fact> {
    result
        .findings()
        .map(|f| (f.app_id.clone(), f.key(), f.party, f.values.clone()))
        .collect()
}

pub fn truth_facts(truth: &GroundTruth) -> BTreeSet<Fact> {
    truth
        .findings
        .iter()
        .map(|f| (f.app_id.clone(), f.key(), Some(f.party), f.values.clone()))
        .collect()
}

/// Every occurrence of every needle at every offset, in the raw view and in
/// the percent-decoded view when decoding changes the payload.
pub fn brute_force(needles: &[Needle], payload: &[u8]) -> Vec<(Needle, usize, View)> {
    fn decode(p: &[u8]) -> Vec<u8> {
        let hex = |b: u8| (b as char).to_digit(16).map(|d| d as u8);
        let mut out = Vec::with_capacity(p.len());
        let mut i = 0;
        while i < p.len() {
            if p[i] == b'%' && i + 2 < p.len() {
                if let (Some(h), Some(l)) = (hex(p[i + 1]), hex(p[i + 2])) {
                    out.push(h * 16 + l);
                    i += 3;
                    continue;
                }
            }
            out.push(p[i]);
            i += 1;
        }
        out
    }
    let mut views = vec![(payload.to_vec(), View::Raw)];
    let decoded = decode(payload);
    if decoded != payload {
        views.push((decoded, View::Decoded));
    }
    let unique: BTreeSet<&Needle> = needles.iter().filter(|n| !n.bytes.is_empty()).collect();
    let mut out = Vec::new();
    for (hay, view) in &views {
        for n in &unique {
            for off in 0..hay.len() {
                if hay[off..].starts_with(&n.bytes) {
                    out.push(((*n).clone(), off, *view));
                }
            }
        }
    }
    out
}
