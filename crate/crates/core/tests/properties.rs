//! Property suites over the matcher, trace codec, party classifier and the
//! full pipeline on random worlds.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::*;
use scrutinator::analyzer::{analyze_trace, AnalysisConfig, AnalysisResult};
use scrutinator::baseline::{analyze_baseline, compare_detectors, FlowId};
use scrutinator::catalog::{AppMeta, DeviceProfile, PiiKind, Platform};
use scrutinator::cross_app::detect_shared_identifiers;
use scrutinator::matcher::{find_in_payload, Needle, Representation};
use scrutinator::party::{classify_party, normalize_destination, DestKind, PartyClass, TrackerList};
use scrutinator::report::{aggregate_stats, AggregateStats, StatsInput};
use scrutinator::synth::random::{random_world, RandomSpec};
use scrutinator::synth::{synthesize_trace, SynthConfig};
use scrutinator::trace::{
    parse_trace, partition_by_app, Channel, DataModify, Event, EventBody, EventTrace, ModifyApi, NetTransmit,
    Pasteboard, PiiAccess,
};

fn bytes(alphabet: &'static [u8], len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(prop::sample::select(alphabet), len)
}

fn needle_strategy() -> impl Strategy<Value = Needle> {
    (bytes(b"abAB%2f4F1", 1..6), 0u8..3).prop_map(|(bytes, origin)| Needle {
        pii_kind: PiiKind::Imei,
        bytes,
        representation: Representation::Utf8Text,
        chain: vec![],
        origin: format!("o{origin}"),
    })
}

fn body_strategy() -> impl Strategy<Value = EventBody> {
    let any_bytes = || prop::collection::vec(any::<u8>(), 0..24);
    prop_oneof![
        (prop::sample::select(PiiKind::for_platform(Platform::Android)), prop::collection::vec(any::<u8>(), 1..16))
            .prop_map(|(pii_kind, value)| EventBody::PiiAccess(PiiAccess { pii_kind, value })),
        (prop::sample::select(&ModifyApi::ALL[..]), any_bytes(), prop::collection::vec(any::<u8>(), 32))
            .prop_map(|(api, input, mut output)| {
                output.truncate(api.digest_len().unwrap_or(1 + input.len() % 32));
                EventBody::DataModify(DataModify { api, input, output })
            }),
        ("[a-z]{1,8}\\.(com|net|co\\.uk)", any::<bool>(), any_bytes(), prop::option::of("[ -~]{0,20}")).prop_map(
            |(destination_host, ssl, payload, user_agent)| EventBody::NetTransmit(NetTransmit {
                destination_host,
                channel: if ssl { Channel::Ssl } else { Channel::Clear },
                payload,
                user_agent,
            })
        ),
        ("[a-z.]{1,12}", any_bytes(), any::<bool>()).prop_map(|(name, value, write)| {
            let p = Pasteboard {
                name,
                pb_type: "public.utf8-plain-text".into(),
                value,
            };
            if write {
                EventBody::PasteboardWrite(p)
            } else {
                EventBody::PasteboardRead(p)
            }
        }),
    ]
}

fn events_strategy() -> impl Strategy<Value = Vec<Event>> {
    prop::collection::vec((0i64..50, prop::sample::select(&["com.a", "com.b", "com.c"][..]), body_strategy()), 0..30)
        .prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (ts, app, body))| Event {
                    seq: i as u64 * 3 + 1,
                    ts_ms: ts,
                    platform: Platform::Android,
                    app_id: app.to_string(),
                    body,
                })
                .collect()
        })
}

fn host_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::collection::vec("[a-z0-9]{1,6}", 1..4).prop_flat_map(|labels| {
            prop::sample::select(&["com", "co.uk", "net", "fr", "mobi", "ac.uk", "io"][..])
                .prop_map(move |tld| format!("{}.{tld}", labels.join(".")))
        }),
        (0u8..=255, 0u8..=255, 0u8..=255, 0u8..=255).prop_map(|(a, b, c, d)| format!("{a}.{b}.{c}.{d}")),
        "[A-Za-z0-9_./-]{1,20}",
    ]
}

struct World {
    profile: DeviceProfile,
    trace: EventTrace,
    truth: scrutinator::synth::GroundTruth,
}

fn world(platform: Platform, apps: usize, leaks: usize, seed: u64) -> Option<World> {
    let mut spec = RandomSpec::new(platform, apps, leaks);
    spec.chain_depth = 0..=3;
    let (manifest, profile) = random_world(&spec, seed);
    let (trace, truth) = synthesize_trace(&manifest, &profile, seed, &SynthConfig::default()).ok()?;
    Some(World { profile, trace, truth })
}

fn world_strategy() -> impl Strategy<Value = (Platform, usize, usize, u64)> {
    (prop::sample::select(&[Platform::Android, Platform::Ios][..]), 1usize..8, 0usize..40, any::<u64>())
}

fn analyze(w: &World, config: &AnalysisConfig) -> AnalysisResult {
    analyze_trace(&w.trace, &w.profile, &TrackerList::bundled(), config).unwrap()
}

fn flows(r: &AnalysisResult) -> BTreeSet<FlowId> {
    r.findings().map(FlowId::of).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn matcher_equals_every_offset_scan(
        needles in prop::collection::vec(needle_strategy(), 1..10),
        payload in bytes(b"abAB%2f4F1=&", 0..120),
    ) {
        let mut got: Vec<_> = find_in_payload(&needles, &payload)
            .into_iter()
            .map(|m| (m.needle, m.offset, m.view))
            .collect();
        let mut want = brute_force(&needles, &payload);
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn trace_round_trips(events in events_strategy()) {
        let trace = EventTrace::from_events(events).unwrap();
        let text = trace.to_ndjson();
        let parsed = parse_trace(text.as_bytes()).unwrap();
        prop_assert_eq!(&parsed, &trace);
        prop_assert_eq!(parsed.digest(), trace.digest());
        prop_assert_eq!(parsed.to_ndjson(), text);
    }

    #[test]
    fn bad_lines_are_skipped_and_counted(
        events in events_strategy(),
        junk in prop::collection::vec((any::<prop::sample::Index>(), "[^\\n{}]{1,30}"), 0..6),
    ) {
        let trace = EventTrace::from_events(events).unwrap();
        let mut lines: Vec<String> = trace.to_ndjson().lines().map(String::from).collect();
        let mut counted = 0;
        for (at, text) in &junk {
            if text.trim().is_empty() || text.trim_start().starts_with('#') {
                continue;
            }
            lines.insert(at.index(lines.len() + 1), text.clone());
            counted += 1;
        }
        let parsed = parse_trace(lines.join("\n").as_bytes()).unwrap();
        prop_assert_eq!(parsed.events(), trace.events());
        prop_assert_eq!(parsed.warning_count(), counted);
    }

    #[test]
    fn partitions_merge_back_to_the_trace(events in events_strategy()) {
        let trace = EventTrace::from_events(events).unwrap();
        let parts = partition_by_app(&trace);
        let mut merged: Vec<&Event> = Vec::new();
        for (app, group) in &parts {
            prop_assert!(group.iter().all(|e| e.app_id == *app));
            prop_assert!(group.windows(2).all(|w| (w[0].ts_ms, w[0].seq) <= (w[1].ts_ms, w[1].seq)));
            merged.extend(group.iter().copied());
        }
        merged.sort_by_key(|e| (e.ts_ms, e.seq));
        let original: Vec<&Event> = trace.events().iter().collect();
        prop_assert_eq!(merged, original);
    }

    #[test]
    fn normalization_is_idempotent(host in host_strategy()) {
        let once = normalize_destination(&host);
        let twice = normalize_destination(&once.registrable);
        prop_assert_eq!(&twice.registrable, &once.registrable);
        if once.kind == DestKind::Domain {
            prop_assert!(once.host.ends_with(&once.registrable));
        }
    }

    #[test]
    fn more_trackers_never_demote(
        host in host_strategy(),
        extra in prop::collection::vec("[a-z]{2,6}\\.(com|net)", 0..5),
        app in "[a-z]{3,8}",
    ) {
        let meta = AppMeta { app_id: format!("com.{app}.x"), package: format!("com.{app}.x"), display: app.clone() };
        let base = TrackerList::bundled();
        let mut bigger = TrackerList::bundled();
        for e in &extra {
            bigger.insert(e).unwrap();
        }
        let dest = normalize_destination(&host);
        let before = classify_party(&meta, &dest, &base);
        let after = classify_party(&meta, &dest, &bigger);
        match before {
            PartyClass::FirstParty | PartyClass::ThirdParty => prop_assert_eq!(after, before),
            PartyClass::Unidentified => prop_assert_ne!(after, PartyClass::FirstParty),
        }
    }

    #[test]
    fn stats_json_round_trips((platform, apps, leaks, seed) in world_strategy()) {
        let Some(w) = world(platform, apps, leaks, seed) else { return Ok(()) };
        let r = analyze(&w, &AnalysisConfig::default());
        let shared = detect_shared_identifiers(&w.trace, &r);
        let stats = aggregate_stats(&StatsInput::from_analysis(&r, &shared).unwrap()).unwrap();
        let back: AggregateStats = serde_json::from_str(&serde_json::to_string(&stats).unwrap()).unwrap();
        prop_assert_eq!(back, stats);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn analyzer_matches_ground_truth((platform, apps, leaks, seed) in world_strategy()) {
        let Some(w) = world(platform, apps, leaks, seed) else { return Ok(()) };
        let r = analyze(&w, &AnalysisConfig::default());
        prop_assert_eq!(analysis_facts(&r), truth_facts(&w.truth));
    }

    #[test]
    fn deeper_chains_only_add_findings((platform, apps, leaks, seed) in world_strategy()) {
        let Some(w) = world(platform, apps, leaks, seed) else { return Ok(()) };
        let mut previous = BTreeSet::new();
        for max_depth in 1..=4 {
            let current = flows(&analyze(&w, &AnalysisConfig { max_depth, ..AnalysisConfig::default() }));
            prop_assert!(previous.is_subset(&current), "depth {} lost findings", max_depth);
            previous = current;
        }
    }

    #[test]
    fn findings_stay_within_accessed_kinds((platform, apps, leaks, seed) in world_strategy()) {
        let Some(w) = world(platform, apps, leaks, seed) else { return Ok(()) };
        let r = analyze(&w, &AnalysisConfig::default());
        for report in r.apps.values() {
            for f in &report.findings {
                prop_assert!(
                    report.accessed.contains(&f.pii_kind)
                        || matches!(f.pii_kind, PiiKind::InstalledApps | PiiKind::PasteboardId),
                    "{} leaks unaccessed {}", report.app_id, f.pii_kind
                );
            }
        }
    }

    #[test]
    fn baseline_is_within_analyzer((platform, apps, leaks, seed) in world_strategy()) {
        let Some(w) = world(platform, apps, leaks, seed) else { return Ok(()) };
        let r = analyze(&w, &AnalysisConfig::default());
        let b = analyze_baseline(&w.trace, &w.profile);
        let report = compare_detectors(&r, &b, Some(&w.truth.findings)).unwrap();
        prop_assert!(report.baseline_only.is_empty());
        prop_assert!(report.truth.unwrap().partition_matches_truth);
    }

    #[test]
    fn baseline_ignores_encrypted_traffic((platform, apps, leaks, seed) in world_strategy()) {
        let Some(w) = world(platform, apps, leaks, seed) else { return Ok(()) };
        let clear_only: Vec<Event> = w
            .trace
            .events()
            .iter()
            .filter(|e| !matches!(&e.body, EventBody::NetTransmit(t) if t.channel == Channel::Ssl))
            .cloned()
            .collect();
        let stripped = EventTrace::from_events(clear_only).unwrap();
        let non_empty = |b: scrutinator::baseline::BaselineFindings| {
            b.apps.into_iter().filter(|(_, f)| !f.is_empty()).collect::<Vec<_>>()
        };
        let full = non_empty(analyze_baseline(&w.trace, &w.profile));
        let part = non_empty(analyze_baseline(&stripped, &w.profile));
        prop_assert_eq!(full, part);
    }

    #[test]
    fn worker_count_does_not_change_results((platform, apps, leaks, seed) in world_strategy(), workers in 1usize..6) {
        let Some(w) = world(platform, apps, leaks, seed) else { return Ok(()) };
        let one = analyze(&w, &AnalysisConfig { workers: 1, ..AnalysisConfig::default() });
        let many = analyze(&w, &AnalysisConfig { workers, ..AnalysisConfig::default() });
        prop_assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&many).unwrap());
    }
}
