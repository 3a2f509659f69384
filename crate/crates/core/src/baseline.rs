//! A network-interception baseline and its comparison with the analyzer.
//!
//! The baseline sees clear-text traffic only and searches for values a user
//! could know in advance. It never resolves modification chains. Traffic is
//! attributed to apps perfectly, and each app's search is scoped to the kinds
//! the app accessed, so the baseline is a strict restriction of the analyzer.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analyzer::{AnalysisResult, Evidence, EvidenceLocation, FindingKey, LeakFinding};
use crate::catalog::{needles_for, DeviceProfile, NeedleSet, PiiKind, Platform, DEFAULT_MIN_NEEDLE_LEN};
use crate::error::{Error, Result};
use crate::matcher::{NeedleIndex, View};
use crate::party::normalize_destination;
use crate::synth::ExpectedFinding;
use crate::trace::{partition_by_app, Channel, EventBody, EventTrace, ModifyApi};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineFindings {
    pub platform: Platform,
    /// Findings per app; only clear-channel, unmodified, user-known kinds.
    pub apps: BTreeMap<String, Vec<LeakFinding>>,
    pub trace_sha256: String,
}

impl BaselineFindings {
    pub fn findings(&self) -> impl Iterator<Item = &LeakFinding> {
        self.apps.values().flatten()
    }
}

/// Runs the baseline over `trace`. `user_known` should come from
/// [`DeviceProfile::user_known`]; system-generated kinds in it are ignored.
pub fn analyze_baseline(trace: &EventTrace, user_known: &DeviceProfile) -> BaselineFindings {
    analyze_baseline_with(trace, user_known, DEFAULT_MIN_NEEDLE_LEN)
}

pub fn analyze_baseline_with(trace: &EventTrace, user_known: &DeviceProfile, min_len: usize) -> BaselineFindings {
    let parts = partition_by_app(trace);
    let mut profile = user_known.user_known();
    profile.extend_apps(parts.keys().copied());
    let per_kind: BTreeMap<PiiKind, NeedleSet> =
        profile.kinds().map(|k| (k, needles_for(&profile, k, min_len))).collect();
    let installed_set = needles_for(&profile, PiiKind::InstalledApps, min_len).needles;
    let installed = NeedleIndex::new(installed_set.iter().cloned());
    let index = NeedleIndex::new(
        per_kind
            .values()
            .flat_map(|s| s.needles.iter())
            .chain(&installed_set)
            .cloned(),
    );

    let mut apps = BTreeMap::new();
    for (app_id, events) in parts {
        let accessed: BTreeSet<PiiKind> = events
            .iter()
            .filter_map(|e| match &e.body {
                EventBody::PiiAccess(a) => Some(a.pii_kind),
                _ => None,
            })
            .collect();
        let mut found: BTreeMap<FindingKey, LeakFinding> = BTreeMap::new();
        for e in &events {
            let EventBody::NetTransmit(t) = &e.body else { continue };
            if t.channel != Channel::Clear {
                continue;
            }
            let mut hits: Vec<(&crate::matcher::Needle, usize, EvidenceLocation)> = index
                .scan(&t.payload)
                .into_iter()
                .map(|h| {
                    let loc = match h.view {
                        View::Raw => EvidenceLocation::Raw,
                        View::Decoded => EvidenceLocation::Decoded,
                    };
                    (&index.needles()[h.needle], h.offset, loc)
                })
                .filter(|(n, _, _)| n.pii_kind == PiiKind::InstalledApps || accessed.contains(&n.pii_kind))
                .collect();
            if let Some(agent) = &t.user_agent {
                hits.extend(
                    installed
                        .scan(agent.as_bytes())
                        .into_iter()
                        .map(|h| (&installed.needles()[h.needle], h.offset, EvidenceLocation::UserAgent)),
                );
            }
            for (needle, offset, location) in hits {
                let finding = LeakFinding {
                    app_id: app_id.to_string(),
                    pii_kind: needle.pii_kind,
                    destination_host: t.destination_host.clone(),
                    destination: normalize_destination(&t.destination_host).registrable,
                    party: None,
                    channel: Channel::Clear,
                    modified: false,
                    chain: Vec::new(),
                    evidence: Evidence {
                        seq: e.seq,
                        offset,
                        location,
                    },
                    values: BTreeSet::new(),
                };
                found
                    .entry(finding.key())
                    .or_insert(finding)
                    .values
                    .insert(needle.origin.clone());
            }
        }
        apps.insert(app_id.to_string(), found.into_values().collect());
    }
    BaselineFindings {
        platform: trace.events().first().map_or(user_known.platform, |e| e.platform),
        apps,
        trace_sha256: trace.digest(),
    }
}

/// Identity of a flow, shared by analyzer, baseline and ground truth.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowId {
    pub app_id: String,
    pub pii_kind: PiiKind,
    pub destination_host: String,
    pub channel: Channel,
    pub modified: bool,
    pub chain: Vec<ModifyApi>,
}

impl FlowId {
    pub fn of(f: &LeakFinding) -> Self {
        FlowId {
            app_id: f.app_id.clone(),
            pii_kind: f.pii_kind,
            destination_host: f.destination_host.clone(),
            channel: f.channel,
            modified: f.modified,
            chain: f.chain.clone(),
        }
    }

    pub fn of_expected(f: &ExpectedFinding) -> Self {
        FlowId {
            app_id: f.app_id.clone(),
            pii_kind: f.pii_kind,
            destination_host: f.destination_host.clone(),
            channel: f.channel,
            modified: f.modified,
            chain: f.chain.clone(),
        }
    }
}

/// Why the baseline cannot see a flow. Checked in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissReason {
    Ssl,
    Modified,
    SystemValue,
    /// Clear, unmodified and user-known, yet missed.
    Unexplained,
}

pub fn miss_reason(flow: &FlowId) -> MissReason {
    if flow.channel == Channel::Ssl {
        MissReason::Ssl
    } else if flow.modified {
        MissReason::Modified
    } else if flow.pii_kind.is_system_generated() {
        MissReason::SystemValue
    } else {
        MissReason::Unexplained
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissCounts {
    pub ssl: usize,
    pub modified: usize,
    pub system_value: usize,
    pub unexplained: usize,
}

impl MissCounts {
    fn tally<'a>(flows: impl IntoIterator<Item = &'a FlowId>) -> Self {
        let mut c = MissCounts::default();
        for f in flows {
            match miss_reason(f) {
                MissReason::Ssl => c.ssl += 1,
                MissReason::Modified => c.modified += 1,
                MissReason::SystemValue => c.system_value += 1,
                MissReason::Unexplained => c.unexplained += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub recall: f64,
    pub precision: f64,
}

impl Score {
    fn of(detected: &BTreeSet<FlowId>, truth: &BTreeSet<FlowId>) -> Self {
        let tp = detected.intersection(truth).count();
        let fp = detected.len() - tp;
        let fnn = truth.len() - tp;
        let ratio = |n: usize, d: usize| if d == 0 { 1.0 } else { n as f64 / d as f64 };
        Score {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fnn,
            recall: ratio(tp, truth.len()),
            precision: ratio(tp, tp + fp),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthComparison {
    pub expected: usize,
    pub analyzer: Score,
    pub baseline: Score,
    /// Ground-truth flows the baseline misses, by reason.
    pub expected_misses: MissCounts,
    /// The analyzer-only set equals the ground-truth flows the baseline misses.
    pub partition_matches_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub platform: Platform,
    pub trace_sha256: String,
    pub both: Vec<FlowId>,
    pub analyzer_only: Vec<FlowId>,
    pub baseline_only: Vec<FlowId>,
    /// Analyzer-only flows by reason.
    pub missed: MissCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthComparison>,
}

/// Splits the two detectors' flows into both / analyzer-only / baseline-only.
/// Fails when the inputs were computed from different traces.
pub fn compare_detectors(
    analysis: &AnalysisResult,
    baseline: &BaselineFindings,
    truth: Option<&[ExpectedFinding]>,
) -> Result<ComparisonReport> {
    if analysis.trace_sha256 != baseline.trace_sha256 {
        return Err(Error::config(format!(
            "analysis is of trace {} but the baseline is of trace {}",
            analysis.trace_sha256, baseline.trace_sha256
        )));
    }
    let a: BTreeSet<FlowId> = analysis.findings().map(FlowId::of).collect();
    let b: BTreeSet<FlowId> = baseline.findings().map(FlowId::of).collect();
    let analyzer_only: Vec<FlowId> = a.difference(&b).cloned().collect();
    let truth = truth.map(|t| {
        let t: BTreeSet<FlowId> = t.iter().map(FlowId::of_expected).collect();
        let missed: BTreeSet<FlowId> = t.difference(&b).cloned().collect();
        TruthComparison {
            expected: t.len(),
            analyzer: Score::of(&a, &t),
            baseline: Score::of(&b, &t),
            expected_misses: MissCounts::tally(&missed),
            partition_matches_truth: missed.iter().eq(analyzer_only.iter()),
        }
    });
    Ok(ComparisonReport {
        platform: analysis.platform,
        trace_sha256: analysis.trace_sha256.clone(),
        both: a.intersection(&b).cloned().collect(),
        missed: MissCounts::tally(&analyzer_only),
        analyzer_only,
        baseline_only: b.difference(&a).cloned().collect(),
        truth,
    })
}
