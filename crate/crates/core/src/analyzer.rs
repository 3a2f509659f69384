//! Per-app leak analysis and whole-trace orchestration.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{
    display_text, needles_for, value_needles, AppMeta, DeviceProfile, DroppedNeedle, NeedleSet,
    PiiKind, DEFAULT_MIN_NEEDLE_LEN,
};
use crate::error::{Error, Result};
use crate::matcher::{resolve_modification_chains, Needle, NeedleIndex, View, DEFAULT_MAX_DEPTH};
use crate::party::{classify_party, normalize_destination, DestKind, PartyClass, TrackerList};
use crate::trace::{partition_by_app, Channel, Event, EventBody, EventTrace, ModifyApi};

/// Environment variable overriding the minimum needle length.
pub const MIN_NEEDLE_LEN_ENV: &str = "SCRUTINATOR_MIN_NEEDLE_LEN";

/// Warning key for destinations that are neither DNS names nor IP literals.
pub const WARN_INVALID_DESTINATION: &str = "invalid_destination";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisConfig {
    pub max_depth: usize,
    pub min_needle_len: usize,
    /// Worker threads for per-app analysis; 0 uses the global pool.
    pub workers: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            max_depth: DEFAULT_MAX_DEPTH,
            min_needle_len: DEFAULT_MIN_NEEDLE_LEN,
            workers: 0,
        }
    }
}

impl AnalysisConfig {
    /// Defaults, with the minimum needle length taken from the environment
    /// when set.
    pub fn from_env() -> Result<Self> {
        let mut config = AnalysisConfig::default();
        if let Ok(value) = std::env::var(MIN_NEEDLE_LEN_ENV) {
            config.min_needle_len = value
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("{MIN_NEEDLE_LEN_ENV}={value:?} is not a length")))?;
        }
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::config("max depth must be at least 1"));
        }
        if self.min_needle_len == 0 {
            return Err(Error::config("minimum needle length must be at least 1"));
        }
        Ok(())
    }
}

/// Where in a transmit event the matched bytes were found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceLocation {
    Raw,
    Decoded,
    UserAgent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Evidence {
    pub seq: u64,
    pub offset: usize,
    pub location: EvidenceLocation,
}

/// One detected flow of a PII kind to a destination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakFinding {
    pub app_id: String,
    pub pii_kind: PiiKind,
    pub destination_host: String,
    /// Registrable domain, IP literal or verbatim host.
    pub destination: String,
    #[serde(default)]
    pub party: Option<PartyClass>,
    pub channel: Channel,
    pub modified: bool,
    pub chain: Vec<ModifyApi>,
    /// First occurrence observed.
    pub evidence: Evidence,
    /// Original values seen (for installed apps, the app ids).
    pub values: BTreeSet<String>,
}

pub type FindingKey = (PiiKind, String, Channel, bool, Vec<ModifyApi>);

impl LeakFinding {
    pub fn key(&self) -> FindingKey {
        (
            self.pii_kind,
            self.destination_host.clone(),
            self.channel,
            self.modified,
            self.chain.clone(),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppReport {
    pub app_id: String,
    pub accessed: BTreeSet<PiiKind>,
    #[serde(rename = "modified")]
    pub fed_to_modification: BTreeSet<PiiKind>,
    pub findings: Vec<LeakFinding>,
    pub destinations: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub platform: crate::catalog::Platform,
    pub apps: BTreeMap<String, AppReport>,
    /// Names and package ids of every app known at analysis time.
    pub app_meta: BTreeMap<String, AppMeta>,
    pub warnings: BTreeMap<String, u64>,
    pub dropped_needles: Vec<DroppedNeedleDoc>,
    /// [`EventTrace::digest`] of the analyzed trace.
    pub trace_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DroppedNeedleDoc {
    pub pii_kind: PiiKind,
    pub origin: String,
    pub text: String,
}

impl From<&DroppedNeedle> for DroppedNeedleDoc {
    fn from(d: &DroppedNeedle) -> Self {
        DroppedNeedleDoc {
            pii_kind: d.pii_kind,
            origin: d.origin.clone(),
            text: display_text(&d.bytes),
        }
    }
}

impl AnalysisResult {
    pub fn findings(&self) -> impl Iterator<Item = &LeakFinding> {
        self.apps.values().flat_map(|r| r.findings.iter())
    }
}

/// Needles shared by every app of one analysis run, compiled once.
pub struct SharedNeedles {
    per_kind: BTreeMap<PiiKind, NeedleSet>,
    installed: NeedleSet,
    /// Every profile needle, installed-app names included.
    index: NeedleIndex,
    agent: NeedleIndex,
}

impl SharedNeedles {
    pub fn new(profile: &DeviceProfile, min_len: usize) -> Self {
        let per_kind: BTreeMap<PiiKind, NeedleSet> = profile
            .kinds()
            .filter(|k| *k != PiiKind::InstalledApps)
            .map(|k| (k, needles_for(profile, k, min_len)))
            .collect();
        let installed = needles_for(profile, PiiKind::InstalledApps, min_len);
        let index = NeedleIndex::new(
            per_kind
                .values()
                .flat_map(|s| s.needles.iter())
                .chain(&installed.needles)
                .cloned(),
        );
        let agent = NeedleIndex::new(installed.needles.iter().cloned());
        SharedNeedles {
            per_kind,
            installed,
            index,
            agent,
        }
    }
}

/// Runs the per-app pass over events of a single app.
pub fn analyze_app(events: &[&Event], profile: &DeviceProfile, config: &AnalysisConfig) -> Result<AppReport> {
    config.validate()?;
    let shared = SharedNeedles::new(profile, config.min_needle_len);
    Ok(analyze_app_with(events, &shared, config).0)
}

/// Shared needles an app may leak: those of kinds it accessed, and
/// installed-app names.
fn visible(n: &Needle, accessed: &BTreeSet<PiiKind>) -> bool {
    n.pii_kind == PiiKind::InstalledApps || accessed.contains(&n.pii_kind)
}

type Located<'n> = (usize, View, &'n Needle);

fn sort_located(hits: &mut [Located<'_>]) {
    hits.sort_by(|a, b| (a.0, &a.2.bytes, a.1, a.2).cmp(&(b.0, &b.2.bytes, b.1, b.2)));
}

fn scan_into<'n>(index: &'n NeedleIndex, payload: &[u8], keep: impl Fn(&Needle) -> bool, out: &mut Vec<Located<'n>>) {
    for hit in index.scan(payload) {
        let needle = &index.needles()[hit.needle];
        if keep(needle) {
            out.push((hit.offset, hit.view, needle));
        }
    }
}

fn analyze_app_with(
    events: &[&Event],
    shared: &SharedNeedles,
    config: &AnalysisConfig,
) -> (AppReport, Vec<DroppedNeedle>) {
    let mut report = AppReport {
        app_id: events.first().map(|e| e.app_id.clone()).unwrap_or_default(),
        ..AppReport::default()
    };
    let mut own = NeedleSet::default();
    let mut mods = Vec::new();
    let mut transmits = Vec::new();
    for e in events {
        match &e.body {
            EventBody::PiiAccess(a) => {
                report.accessed.insert(a.pii_kind);
                own.extend(value_needles(
                    a.pii_kind,
                    &a.value,
                    &display_text(&a.value),
                    config.min_needle_len,
                ));
            }
            EventBody::DataModify(m) => mods.push(m),
            EventBody::NetTransmit(t) => {
                report.destinations.insert(t.destination_host.clone());
                transmits.push((e.seq, t));
            }
            EventBody::PasteboardWrite(p) | EventBody::PasteboardRead(p) => {
                own.extend(value_needles(
                    PiiKind::PasteboardId,
                    &p.value,
                    &display_text(&p.value),
                    config.min_needle_len,
                ));
            }
        }
    }
    let accessed = report.accessed.clone();
    let mut dropped = own.dropped;
    for kind in &accessed {
        if let Some(set) = shared.per_kind.get(kind) {
            dropped.extend(set.dropped.iter().cloned());
        }
    }
    dropped.extend(shared.installed.dropped.iter().cloned());

    // Needles observed only in this app's events (values that differ from
    // the profile, pasteboard entries).
    let shared_needles = shared.index.needles();
    let own_index = NeedleIndex::new(
        own.needles
            .into_iter()
            .filter(|n| !(visible(n, &accessed) && shared_needles.binary_search(n).is_ok())),
    );

    let mut seeds = BTreeSet::new();
    for m in &mods {
        let mut hits = Vec::new();
        scan_into(&shared.index, &m.input, |n| visible(n, &accessed), &mut hits);
        scan_into(&own_index, &m.input, |_| true, &mut hits);
        for (_, _, n) in hits {
            report.fed_to_modification.insert(n.pii_kind);
            seeds.insert(n.clone());
        }
    }
    let derived = NeedleIndex::new(resolve_modification_chains(
        mods.iter().copied(),
        &seeds,
        config.max_depth,
        config.min_needle_len,
    ));

    let mut found: BTreeMap<FindingKey, LeakFinding> = BTreeMap::new();
    let mut record = |seq: u64, t: &crate::trace::NetTransmit, needle: &Needle, offset, location| {
        let finding = LeakFinding {
            app_id: report.app_id.clone(),
            pii_kind: needle.pii_kind,
            destination_host: t.destination_host.clone(),
            destination: normalize_destination(&t.destination_host).registrable,
            party: None,
            channel: t.channel,
            modified: !needle.chain.is_empty(),
            chain: needle.chain.clone(),
            evidence: Evidence { seq, offset, location },
            values: BTreeSet::new(),
        };
        found
            .entry(finding.key())
            .or_insert(finding)
            .values
            .insert(needle.origin.clone());
    };
    for (seq, t) in &transmits {
        let mut hits = Vec::new();
        scan_into(&shared.index, &t.payload, |n| visible(n, &accessed), &mut hits);
        scan_into(&own_index, &t.payload, |_| true, &mut hits);
        scan_into(&derived, &t.payload, |_| true, &mut hits);
        sort_located(&mut hits);
        for (offset, view, needle) in hits {
            let location = match view {
                View::Raw => EvidenceLocation::Raw,
                View::Decoded => EvidenceLocation::Decoded,
            };
            record(*seq, t, needle, offset, location);
        }
        if let Some(agent) = &t.user_agent {
            for hit in shared.agent.scan(agent.as_bytes()) {
                record(
                    *seq,
                    t,
                    &shared.agent.needles()[hit.needle],
                    hit.offset,
                    EvidenceLocation::UserAgent,
                );
            }
        }
    }
    report.findings = found.into_values().collect();
    (report, dropped)
}

/// Analyzes every app of the trace and classifies each finding's destination.
pub fn analyze_trace(
    trace: &EventTrace,
    profile: &DeviceProfile,
    trackers: &TrackerList,
    config: &AnalysisConfig,
) -> Result<AnalysisResult> {
    config.validate()?;
    if let Some(e) = trace.events().iter().find(|e| e.platform != profile.platform) {
        return Err(Error::config(format!(
            "trace event {} is from platform {} but the profile is for {}",
            e.seq, e.platform, profile.platform
        )));
    }
    let parts = partition_by_app(trace);
    let mut profile = profile.clone();
    profile.extend_apps(parts.keys().copied());
    let shared = SharedNeedles::new(&profile, config.min_needle_len);

    let work: Vec<(&str, &Vec<&Event>)> = parts.iter().map(|(k, v)| (*k, v)).collect();
    let run = || -> Vec<(AppReport, Vec<DroppedNeedle>)> {
        work.par_iter()
            .map(|(_, events)| analyze_app_with(events, &shared, config))
            .collect()
    };
    let outputs = if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::invariant(format!("worker pool: {e}")))?
            .install(run)
    } else {
        run()
    };

    let app_meta: BTreeMap<String, AppMeta> =
        profile.apps().map(|m| (m.app_id.clone(), m.clone())).collect();
    let mut warnings = BTreeMap::new();
    let mut dropped = BTreeSet::new();
    let mut apps = BTreeMap::new();
    for (mut report, app_dropped) in outputs {
        let meta = &app_meta[&report.app_id];
        for f in &mut report.findings {
            f.party = Some(classify_party(meta, &normalize_destination(&f.destination_host), trackers));
        }
        for host in &report.destinations {
            if normalize_destination(host).kind == DestKind::Invalid {
                *warnings.entry(WARN_INVALID_DESTINATION.to_string()).or_insert(0u64) += 1;
            }
        }
        dropped.extend(app_dropped.iter().map(DroppedNeedleDoc::from));
        apps.insert(report.app_id.clone(), report);
    }
    Ok(AnalysisResult {
        platform: profile.platform,
        apps,
        app_meta,
        warnings,
        dropped_needles: dropped.into_iter().collect(),
        trace_sha256: trace.digest(),
    })
}
