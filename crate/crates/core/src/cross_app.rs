//! Cross-app tracking: shared pasteboard identifiers, installed-app
//! knowledge of third parties, and tracking that survives an ad-id reset.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analyzer::AnalysisResult;
use crate::catalog::{display_text, PiiKind, StabilityClass};
use crate::party::PartyClass;
use crate::trace::{Channel, EventBody, EventTrace};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Transmission {
    pub destination: String,
    pub party: Option<PartyClass>,
    pub channel: Channel,
}

/// One pasteboard entry (name and written value) and the apps touching it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedIdFinding {
    pub pasteboard_name: String,
    pub value: String,
    pub pb_types: BTreeSet<String>,
    pub writer_apps: BTreeSet<String>,
    pub reader_apps: BTreeSet<String>,
    pub transmitted_to: BTreeSet<Transmission>,
}

impl SharedIdFinding {
    /// Readers other than the writers: apps the entry links to.
    pub fn linked_apps(&self) -> impl Iterator<Item = &String> {
        self.reader_apps.difference(&self.writer_apps)
    }
}

/// Groups pasteboard writes by (name, value), attaches the apps that read
/// the same value back and where the value was transmitted.
pub fn detect_shared_identifiers(trace: &EventTrace, result: &AnalysisResult) -> Vec<SharedIdFinding> {
    let mut entries: BTreeMap<(String, Vec<u8>), SharedIdFinding> = BTreeMap::new();
    let mut reads: Vec<(&str, &str, &[u8])> = Vec::new();
    for e in trace.events() {
        match &e.body {
            EventBody::PasteboardWrite(p) => {
                let entry = entries
                    .entry((p.name.clone(), p.value.clone()))
                    .or_insert_with(|| SharedIdFinding {
                        pasteboard_name: p.name.clone(),
                        value: display_text(&p.value),
                        pb_types: BTreeSet::new(),
                        writer_apps: BTreeSet::new(),
                        reader_apps: BTreeSet::new(),
                        transmitted_to: BTreeSet::new(),
                    });
                entry.pb_types.insert(p.pb_type.clone());
                entry.writer_apps.insert(e.app_id.clone());
            }
            EventBody::PasteboardRead(p) => reads.push((&e.app_id, &p.name, &p.value)),
            _ => {}
        }
    }
    for (app, name, value) in reads {
        if let Some(entry) = entries.get_mut(&(name.to_string(), value.to_vec())) {
            entry.reader_apps.insert(app.to_string());
        }
    }
    let mut sent: BTreeMap<&str, BTreeSet<Transmission>> = BTreeMap::new();
    for f in result.findings().filter(|f| f.pii_kind == PiiKind::PasteboardId) {
        for v in &f.values {
            sent.entry(v.as_str()).or_default().insert(Transmission {
                destination: f.destination.clone(),
                party: f.party,
                channel: f.channel,
            });
        }
    }
    entries
        .into_values()
        .map(|mut entry| {
            if let Some(t) = sent.get(entry.value.as_str()) {
                entry.transmitted_to = t.clone();
            }
            entry
        })
        .collect()
}

/// Apps that created at least one pasteboard entry.
pub fn pasteboard_creator_apps(shared: &[SharedIdFinding]) -> BTreeSet<String> {
    shared.iter().flat_map(|s| s.writer_apps.iter().cloned()).collect()
}

/// Third-party domain to the installed apps it learned about.
pub fn installed_app_knowledge(result: &AnalysisResult) -> BTreeMap<String, BTreeSet<String>> {
    let mut known: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for f in result.findings() {
        if f.pii_kind == PiiKind::InstalledApps && f.party == Some(PartyClass::ThirdParty) {
            known
                .entry(f.destination.clone())
                .or_default()
                .extend(f.values.iter().cloned());
        }
    }
    known
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetResilience {
    /// Per app: keeps tracking after the ad identifier is reset.
    pub tracks_after_reset: BTreeMap<String, bool>,
    /// Apps whose only reset-proof identifier is the Wi-Fi MAC.
    pub wifi_mac_only: BTreeSet<String>,
    pub count: usize,
    pub count_excluding_wifi_mac_only: usize,
    pub total_apps: usize,
}

/// Kinds that still identify the device after an ad-identifier reset. The
/// identifier-for-vendor is left out: linking it back needs the vendor's other
/// apps, which is not counted.
pub(crate) fn survives_reset(kind: PiiKind) -> bool {
    kind != PiiKind::IdentifierForVendor
        && matches!(
            kind.stability(),
            StabilityClass::HardwareTied
                | StabilityClass::SimTied
                | StabilityClass::OsTied
                | StabilityClass::ThirdPartyGenerated
        )
}

pub fn reset_resilience(result: &AnalysisResult) -> ResetResilience {
    let mut out = ResetResilience {
        total_apps: result.apps.len(),
        ..ResetResilience::default()
    };
    for (app_id, report) in &result.apps {
        let kinds: BTreeSet<PiiKind> = report
            .findings
            .iter()
            .map(|f| f.pii_kind)
            .filter(|k| survives_reset(*k))
            .collect();
        let tracks = !kinds.is_empty();
        out.tracks_after_reset.insert(app_id.clone(), tracks);
        if tracks {
            out.count += 1;
            if kinds.iter().all(|k| *k == PiiKind::WifiMac) {
                out.wifi_mac_only.insert(app_id.clone());
            } else {
                out.count_excluding_wifi_mac_only += 1;
            }
        }
    }
    out
}

/// Apps sending the identifier-for-vendor to at least one third party.
pub fn idfv_third_party_apps(result: &AnalysisResult) -> BTreeSet<String> {
    result
        .findings()
        .filter(|f| {
            f.pii_kind == PiiKind::IdentifierForVendor && f.party == Some(PartyClass::ThirdParty)
        })
        .map(|f| f.app_id.clone())
        .collect()
}
