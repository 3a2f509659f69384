//! Aggregate statistics over classified leak flows.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::analyzer::AnalysisResult;
use crate::catalog::{PiiKind, Platform};
use crate::cross_app::{survives_reset, SharedIdFinding};
use crate::error::{Error, Result};
use crate::party::PartyClass;
use crate::trace::Channel;

/// One (app, kind, server, party, channel, modified) presence fact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Flow {
    pub app_id: String,
    pub pii_kind: PiiKind,
    pub destination: String,
    pub party: PartyClass,
    pub channel: Channel,
    pub modified: bool,
}

/// A pasteboard entry as seen by the statistics pass.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PasteboardEntry {
    pub name: String,
    pub pb_types: BTreeSet<String>,
    pub value: String,
    pub writers: BTreeSet<String>,
    pub readers: BTreeSet<String>,
}

/// Installed-app names received by one third party over one channel.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KnowledgeRow {
    pub domain: String,
    pub channel: Channel,
    pub apps: BTreeSet<String>,
}

/// Everything the statistics are computed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatsInput {
    pub platform: Platform,
    pub apps: BTreeSet<String>,
    pub flows: BTreeSet<Flow>,
    pub pasteboard: Vec<PasteboardEntry>,
    pub knowledge: Vec<KnowledgeRow>,
}

impl StatsInput {
    pub fn from_analysis(result: &AnalysisResult, shared: &[SharedIdFinding]) -> Result<Self> {
        let mut flows = BTreeSet::new();
        let mut knowledge: BTreeMap<(String, Channel), BTreeSet<String>> = BTreeMap::new();
        for f in result.findings() {
            let party = f.party.ok_or_else(|| {
                Error::invariant(format!("finding of {} to {} is not classified", f.app_id, f.destination))
            })?;
            flows.insert(Flow {
                app_id: f.app_id.clone(),
                pii_kind: f.pii_kind,
                destination: f.destination.clone(),
                party,
                channel: f.channel,
                modified: f.modified,
            });
            if f.pii_kind == PiiKind::InstalledApps && party == PartyClass::ThirdParty {
                knowledge
                    .entry((f.destination.clone(), f.channel))
                    .or_default()
                    .extend(f.values.iter().cloned());
            }
        }
        let pasteboard = shared
            .iter()
            .map(|s| PasteboardEntry {
                name: s.pasteboard_name.clone(),
                pb_types: s.pb_types.clone(),
                value: s.value.clone(),
                writers: s.writer_apps.clone(),
                readers: s.reader_apps.clone(),
            })
            .collect();
        Ok(StatsInput {
            platform: result.platform,
            apps: result.apps.keys().cloned().collect(),
            flows,
            pasteboard,
            knowledge: knowledge
                .into_iter()
                .map(|((domain, channel), apps)| KnowledgeRow { domain, channel, apps })
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppCounts {
    pub total: usize,
    pub modified: usize,
    pub unmodified: usize,
}

/// A checked cell of a server matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ServerCell {
    pub party: PartyClass,
    pub channel: Channel,
    pub domain: String,
    pub pii_kind: PiiKind,
    pub modified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerGroup {
    pub party: PartyClass,
    pub channel: Channel,
    pub destinations: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerCounts {
    pub distinct: usize,
    pub groups: Vec<ServerGroup>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PasteboardStats {
    pub creator_apps: usize,
    pub names: BTreeSet<String>,
    pub types: BTreeSet<String>,
    pub values: BTreeSet<String>,
    /// Entries read back by an app other than their writers.
    pub cross_app_links: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetCounts {
    pub count: usize,
    pub count_excluding_wifi_mac_only: usize,
    pub total_apps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub platform: Platform,
    pub total_apps: usize,
    pub apps_per_identifier: BTreeMap<PiiKind, AppCounts>,
    pub servers_per_identifier: BTreeMap<PiiKind, ServerCounts>,
    pub server_cells: BTreeSet<ServerCell>,
    pub apps_with_any_stable_id: usize,
    pub pasteboard: PasteboardStats,
    pub reset_resilience: ResetCounts,
    pub installed_app_knowledge: Vec<KnowledgeRow>,
    pub idfv_third_party_apps: usize,
}

pub fn aggregate_stats(input: &StatsInput) -> Result<AggregateStats> {
    let mut per_kind_apps: BTreeMap<PiiKind, [BTreeSet<&str>; 3]> = BTreeMap::new();
    let mut per_kind_servers: BTreeMap<PiiKind, BTreeMap<(PartyClass, Channel), BTreeSet<String>>> =
        BTreeMap::new();
    let mut cells = BTreeSet::new();
    let mut stable_apps = BTreeSet::new();
    let mut reset_kinds: BTreeMap<&str, BTreeSet<PiiKind>> = BTreeMap::new();
    let mut idfv_apps = BTreeSet::new();
    for f in &input.flows {
        if !input.apps.contains(&f.app_id) {
            return Err(Error::invariant(format!("flow from unknown app {}", f.app_id)));
        }
        let sets = per_kind_apps.entry(f.pii_kind).or_default();
        sets[0].insert(&f.app_id);
        sets[if f.modified { 1 } else { 2 }].insert(&f.app_id);
        per_kind_servers
            .entry(f.pii_kind)
            .or_default()
            .entry((f.party, f.channel))
            .or_default()
            .insert(f.destination.clone());
        cells.insert(ServerCell {
            party: f.party,
            channel: f.channel,
            domain: f.destination.clone(),
            pii_kind: f.pii_kind,
            modified: f.modified,
        });
        if f.pii_kind.is_unique_identifier(input.platform) {
            stable_apps.insert(f.app_id.as_str());
        }
        if survives_reset(f.pii_kind) {
            reset_kinds.entry(&f.app_id).or_default().insert(f.pii_kind);
        }
        if f.pii_kind == PiiKind::IdentifierForVendor && f.party == PartyClass::ThirdParty {
            idfv_apps.insert(f.app_id.as_str());
        }
    }

    let apps_per_identifier = per_kind_apps
        .into_iter()
        .map(|(k, [all, m, u])| {
            (
                k,
                AppCounts {
                    total: all.len(),
                    modified: m.len(),
                    unmodified: u.len(),
                },
            )
        })
        .collect();
    let mut servers_per_identifier = BTreeMap::new();
    for (kind, groups) in per_kind_servers {
        let union: BTreeSet<&String> = groups.values().flatten().collect();
        servers_per_identifier.insert(
            kind,
            ServerCounts {
                distinct: union.len(),
                groups: groups
                    .into_iter()
                    .map(|((party, channel), destinations)| ServerGroup {
                        party,
                        channel,
                        destinations,
                    })
                    .collect(),
            },
        );
    }

    let mut pasteboard = PasteboardStats::default();
    let mut creators = BTreeSet::new();
    for e in &input.pasteboard {
        if e.writers.is_empty() {
            return Err(Error::invariant(format!("pasteboard entry {} has no writer", e.name)));
        }
        creators.extend(e.writers.iter());
        pasteboard.names.insert(e.name.clone());
        pasteboard.types.extend(e.pb_types.iter().cloned());
        pasteboard.values.insert(e.value.clone());
        if e.readers.difference(&e.writers).next().is_some() {
            pasteboard.cross_app_links += 1;
        }
    }
    pasteboard.creator_apps = creators.len();

    let count = reset_kinds.len();
    let wifi_only = reset_kinds
        .values()
        .filter(|ks| ks.iter().all(|k| *k == PiiKind::WifiMac))
        .count();
    let stats = AggregateStats {
        platform: input.platform,
        total_apps: input.apps.len(),
        apps_per_identifier,
        servers_per_identifier,
        server_cells: cells,
        apps_with_any_stable_id: stable_apps.len(),
        pasteboard,
        reset_resilience: ResetCounts {
            count,
            count_excluding_wifi_mac_only: count - wifi_only,
            total_apps: input.apps.len(),
        },
        installed_app_knowledge: input.knowledge.clone(),
        idfv_third_party_apps: idfv_apps.len(),
    };
    stats.check_consistency()?;
    Ok(stats)
}

impl AggregateStats {
    /// Sum and bound checks that every rendering relies on.
    pub fn check_consistency(&self) -> Result<()> {
        for (kind, counts) in &self.apps_per_identifier {
            if counts.total > self.total_apps
                || counts.modified > counts.total
                || counts.unmodified > counts.total
                || counts.modified + counts.unmodified < counts.total
            {
                return Err(Error::invariant(format!("inconsistent app counts for {kind}: {counts:?}")));
            }
        }
        for (kind, servers) in &self.servers_per_identifier {
            let union: BTreeSet<&String> = servers.groups.iter().flat_map(|g| &g.destinations).collect();
            if union.len() != servers.distinct {
                return Err(Error::invariant(format!("server union mismatch for {kind}")));
            }
        }
        if self.apps_with_any_stable_id > self.total_apps
            || self.reset_resilience.count > self.total_apps
            || self.reset_resilience.count_excluding_wifi_mac_only > self.reset_resilience.count
        {
            return Err(Error::invariant("app counters exceed the app total"));
        }
        Ok(())
    }

    pub fn app_count(&self, kind: PiiKind) -> AppCounts {
        self.apps_per_identifier.get(&kind).copied().unwrap_or_default()
    }

    /// Union of installed-app names per third-party domain, over channels.
    pub fn knowledge_by_domain(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut out: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for row in &self.installed_app_knowledge {
            out.entry(row.domain.as_str())
                .or_default()
                .extend(row.apps.iter().map(String::as_str));
        }
        out
    }
}
