//! Deterministic trace generation from leak manifests, with ground truth.
//!
//! Every generated payload is checked by a direct scan against the needles
//! the analyzer will use for that app: it must match exactly the intended
//! (kind, chain, value) triples and nothing else. Filler is redrawn when it
//! produces a stray match.

pub mod manifest;
pub mod random;
pub mod transform;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use percent_encoding::{percent_encode, NON_ALPHANUMERIC};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{display_text, needles_for, value_needles, DeviceProfile, NeedleSet, PiiKind, Platform};
use crate::error::{Error, Result};
use crate::matcher::{decoded_view, resolve_modification_chains, Needle, DEFAULT_MAX_DEPTH};
use crate::party::{normalize_destination, PartyClass};
use crate::report::{aggregate_stats, AggregateStats, Flow, KnowledgeRow, PasteboardEntry, StatsInput};
use crate::trace::{
    Channel, DataModify, Event, EventBody, EventTrace, ModifyApi, NetTransmit, Pasteboard, PiiAccess,
};

pub use manifest::{
    AllApps, AppBehavior, AppSelection, Embed, InstalledAppSend, LeakManifest, LeakRow, Noise, PasteboardOp,
    PasteboardOpKind, ProfileRef, SendVia,
};

/// Length of each app's synthetic run.
pub const APP_WINDOW_MS: i64 = 60_000;

/// Characters used for filler keys and values. Disjoint from hex digits so
/// filler cannot form hex needles.
const FILLER_ALPHABET: &[u8] = b"ghjkmnpqrstvwxyz";

const MAX_FILLER_TRIES: usize = 64;

const NOISE_HOSTS: &[&str] = &[
    "cdn.staticassets.net",
    "img.mediacache.net",
    "config.appsettings.io",
    "api.weatherfeed.org",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub min_needle_len: usize,
    pub max_depth: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            min_needle_len: crate::catalog::DEFAULT_MIN_NEEDLE_LEN,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// A finding the analyzer is expected to report, with its party.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExpectedFinding {
    pub app_id: String,
    pub pii_kind: PiiKind,
    pub destination_host: String,
    pub destination: String,
    pub party: PartyClass,
    pub channel: Channel,
    pub modified: bool,
    pub chain: Vec<ModifyApi>,
    pub values: BTreeSet<String>,
}

impl ExpectedFinding {
    pub fn key(&self) -> crate::analyzer::FindingKey {
        (
            self.pii_kind,
            self.destination_host.clone(),
            self.channel,
            self.modified,
            self.chain.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub platform: Platform,
    pub apps: BTreeSet<String>,
    pub findings: Vec<ExpectedFinding>,
    pub stats: AggregateStats,
}

/// Value bytes a leak row sends before any modification.
fn leak_value(row: &LeakRow, profile: &DeviceProfile) -> Vec<u8> {
    match &row.value {
        Some(v) => v.as_bytes().to_vec(),
        None => profile.values(row.pii_kind)[0].clone(),
    }
}

fn selected_apps(sel: &AppSelection, manifest: &LeakManifest, profile: &DeviceProfile) -> Vec<String> {
    match sel {
        AppSelection::All(AllApps::All) => manifest.all_app_ids(profile).into_iter().collect(),
        AppSelection::List(list) => list.clone(),
    }
}

/// Findings implied by the manifest rows alone.
pub fn expected_findings(manifest: &LeakManifest, profile: &DeviceProfile) -> Result<Vec<ExpectedFinding>> {
    manifest.validate(profile)?;
    let mut out: BTreeMap<(String, crate::analyzer::FindingKey), ExpectedFinding> = BTreeMap::new();
    let mut add = |f: ExpectedFinding, loc: String| -> Result<()> {
        let key = (f.app_id.clone(), f.key());
        if let Some(existing) = out.get_mut(&key) {
            if existing.party != f.party {
                return Err(Error::manifest(loc, "same destination listed with two parties"));
            }
            existing.values.extend(f.values);
        } else {
            out.insert(key, f);
        }
        Ok(())
    };
    for (i, app) in manifest.apps.iter().enumerate() {
        for (j, row) in app.leaks.iter().enumerate() {
            add(
                ExpectedFinding {
                    app_id: app.app_id.clone(),
                    pii_kind: row.pii_kind,
                    destination_host: row.destination.clone(),
                    destination: normalize_destination(&row.destination).registrable,
                    party: row.party,
                    channel: row.channel,
                    modified: !row.chain.is_empty(),
                    chain: row.chain.clone(),
                    values: [display_text(&leak_value(row, profile))].into(),
                },
                format!("apps[{i}].leaks[{j}]"),
            )?;
        }
        for (j, send) in app.installed_app_sends.iter().enumerate() {
            add(
                ExpectedFinding {
                    app_id: app.app_id.clone(),
                    pii_kind: PiiKind::InstalledApps,
                    destination_host: send.destination.clone(),
                    destination: normalize_destination(&send.destination).registrable,
                    party: send.party,
                    channel: send.channel,
                    modified: false,
                    chain: vec![],
                    values: selected_apps(&send.apps, manifest, profile).into_iter().collect(),
                },
                format!("apps[{i}].installed_app_sends[{j}]"),
            )?;
        }
    }
    Ok(out.into_values().collect())
}

fn expected_pasteboard(manifest: &LeakManifest) -> Vec<PasteboardEntry> {
    let mut entries: BTreeMap<(&str, &str), PasteboardEntry> = BTreeMap::new();
    for app in &manifest.apps {
        for op in app.pasteboard.iter().filter(|op| op.op == PasteboardOpKind::Write) {
            let e = entries
                .entry((op.name.as_str(), op.value.as_str()))
                .or_insert_with(|| PasteboardEntry {
                    name: op.name.clone(),
                    pb_types: BTreeSet::new(),
                    value: op.value.clone(),
                    writers: BTreeSet::new(),
                    readers: BTreeSet::new(),
                });
            e.pb_types.insert(op.pb_type.clone());
            e.writers.insert(app.app_id.clone());
        }
    }
    for app in &manifest.apps {
        for op in app.pasteboard.iter().filter(|op| op.op == PasteboardOpKind::Read) {
            if let Some(e) = entries.get_mut(&(op.name.as_str(), op.value.as_str())) {
                e.readers.insert(app.app_id.clone());
            }
        }
    }
    entries.into_values().collect()
}

/// Aggregate statistics implied by the manifest, without generating events.
pub fn expected_stats(manifest: &LeakManifest, profile: &DeviceProfile) -> Result<AggregateStats> {
    let findings = expected_findings(manifest, profile)?;
    stats_from_expected(manifest, &findings)
}

fn stats_from_expected(manifest: &LeakManifest, findings: &[ExpectedFinding]) -> Result<AggregateStats> {
    let mut knowledge: BTreeMap<(String, Channel), BTreeSet<String>> = BTreeMap::new();
    let flows = findings
        .iter()
        .map(|f| {
            if f.pii_kind == PiiKind::InstalledApps && f.party == PartyClass::ThirdParty {
                knowledge
                    .entry((f.destination.clone(), f.channel))
                    .or_default()
                    .extend(f.values.iter().cloned());
            }
            Flow {
                app_id: f.app_id.clone(),
                pii_kind: f.pii_kind,
                destination: f.destination.clone(),
                party: f.party,
                channel: f.channel,
                modified: f.modified,
            }
        })
        .collect();
    aggregate_stats(&StatsInput {
        platform: manifest.platform,
        apps: manifest.apps.iter().map(|a| a.app_id.clone()).collect(),
        flows,
        pasteboard: expected_pasteboard(manifest),
        knowledge: knowledge
            .into_iter()
            .map(|((domain, channel), apps)| KnowledgeRow { domain, channel, apps })
            .collect(),
    })
}

/// What a generated payload must match: (kind, chain, value text).
type Intent = BTreeSet<(PiiKind, Vec<ModifyApi>, String)>;

struct PendingSend {
    host: String,
    channel: Channel,
    /// Bytes embedded in the payload as one query field, if any.
    field: Option<Vec<u8>>,
    user_agent: Option<String>,
    intent: Intent,
    location: String,
}

/// Needles indexed by first byte for direct scanning.
struct DirectScanner {
    by_first: HashMap<u8, Vec<Needle>>,
}

impl DirectScanner {
    fn new(needles: impl IntoIterator<Item = Needle>) -> Self {
        let mut by_first: HashMap<u8, Vec<Needle>> = HashMap::new();
        for n in needles {
            if let Some(&b) = n.bytes.first() {
                by_first.entry(b).or_default().push(n);
            }
        }
        DirectScanner { by_first }
    }

    fn scan_view(&self, hay: &[u8], out: &mut Intent) {
        for i in 0..hay.len() {
            if let Some(cands) = self.by_first.get(&hay[i]) {
                for n in cands {
                    if hay[i..].starts_with(&n.bytes) {
                        out.insert((n.pii_kind, n.chain.clone(), n.origin.clone()));
                    }
                }
            }
        }
    }

    fn scan(&self, payload: &[u8]) -> Intent {
        let mut out = Intent::new();
        self.scan_view(payload, &mut out);
        if let Some(decoded) = decoded_view(payload) {
            self.scan_view(&decoded, &mut out);
        }
        out
    }
}

fn filler_word(rng: &mut ChaCha8Rng, min: usize, max: usize) -> Vec<u8> {
    let len = rng.gen_range(min..=max);
    (0..len)
        .map(|_| FILLER_ALPHABET[rng.gen_range(0..FILLER_ALPHABET.len())])
        .collect()
}

/// Query-string payload of filler fields, with `field` at a random position.
fn build_payload(rng: &mut ChaCha8Rng, field: Option<&[u8]>) -> Vec<u8> {
    let n = rng.gen_range(2..=4);
    let mut fields: Vec<Vec<u8>> = (0..n)
        .map(|_| {
            let mut f = filler_word(rng, 1, 3);
            f.push(b'=');
            f.extend(filler_word(rng, 4, 12));
            f
        })
        .collect();
    if let Some(value) = field {
        let mut f = filler_word(rng, 1, 3);
        f.push(b'=');
        f.extend_from_slice(value);
        let at = rng.gen_range(0..=fields.len());
        fields.insert(at, f);
    }
    fields.join(&b'&')
}

fn embed(bytes: &[u8], how: Embed) -> Vec<u8> {
    match how {
        Embed::Raw => bytes.to_vec(),
        Embed::HexLower => hex::encode(bytes).into_bytes(),
        Embed::HexUpper => hex::encode_upper(bytes).into_bytes(),
        Embed::PercentEncoded => percent_encode(bytes, NON_ALPHANUMERIC).to_string().into_bytes(),
    }
}

fn user_agent_for(platform: Platform, names: &[String]) -> String {
    match platform {
        Platform::Android => format!("Dalvik/1.6.0 (Linux; U; Android 4.4.2) {}", names.join(" ")),
        Platform::Ios => format!("{} CFNetwork/672.1.15 Darwin/14.0.0", names.join(" ")),
    }
}

/// Generates the trace for `manifest` and the ground truth it implies.
pub fn synthesize_trace(
    manifest: &LeakManifest,
    profile: &DeviceProfile,
    seed: u64,
    config: &SynthConfig,
) -> Result<(EventTrace, GroundTruth)> {
    let findings = expected_findings(manifest, profile)?;
    let mut device = profile.clone();
    device.extend_apps(manifest.apps.iter().map(|a| a.app_id.as_str()));
    let installed = needles_for(&device, PiiKind::InstalledApps, config.min_needle_len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    let mut next_seq = 1u64;
    for (i, app) in manifest.apps.iter().enumerate() {
        let bodies = app_bodies(i, app, manifest, &device, &installed, config, &mut rng)?;
        let start = manifest.t0_ms + i as i64 * APP_WINDOW_MS;
        let mut stamps: Vec<i64> = (0..bodies.len())
            .map(|_| rng.gen_range(start..start + APP_WINDOW_MS))
            .collect();
        stamps.sort_unstable();
        for (body, ts_ms) in bodies.into_iter().zip(stamps) {
            events.push(Event {
                seq: next_seq,
                ts_ms,
                platform: manifest.platform,
                app_id: app.app_id.clone(),
                body,
            });
            next_seq += 1;
        }
    }
    let trace = EventTrace::from_events(events)?;
    let stats = stats_from_expected(manifest, &findings)?;
    let truth = GroundTruth {
        platform: manifest.platform,
        apps: manifest.apps.iter().map(|a| a.app_id.clone()).collect(),
        findings,
        stats,
    };
    Ok((trace, truth))
}

fn app_bodies(
    index: usize,
    app: &AppBehavior,
    manifest: &LeakManifest,
    device: &DeviceProfile,
    installed: &NeedleSet,
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<EventBody>> {
    let min_len = config.min_needle_len;
    let mut bodies = Vec::new();

    // access events: values used by leaks, else the profile's first value
    let mut base = NeedleSet::default();
    for kind in &app.accesses {
        let mut values: Vec<Vec<u8>> = Vec::new();
        for row in app.leaks.iter().filter(|r| r.pii_kind == *kind) {
            let v = leak_value(row, device);
            if !values.contains(&v) {
                values.push(v);
            }
        }
        if values.is_empty() {
            match device.values(*kind).first() {
                Some(v) => values.push(v.clone()),
                None => {
                    return Err(Error::manifest(
                        format!("apps[{index}] ({})", app.app_id),
                        format!("no {kind} value to access"),
                    ))
                }
            }
        }
        base.extend(needles_for(device, *kind, min_len));
        for value in values {
            base.extend(value_needles(*kind, &value, &display_text(&value), min_len));
            bodies.push(EventBody::PiiAccess(PiiAccess {
                pii_kind: *kind,
                value,
            }));
        }
    }
    for op in &app.pasteboard {
        let p = Pasteboard {
            name: op.name.clone(),
            pb_type: op.pb_type.clone(),
            value: op.value.as_bytes().to_vec(),
        };
        base.extend(value_needles(PiiKind::PasteboardId, &p.value, &op.value, min_len));
        bodies.push(match op.op {
            PasteboardOpKind::Write => EventBody::PasteboardWrite(p),
            PasteboardOpKind::Read => EventBody::PasteboardRead(p),
        });
    }
    base.extend(installed.clone());

    let mut mods: Vec<DataModify> = Vec::new();
    let mut sends: Vec<PendingSend> = Vec::new();
    for (j, row) in app.leaks.iter().enumerate() {
        let value = leak_value(row, device);
        let mut current = value.clone();
        for api in &row.chain {
            let output = transform::apply(*api, &current, rng.gen());
            mods.push(DataModify {
                api: *api,
                input: current,
                output: output.clone(),
            });
            current = output;
        }
        sends.push(PendingSend {
            host: row.destination.clone(),
            channel: row.channel,
            field: Some(embed(&current, row.embed)),
            user_agent: None,
            intent: [(row.pii_kind, row.chain.clone(), display_text(&value))].into(),
            location: format!("apps[{index}] ({}).leaks[{j}]", app.app_id),
        });
    }
    for (j, send) in app.installed_app_sends.iter().enumerate() {
        let ids = selected_apps(&send.apps, manifest, device);
        let names: Vec<String> = ids
            .iter()
            .map(|id| device.app(id).map_or_else(|| id.clone(), |m| m.package.clone()))
            .collect();
        let intent: Intent = ids
            .iter()
            .map(|id| (PiiKind::InstalledApps, Vec::new(), id.clone()))
            .collect();
        let (field, user_agent) = match send.via {
            SendVia::Payload => (Some(names.join(",").into_bytes()), None),
            SendVia::UserAgent => (None, Some(user_agent_for(manifest.platform, &names))),
        };
        sends.push(PendingSend {
            host: send.destination.clone(),
            channel: send.channel,
            field,
            user_agent,
            intent,
            location: format!("apps[{index}] ({}).installed_app_sends[{j}]", app.app_id),
        });
    }

    let derived = resolve_modification_chains(mods.iter(), &base.needles, config.max_depth, min_len);
    let scanner = DirectScanner::new(base.needles.iter().cloned().chain(derived));
    let agent_scanner = DirectScanner::new(installed.needles.iter().cloned());

    bodies.extend(mods.into_iter().map(EventBody::DataModify));
    for send in sends {
        if let Some(ua) = &send.user_agent {
            let got = agent_scanner.scan(ua.as_bytes());
            if got != send.intent {
                return Err(stray(&send.location, &send.intent, &got));
            }
        }
        let payload_intent = if send.field.is_some() { send.intent.clone() } else { Intent::new() };
        let mut accepted = None;
        let mut last = Intent::new();
        for _ in 0..MAX_FILLER_TRIES {
            let payload = build_payload(rng, send.field.as_deref());
            last = scanner.scan(&payload);
            if last == payload_intent {
                accepted = Some(payload);
                break;
            }
        }
        let Some(payload) = accepted else {
            return Err(stray(&send.location, &payload_intent, &last));
        };
        bodies.push(EventBody::NetTransmit(NetTransmit {
            destination_host: send.host,
            channel: send.channel,
            payload,
            user_agent: send.user_agent,
        }));
    }

    let mut noise_rng = ChaCha8Rng::seed_from_u64(app.noise.seed ^ rng.gen::<u64>());
    let noise_count = if bodies.is_empty() { app.noise.count.max(1) } else { app.noise.count };
    for k in 0..noise_count {
        let payload = (0..MAX_FILLER_TRIES)
            .map(|_| build_payload(&mut noise_rng, None))
            .find(|p| scanner.scan(p).is_empty())
            .ok_or_else(|| {
                Error::manifest(format!("apps[{index}] ({}).noise", app.app_id), "filler keeps matching needles")
            })?;
        if k % 3 == 2 {
            bodies.push(EventBody::DataModify(DataModify {
                api: ModifyApi::HashSha1,
                output: transform::apply(ModifyApi::HashSha1, &payload, 0),
                input: payload,
            }));
        } else {
            let host = NOISE_HOSTS[noise_rng.gen_range(0..NOISE_HOSTS.len())];
            bodies.push(EventBody::NetTransmit(NetTransmit {
                destination_host: host.to_string(),
                channel: if noise_rng.gen_bool(0.5) { Channel::Ssl } else { Channel::Clear },
                payload,
                user_agent: None,
            }));
        }
    }
    Ok(bodies)
}

fn stray(location: &str, want: &Intent, got: &Intent) -> Error {
    let fmt = |s: &Intent| -> String {
        s.iter()
            .map(|(k, c, v)| {
                let chain: Vec<&str> = c.iter().map(|a| a.as_str()).collect();
                format!("{k}[{}]={v}", chain.join(">"))
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    Error::manifest(
        location,
        format!("payload matches {{{}}} but should match {{{}}}", fmt(got), fmt(want)),
    )
}
