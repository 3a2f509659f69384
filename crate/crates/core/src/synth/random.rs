//! Random device profiles and manifests for property tests and benchmarks.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{AppMeta, DeviceProfile, PiiKind, Platform};
use crate::party::{normalize_destination, TrackerList};
use crate::synth::manifest::{
    AllApps, AppBehavior, AppSelection, Embed, InstalledAppSend, LeakManifest, LeakRow, Noise, PasteboardOp,
    PasteboardOpKind, ProfileRef, SendVia,
};
use crate::party::PartyClass;
use crate::trace::{Channel, ModifyApi};

#[derive(Debug, Clone)]
pub struct RandomSpec {
    pub platform: Platform,
    pub apps: usize,
    pub leaks: usize,
    /// Number of modifications applied to each leaked value.
    pub chain_depth: RangeInclusive<usize>,
    pub noise_per_app: usize,
    pub pasteboard: bool,
    pub installed_app_sends: bool,
}

impl RandomSpec {
    pub fn new(platform: Platform, apps: usize, leaks: usize) -> Self {
        RandomSpec {
            platform,
            apps,
            leaks,
            chain_depth: 0..=2,
            noise_per_app: 2,
            pasteboard: true,
            installed_app_sends: true,
        }
    }
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ru", "zen", "tor", "bel", "da", "fi", "ne", "vo", "sa", "lu", "ri", "po", "ma", "te",
    "qua", "xen", "yo", "bri", "cla", "dro", "fe",
];

const FIRST_NAMES: &[&str] = &["Alice", "Bruno", "Chloe", "Denis", "Elodie", "Farid", "Gaelle", "Hugo"];
const LAST_NAMES: &[&str] = &["Martin", "Bernard", "Dubois", "Laurent", "Moreau", "Lefebvre"];
const OPERATORS: &[&str] = &["Orange F", "SFR Mobile", "Bouygues Tel", "Free Mobile"];

fn digits(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| char::from(b'0' + rng.gen_range(0..10u8))).collect()
}

fn hex_string(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| char::from_digit(rng.gen_range(0..16), 16).unwrap()).collect()
}

fn uuid(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{}-{}-{}-{}-{}",
        hex_string(rng, 8),
        hex_string(rng, 4),
        hex_string(rng, 4),
        hex_string(rng, 4),
        hex_string(rng, 12)
    )
}

fn mac(rng: &mut ChaCha8Rng) -> String {
    (0..6).map(|_| hex_string(rng, 2)).collect::<Vec<_>>().join(":")
}

fn person(rng: &mut ChaCha8Rng) -> String {
    format!("{} {}", FIRST_NAMES.choose(rng).unwrap(), LAST_NAMES.choose(rng).unwrap())
}

fn word(rng: &mut ChaCha8Rng) -> String {
    let mut w = String::new();
    while w.len() < 6 {
        w.push_str(SYLLABLES.choose(rng).unwrap());
    }
    w
}

fn location(rng: &mut ChaCha8Rng) -> String {
    format!("{}.{},{}.{}", rng.gen_range(43..50), digits(rng, 5), rng.gen_range(1..7), digits(rng, 5))
}

fn profile_values(platform: Platform, rng: &mut ChaCha8Rng, p: &mut DeviceProfile) {
    let mut put = |kind: PiiKind, v: String| p.push_value(kind, v.into_bytes()).expect("non-empty");
    let phone = format!("+336{}", digits(rng, 8));
    put(PiiKind::WifiMac, mac(rng));
    put(PiiKind::Location, location(rng));
    put(PiiKind::Accounts, format!("{}.{}@mailbox.org", word(rng), digits(rng, 3)));
    match platform {
        Platform::Android => {
            put(PiiKind::Imei, format!("35{}", digits(rng, 13)));
            put(PiiKind::Imsi, format!("310{}", digits(rng, 12)));
            put(PiiKind::AndroidId, hex_string(rng, 16));
            put(PiiKind::SerialNo, hex_string(rng, 12).to_ascii_uppercase());
            put(PiiKind::PhoneNo, phone);
            put(PiiKind::Contacts, person(rng));
            put(PiiKind::OperatorName, OPERATORS.choose(rng).unwrap().to_string());
            put(PiiKind::SimNetworkCode, format!("208{}", digits(rng, 3)));
            put(PiiKind::WifiScanConfig, format!("ssid=HomeNet-{}", digits(rng, 4)));
        }
        Platform::Ios => {
            put(PiiKind::Udid, hex_string(rng, 40));
            put(PiiKind::AdIdentifier, uuid(rng));
            put(PiiKind::IdentifierForVendor, uuid(rng));
            put(PiiKind::DeviceName, format!("{}'s iPhone", FIRST_NAMES.choose(rng).unwrap()));
            put(PiiKind::AddressBook, person(rng));
            put(PiiKind::SimNetworkName, OPERATORS.choose(rng).unwrap().to_string());
            put(PiiKind::SimNumber, phone);
        }
    }
}

/// A random device with `apps` installed apps. Returns the app ids in order
/// and the vendor token of each app (its first-party domain label).
fn random_profile(spec: &RandomSpec, rng: &mut ChaCha8Rng, trackers: &TrackerList) -> (DeviceProfile, Vec<(String, String)>) {
    let mut profile = DeviceProfile::new(spec.platform);
    profile_values(spec.platform, rng, &mut profile);
    let tracker_labels: BTreeSet<String> = trackers
        .entries()
        .map(|e| normalize_destination(e).registrable.split('.').next().unwrap_or_default().to_string())
        .collect();
    let mut used = BTreeSet::new();
    let mut apps = Vec::new();
    while apps.len() < spec.apps {
        let vendor = word(rng);
        let name = word(rng);
        if tracker_labels.contains(&vendor)
            || tracker_labels.contains(&name)
            || used.contains(&vendor)
            || used.contains(&name)
            || vendor == name
        {
            continue;
        }
        used.insert(vendor.clone());
        used.insert(name.clone());
        let package = format!("com.{vendor}.{name}");
        let mut display = name.clone();
        display[..1].make_ascii_uppercase();
        let app_id = match spec.platform {
            Platform::Android => package.clone(),
            Platform::Ios => display.clone(),
        };
        profile.insert_app(AppMeta {
            app_id: app_id.clone(),
            package,
            display,
        });
        apps.push((app_id, vendor));
    }
    (profile, apps)
}

fn leakable_kinds(platform: Platform) -> Vec<PiiKind> {
    PiiKind::for_platform(platform)
        .iter()
        .copied()
        .filter(|k| !matches!(k, PiiKind::InstalledApps | PiiKind::PasteboardId))
        .collect()
}

/// Generates a random manifest (with the profile inlined) and its profile.
pub fn random_world(spec: &RandomSpec, seed: u64) -> (LeakManifest, DeviceProfile) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trackers = TrackerList::bundled();
    let (profile, apps) = random_profile(spec, &mut rng, &trackers);
    let third: Vec<String> = trackers
        .entries()
        .filter(|e| normalize_destination(e).registrable == *e)
        .map(String::from)
        .collect();
    let kinds = leakable_kinds(spec.platform);
    let mut behaviors: Vec<AppBehavior> = apps
        .iter()
        .map(|(id, _)| AppBehavior {
            app_id: id.clone(),
            accesses: vec![],
            leaks: vec![],
            pasteboard: vec![],
            installed_app_sends: vec![],
            noise: Noise {
                count: spec.noise_per_app,
                seed: rng.gen(),
            },
        })
        .collect();

    for _ in 0..spec.leaks {
        if behaviors.is_empty() {
            break;
        }
        let a = rng.gen_range(0..behaviors.len());
        let kind = *kinds.choose(&mut rng).unwrap();
        let (destination, party) = match rng.gen_range(0..4) {
            0 => (format!("api.{}.com", apps[a].1), PartyClass::FirstParty),
            1 => (
                format!("{}.{}.{}.{}", rng.gen_range(11..200), rng.gen_range(0..256), rng.gen_range(0..256), rng.gen_range(1..255)),
                PartyClass::Unidentified,
            ),
            _ => {
                let host = third.choose(&mut rng).unwrap();
                let host = if rng.gen_bool(0.5) { format!("data.{host}") } else { host.clone() };
                (host, PartyClass::ThirdParty)
            }
        };
        let depth = rng.gen_range(spec.chain_depth.clone());
        let chain: Vec<ModifyApi> = (0..depth).map(|_| *ModifyApi::ALL.choose(&mut rng).unwrap()).collect();
        let embed = *[Embed::Raw, Embed::HexLower, Embed::HexUpper, Embed::PercentEncoded]
            .choose(&mut rng)
            .unwrap();
        let b = &mut behaviors[a];
        if !b.accesses.contains(&kind) {
            b.accesses.push(kind);
        }
        b.leaks.push(LeakRow {
            pii_kind: kind,
            destination,
            channel: if rng.gen_bool(0.5) { Channel::Ssl } else { Channel::Clear },
            chain,
            party,
            embed,
            value: None,
        });
    }

    if spec.pasteboard && spec.platform == Platform::Ios && behaviors.len() >= 2 {
        let value = uuid(&mut rng).to_ascii_uppercase();
        let name = "com.flurry.pasteboard".to_string();
        let writer = rng.gen_range(0..behaviors.len());
        let reader = (writer + 1) % behaviors.len();
        let op = |op| PasteboardOp {
            op,
            name: name.clone(),
            pb_type: "public.utf8-plain-text".into(),
            value: value.clone(),
        };
        behaviors[writer].pasteboard.push(op(PasteboardOpKind::Write));
        behaviors[reader].pasteboard.push(op(PasteboardOpKind::Read));
        for i in [writer, reader] {
            behaviors[i].leaks.push(LeakRow {
                pii_kind: PiiKind::PasteboardId,
                destination: "data.flurry.com".into(),
                channel: Channel::Ssl,
                chain: vec![],
                party: PartyClass::ThirdParty,
                embed: Embed::Raw,
                value: Some(value.clone()),
            });
        }
    }

    if spec.installed_app_sends && !behaviors.is_empty() {
        let all = rng.gen_range(0..behaviors.len());
        behaviors[all].installed_app_sends.push(InstalledAppSend {
            destination: "trademob.com".into(),
            channel: Channel::Ssl,
            party: PartyClass::ThirdParty,
            apps: AppSelection::All(AllApps::All),
            via: SendVia::Payload,
        });
        let own = rng.gen_range(0..behaviors.len());
        let id = behaviors[own].app_id.clone();
        behaviors[own].installed_app_sends.push(InstalledAppSend {
            destination: "data.flurry.com".into(),
            channel: Channel::Clear,
            party: PartyClass::ThirdParty,
            apps: AppSelection::List(vec![id]),
            via: SendVia::UserAgent,
        });
    }

    let inline: serde_json::Value = serde_json::from_str(&profile.to_json()).expect("profile json");
    let manifest = LeakManifest {
        platform: spec.platform,
        profile: ProfileRef::Inline(inline),
        t0_ms: 1_400_000_000_000,
        apps: behaviors,
    };
    (manifest, profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_world_is_valid_and_deterministic() {
        for platform in [Platform::Android, Platform::Ios] {
            let spec = RandomSpec::new(platform, 12, 40);
            let (m, p) = random_world(&spec, 5);
            m.validate(&p).unwrap();
            assert_eq!(m.load_profile(std::path::Path::new(".")).unwrap(), p);
            assert_eq!(random_world(&spec, 5).0, m);
            assert_eq!(m.apps.len(), 12);
        }
    }
}
