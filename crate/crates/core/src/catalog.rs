//! PII taxonomy, identifier stability classes and device profiles.
//!
//! A [`DeviceProfile`] holds the ground-truth values of the instrumented
//! device. Search needles are derived from it with [`needles_for`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::{Needle, Representation};

/// Default minimum needle length in bytes.
pub const DEFAULT_MIN_NEEDLE_LEN: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Android,
    Ios,
}

impl Platform {
    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Android => "android",
            Platform::Ios => "ios",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Platform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "android" => Ok(Platform::Android),
            "ios" => Ok(Platform::Ios),
            other => Err(Error::config(format!("unknown platform {other:?}"))),
        }
    }
}

/// Kinds of personal data tracked by the hook layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiiKind {
    // android
    Imei,
    Imsi,
    AndroidId,
    SerialNo,
    PhoneNo,
    Contacts,
    OperatorName,
    SimNetworkCode,
    WifiScanConfig,
    // shared
    WifiMac,
    Location,
    Accounts,
    InstalledApps,
    // ios
    Udid,
    AdIdentifier,
    IdentifierForVendor,
    DeviceName,
    PasteboardId,
    AddressBook,
    SimNetworkName,
    SimNumber,
}

/// How hard an identifier is to change for the user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    HardwareTied,
    SimTied,
    OsTied,
    UserResettable,
    ThirdPartyGenerated,
    UserData,
}

const ANDROID_KINDS: &[PiiKind] = &[
    PiiKind::Imei,
    PiiKind::Imsi,
    PiiKind::AndroidId,
    PiiKind::SerialNo,
    PiiKind::WifiMac,
    PiiKind::PhoneNo,
    PiiKind::Location,
    PiiKind::Accounts,
    PiiKind::Contacts,
    PiiKind::OperatorName,
    PiiKind::SimNetworkCode,
    PiiKind::WifiScanConfig,
    PiiKind::InstalledApps,
];

const IOS_KINDS: &[PiiKind] = &[
    PiiKind::Udid,
    PiiKind::AdIdentifier,
    PiiKind::IdentifierForVendor,
    PiiKind::DeviceName,
    PiiKind::WifiMac,
    PiiKind::PasteboardId,
    PiiKind::Location,
    PiiKind::AddressBook,
    PiiKind::Accounts,
    PiiKind::SimNetworkName,
    PiiKind::SimNumber,
    PiiKind::InstalledApps,
];

const ANDROID_MANDATORY: &[PiiKind] = &[
    PiiKind::Imei,
    PiiKind::Imsi,
    PiiKind::AndroidId,
    PiiKind::SerialNo,
    PiiKind::WifiMac,
    PiiKind::PhoneNo,
];

const IOS_MANDATORY: &[PiiKind] = &[
    PiiKind::Udid,
    PiiKind::AdIdentifier,
    PiiKind::IdentifierForVendor,
    PiiKind::DeviceName,
    PiiKind::WifiMac,
];

impl PiiKind {
    pub const ALL: &'static [PiiKind] = &[
        PiiKind::Imei,
        PiiKind::Imsi,
        PiiKind::AndroidId,
        PiiKind::SerialNo,
        PiiKind::PhoneNo,
        PiiKind::Contacts,
        PiiKind::OperatorName,
        PiiKind::SimNetworkCode,
        PiiKind::WifiScanConfig,
        PiiKind::WifiMac,
        PiiKind::Location,
        PiiKind::Accounts,
        PiiKind::InstalledApps,
        PiiKind::Udid,
        PiiKind::AdIdentifier,
        PiiKind::IdentifierForVendor,
        PiiKind::DeviceName,
        PiiKind::PasteboardId,
        PiiKind::AddressBook,
        PiiKind::SimNetworkName,
        PiiKind::SimNumber,
    ];

    pub fn for_platform(platform: Platform) -> &'static [PiiKind] {
        match platform {
            Platform::Android => ANDROID_KINDS,
            Platform::Ios => IOS_KINDS,
        }
    }

    /// Identifier kinds a profile for `platform` must declare.
    pub fn mandatory(platform: Platform) -> &'static [PiiKind] {
        match platform {
            Platform::Android => ANDROID_MANDATORY,
            Platform::Ios => IOS_MANDATORY,
        }
    }

    pub fn on_platform(self, platform: Platform) -> bool {
        Self::for_platform(platform).contains(&self)
    }

    pub fn stability(self) -> StabilityClass {
        use PiiKind::*;
        match self {
            Imei | WifiMac | Udid => StabilityClass::HardwareTied,
            Imsi | PhoneNo | SimNetworkCode | SimNetworkName | SimNumber => StabilityClass::SimTied,
            AndroidId | SerialNo | IdentifierForVendor | DeviceName => StabilityClass::OsTied,
            AdIdentifier => StabilityClass::UserResettable,
            PasteboardId => StabilityClass::ThirdPartyGenerated,
            Location | Accounts | Contacts | OperatorName | WifiScanConfig | InstalledApps
            | AddressBook => StabilityClass::UserData,
        }
    }

    /// Kinds that hold several values per device (one per entry).
    pub fn is_multi_valued(self) -> bool {
        matches!(
            self,
            PiiKind::Accounts | PiiKind::Contacts | PiiKind::AddressBook | PiiKind::WifiScanConfig
        )
    }

    /// Values generated by the system or at run time, which an observer on
    /// the network cannot know in advance.
    pub fn is_system_generated(self) -> bool {
        matches!(
            self,
            PiiKind::AndroidId
                | PiiKind::SerialNo
                | PiiKind::Udid
                | PiiKind::AdIdentifier
                | PiiKind::IdentifierForVendor
                | PiiKind::PasteboardId
                | PiiKind::Location
                | PiiKind::WifiScanConfig
        )
    }

    /// Unique identifiers counted in the "sends at least one identifier"
    /// statistic for each platform.
    pub fn is_unique_identifier(self, platform: Platform) -> bool {
        use PiiKind::*;
        match platform {
            Platform::Android => {
                matches!(self, Imei | Imsi | AndroidId | SerialNo | PhoneNo | WifiMac)
            }
            Platform::Ios => matches!(self, AdIdentifier | Udid | DeviceName | WifiMac | PasteboardId),
        }
    }

    pub fn as_str(self) -> &'static str {
        use PiiKind::*;
        match self {
            Imei => "imei",
            Imsi => "imsi",
            AndroidId => "android_id",
            SerialNo => "serial_no",
            PhoneNo => "phone_no",
            Contacts => "contacts",
            OperatorName => "operator_name",
            SimNetworkCode => "sim_network_code",
            WifiScanConfig => "wifi_scan_config",
            WifiMac => "wifi_mac",
            Location => "location",
            Accounts => "accounts",
            InstalledApps => "installed_apps",
            Udid => "udid",
            AdIdentifier => "ad_identifier",
            IdentifierForVendor => "identifier_for_vendor",
            DeviceName => "device_name",
            PasteboardId => "pasteboard_id",
            AddressBook => "address_book",
            SimNetworkName => "sim_network_name",
            SimNumber => "sim_number",
        }
    }

    /// Human-readable column title.
    pub fn title(self) -> &'static str {
        use PiiKind::*;
        match self {
            Imei => "IMEI",
            Imsi => "IMSI",
            AndroidId => "AndroidID",
            SerialNo => "SerialNo",
            PhoneNo => "PhoneNo",
            Contacts => "Contacts",
            OperatorName => "Operator Name",
            SimNetworkCode => "SIM Network code",
            WifiScanConfig => "WiFi Scan/Config",
            WifiMac => "WiFi MAC",
            Location => "Location",
            Accounts => "Accounts",
            InstalledApps => "Installed Apps",
            Udid => "UDID",
            AdIdentifier => "AdIdentifier",
            IdentifierForVendor => "IdentifierForVendor",
            DeviceName => "DeviceName",
            PasteboardId => "Pasteboard IDs",
            AddressBook => "AddressBook",
            SimNetworkName => "SIM Network Name",
            SimNumber => "SIM Number",
        }
    }
}

impl fmt::Display for PiiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PiiKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PiiKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown PII kind {s:?}")))
    }
}

/// Names under which an app is known on the device.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AppMeta {
    pub app_id: String,
    pub package: String,
    pub display: String,
}

impl AppMeta {
    /// Metadata for an app seen only in a trace: both names default to the id.
    pub fn bare(app_id: &str) -> Self {
        AppMeta {
            app_id: app_id.to_string(),
            package: app_id.to_string(),
            display: app_id.to_string(),
        }
    }
}

/// Ground-truth identifier and personal-data values of one device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceProfile {
    pub platform: Platform,
    values: BTreeMap<PiiKind, Vec<Vec<u8>>>,
    apps: BTreeMap<String, AppMeta>,
}

#[derive(Serialize, Deserialize)]
struct ProfileDoc {
    platform: Platform,
    #[serde(default)]
    identifiers: BTreeMap<String, String>,
    #[serde(default)]
    multi: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    apps: BTreeMap<String, AppNamesDoc>,
}

#[derive(Serialize, Deserialize)]
struct AppNamesDoc {
    package: String,
    display: String,
}

impl DeviceProfile {
    pub fn new(platform: Platform) -> Self {
        DeviceProfile {
            platform,
            values: BTreeMap::new(),
            apps: BTreeMap::new(),
        }
    }

    /// Parses a profile document and checks that every mandatory identifier
    /// of its platform is present.
    pub fn from_json(document: &str) -> Result<Self> {
        let doc: ProfileDoc = serde_json::from_str(document)
            .map_err(|e| Error::config(format!("profile document: {e}")))?;
        let mut profile = DeviceProfile::new(doc.platform);
        for (name, value) in doc.identifiers {
            let kind = profile.kind_for_key(&name)?;
            profile.push_value(kind, value.into_bytes())?;
        }
        for (name, values) in doc.multi {
            let kind = profile.kind_for_key(&name)?;
            for value in values {
                profile.push_value(kind, value.into_bytes())?;
            }
        }
        for (app_id, names) in doc.apps {
            if app_id.is_empty() || names.package.is_empty() || names.display.is_empty() {
                return Err(Error::config(format!("app entry {app_id:?} has an empty name")));
            }
            profile.apps.insert(
                app_id.clone(),
                AppMeta {
                    app_id,
                    package: names.package,
                    display: names.display,
                },
            );
        }
        profile.check_mandatory()?;
        Ok(profile)
    }

    pub fn to_json(&self) -> String {
        let mut identifiers = BTreeMap::new();
        let mut multi = BTreeMap::new();
        for (kind, values) in &self.values {
            let text: Vec<String> = values.iter().map(|v| display_text(v)).collect();
            if kind.is_multi_valued() || text.len() > 1 {
                multi.insert(kind.as_str().to_string(), text);
            } else if let Some(first) = text.into_iter().next() {
                identifiers.insert(kind.as_str().to_string(), first);
            }
        }
        let apps = self
            .apps
            .values()
            .map(|m| {
                (
                    m.app_id.clone(),
                    AppNamesDoc {
                        package: m.package.clone(),
                        display: m.display.clone(),
                    },
                )
            })
            .collect();
        let doc = ProfileDoc {
            platform: self.platform,
            identifiers,
            multi,
            apps,
        };
        serde_json::to_string_pretty(&doc).expect("profile serializes")
    }

    fn kind_for_key(&self, name: &str) -> Result<PiiKind> {
        let kind: PiiKind = name.parse()?;
        if !kind.on_platform(self.platform) {
            return Err(Error::config(format!(
                "{kind} is not a {} PII kind",
                self.platform
            )));
        }
        if kind == PiiKind::InstalledApps {
            return Err(Error::config("installed apps are declared in the \"apps\" section"));
        }
        Ok(kind)
    }

    pub fn push_value(&mut self, kind: PiiKind, value: Vec<u8>) -> Result<()> {
        if value.is_empty() {
            return Err(Error::config(format!("empty value for {kind}")));
        }
        let slot = self.values.entry(kind).or_default();
        if !slot.contains(&value) {
            slot.push(value);
        }
        Ok(())
    }

    pub fn insert_app(&mut self, meta: AppMeta) {
        self.apps.insert(meta.app_id.clone(), meta);
    }

    fn check_mandatory(&self) -> Result<()> {
        let missing: Vec<&str> = PiiKind::mandatory(self.platform)
            .iter()
            .filter(|k| !self.values.contains_key(k))
            .map(|k| k.as_str())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::config(format!(
                "{} profile is missing mandatory identifiers: {}",
                self.platform,
                missing.join(", ")
            )))
        }
    }

    pub fn values(&self, kind: PiiKind) -> &[Vec<u8>] {
        self.values.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn kinds(&self) -> impl Iterator<Item = PiiKind> + '_ {
        self.values.keys().copied()
    }

    pub fn apps(&self) -> impl Iterator<Item = &AppMeta> {
        self.apps.values()
    }

    pub fn app(&self, app_id: &str) -> Option<&AppMeta> {
        self.apps.get(app_id)
    }

    /// Adds a bare entry for every app id not already declared.
    pub fn extend_apps<'a>(&mut self, app_ids: impl IntoIterator<Item = &'a str>) {
        for id in app_ids {
            if !self.apps.contains_key(id) {
                self.apps.insert(id.to_string(), AppMeta::bare(id));
            }
        }
    }

    /// Restriction to the values a user could know in advance (what a
    /// network observer can search for).
    pub fn user_known(&self) -> DeviceProfile {
        DeviceProfile {
            platform: self.platform,
            values: self
                .values
                .iter()
                .filter(|(k, _)| !k.is_system_generated())
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            apps: self.apps.clone(),
        }
    }
}

/// Needles derived for one kind, plus the candidates dropped for being
/// shorter than the configured minimum.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NeedleSet {
    pub needles: BTreeSet<Needle>,
    pub dropped: Vec<DroppedNeedle>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DroppedNeedle {
    pub pii_kind: PiiKind,
    pub origin: String,
    pub bytes: Vec<u8>,
}

impl NeedleSet {
    pub fn extend(&mut self, other: NeedleSet) {
        self.needles.extend(other.needles);
        self.dropped.extend(other.dropped);
    }
}

/// Search needles for every profile value of `kind`.
pub fn needles_for(profile: &DeviceProfile, kind: PiiKind, min_len: usize) -> NeedleSet {
    let mut set = NeedleSet::default();
    if kind == PiiKind::InstalledApps {
        for app in profile.apps() {
            let mut names = vec![app.package.as_bytes()];
            if app.display != app.package {
                names.push(app.display.as_bytes());
            }
            for name in names {
                set.extend(value_needles(kind, name, &app.app_id, min_len));
            }
        }
        return set;
    }
    for value in profile.values(kind) {
        set.extend(value_needles(kind, value, &display_text(value), min_len));
    }
    set
}

/// Needles for a single value: the raw bytes, their hex text in both cases,
/// and separator/case variants for MAC- and UUID-shaped text.
pub fn value_needles(kind: PiiKind, value: &[u8], origin: &str, min_len: usize) -> NeedleSet {
    let mut candidates: Vec<(Vec<u8>, Representation)> = Vec::new();
    let text = std::str::from_utf8(value).ok();
    let raw_repr = if text.is_some() {
        Representation::Utf8Text
    } else {
        Representation::Raw
    };
    candidates.push((value.to_vec(), raw_repr));
    if let Some(text) = text {
        for variant in text_variants(text) {
            candidates.push((variant.into_bytes(), Representation::Variant));
        }
    }
    candidates.push((hex::encode(value).into_bytes(), Representation::HexLower));
    candidates.push((hex::encode_upper(value).into_bytes(), Representation::HexUpper));

    let mut set = NeedleSet::default();
    let mut seen: BTreeSet<Vec<u8>> = BTreeSet::new();
    for (bytes, representation) in candidates {
        if !seen.insert(bytes.clone()) {
            continue;
        }
        if bytes.len() < min_len {
            set.dropped.push(DroppedNeedle {
                pii_kind: kind,
                origin: origin.to_string(),
                bytes,
            });
            continue;
        }
        set.needles.insert(Needle {
            pii_kind: kind,
            bytes,
            representation,
            chain: Vec::new(),
            origin: origin.to_string(),
        });
    }
    set
}

/// Reformatted spellings of MAC addresses and UUIDs, excluding `text` itself.
fn text_variants(text: &str) -> Vec<String> {
    let groups: Option<Vec<&str>> = if is_mac(text) {
        Some(text.split([':', '-']).collect())
    } else if is_uuid(text) {
        Some(text.split('-').collect())
    } else {
        None
    };
    let Some(groups) = groups else {
        return Vec::new();
    };
    let sep = if is_mac(text) { ":" } else { "-" };
    let joined = groups.join(sep);
    let bare = groups.concat();
    let mut out = Vec::new();
    for form in [
        joined.to_ascii_lowercase(),
        joined.to_ascii_uppercase(),
        bare.to_ascii_lowercase(),
        bare.to_ascii_uppercase(),
    ] {
        if form != text && !out.contains(&form) {
            out.push(form);
        }
    }
    out
}

fn is_mac(text: &str) -> bool {
    let parts: Vec<&str> = text.split([':', '-']).collect();
    parts.len() == 6
        && parts
            .iter()
            .all(|p| p.len() == 2 && p.bytes().all(|b| b.is_ascii_hexdigit()))
        && !(text.contains(':') && text.contains('-'))
}

fn is_uuid(text: &str) -> bool {
    let parts: Vec<&str> = text.split('-').collect();
    parts.len() == 5
        && parts
            .iter()
            .zip([8, 4, 4, 4, 12])
            .all(|(p, n)| p.len() == n && p.bytes().all(|b| b.is_ascii_hexdigit()))
}

/// Text form of a byte value: UTF-8 when valid, lowercase hex otherwise.
pub fn display_text(value: &[u8]) -> String {
    match std::str::from_utf8(value) {
        Ok(s) => s.to_string(),
        Err(_) => hex::encode(value),
    }
}
