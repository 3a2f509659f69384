use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{DeviceProfile, PiiKind, Platform};
use crate::error::{Error, Result};
use crate::party::PartyClass;
use crate::trace::{Channel, ModifyApi};

/// How a (possibly transformed) value is written into a payload.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Embed {
    #[default]
    Raw,
    HexLower,
    HexUpper,
    PercentEncoded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakRow {
    pub pii_kind: PiiKind,
    pub destination: String,
    pub channel: Channel,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chain: Vec<ModifyApi>,
    /// Party the destination is expected to be classified as.
    pub party: PartyClass,
    #[serde(default)]
    pub embed: Embed,
    /// Value sent; defaults to the profile's first value for the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PasteboardOpKind {
    Write,
    Read,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PasteboardOp {
    pub op: PasteboardOpKind,
    pub name: String,
    pub pb_type: String,
    pub value: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SendVia {
    #[default]
    Payload,
    UserAgent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AppSelection {
    /// The literal string "all": every app known on the device.
    All(AllApps),
    List(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllApps {
    All,
}

/// A transmission of installed-app names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstalledAppSend {
    pub destination: String,
    pub channel: Channel,
    pub party: PartyClass,
    pub apps: AppSelection,
    #[serde(default)]
    pub via: SendVia,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Noise {
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppBehavior {
    pub app_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub accesses: Vec<PiiKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub leaks: Vec<LeakRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pasteboard: Vec<PasteboardOp>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub installed_app_sends: Vec<InstalledAppSend>,
    #[serde(default)]
    pub noise: Noise,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileRef {
    /// Path relative to the manifest file.
    Path(String),
    Inline(serde_json::Value),
}

/// App behaviors from which a trace and its ground truth are generated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakManifest {
    pub platform: Platform,
    pub profile: ProfileRef,
    #[serde(default)]
    pub t0_ms: i64,
    pub apps: Vec<AppBehavior>,
}

impl LeakManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::manifest("document", e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Loads the referenced profile; relative paths resolve against `base_dir`.
    pub fn load_profile(&self, base_dir: &Path) -> Result<DeviceProfile> {
        let profile = match &self.profile {
            ProfileRef::Path(p) => {
                let path = base_dir.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::manifest("profile", format!("{}: {e}", path.display())))?;
                DeviceProfile::from_json(&text)?
            }
            ProfileRef::Inline(v) => DeviceProfile::from_json(&v.to_string())?,
        };
        if profile.platform != self.platform {
            return Err(Error::manifest(
                "profile",
                format!("profile is for {} but the manifest is for {}", profile.platform, self.platform),
            ));
        }
        Ok(profile)
    }

    /// Every app id known on the device: manifest apps plus profile apps.
    pub fn all_app_ids(&self, profile: &DeviceProfile) -> BTreeSet<String> {
        self.apps
            .iter()
            .map(|a| a.app_id.clone())
            .chain(profile.apps().map(|m| m.app_id.clone()))
            .collect()
    }

    /// Checks the row-level invariants against the profile.
    pub fn validate(&self, profile: &DeviceProfile) -> Result<()> {
        let known = self.all_app_ids(profile);
        let mut seen = BTreeSet::new();
        for (i, app) in self.apps.iter().enumerate() {
            let at = |what: String| format!("apps[{i}] ({}){what}", app.app_id);
            if app.app_id.is_empty() {
                return Err(Error::manifest(format!("apps[{i}]"), "empty app_id"));
            }
            if !seen.insert(&app.app_id) {
                return Err(Error::manifest(at(String::new()), "duplicate app_id"));
            }
            for (k, kind) in app.accesses.iter().enumerate() {
                if !kind.on_platform(self.platform)
                    || matches!(kind, PiiKind::InstalledApps | PiiKind::PasteboardId)
                {
                    return Err(Error::manifest(at(format!(".accesses[{k}]")), format!("{kind} cannot be accessed")));
                }
            }
            for (j, leak) in app.leaks.iter().enumerate() {
                let loc = at(format!(".leaks[{j}]"));
                if !leak.pii_kind.on_platform(self.platform) {
                    return Err(Error::manifest(loc, format!("{} is not a {} kind", leak.pii_kind, self.platform)));
                }
                if leak.destination.is_empty() {
                    return Err(Error::manifest(loc, "empty destination"));
                }
                match leak.pii_kind {
                    PiiKind::InstalledApps => {
                        return Err(Error::manifest(loc, "installed apps are sent through installed_app_sends"));
                    }
                    PiiKind::PasteboardId => {
                        let Some(value) = &leak.value else {
                            return Err(Error::manifest(loc, "pasteboard leaks need an explicit value"));
                        };
                        if !app.pasteboard.iter().any(|p| &p.value == value) {
                            return Err(Error::manifest(loc, "value is not on this app's pasteboard"));
                        }
                    }
                    kind => {
                        if !app.accesses.contains(&kind) {
                            return Err(Error::manifest(loc, format!("{kind} is leaked but not accessed")));
                        }
                        if leak.value.is_none() && profile.values(kind).is_empty() {
                            return Err(Error::manifest(loc, format!("profile has no {kind} value")));
                        }
                    }
                }
                if leak.value.as_deref() == Some("") {
                    return Err(Error::manifest(loc, "empty value"));
                }
            }
            for (j, op) in app.pasteboard.iter().enumerate() {
                if op.name.is_empty() || op.value.is_empty() {
                    return Err(Error::manifest(at(format!(".pasteboard[{j}]")), "empty name or value"));
                }
            }
            for (j, send) in app.installed_app_sends.iter().enumerate() {
                let loc = at(format!(".installed_app_sends[{j}]"));
                if send.destination.is_empty() {
                    return Err(Error::manifest(loc, "empty destination"));
                }
                if let AppSelection::List(list) = &send.apps {
                    if list.is_empty() {
                        return Err(Error::manifest(loc, "empty app list"));
                    }
                    if let Some(unknown) = list.iter().find(|a| !known.contains(*a)) {
                        return Err(Error::manifest(loc, format!("unknown app {unknown:?}")));
                    }
                }
            }
        }
        Ok(())
    }
}
