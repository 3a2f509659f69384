//! Destination normalization and first/third-party classification.

mod suffix;
mod trackers;

use std::fmt;
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

use crate::catalog::AppMeta;

pub use suffix::SuffixList;
pub use trackers::TrackerList;

/// Who operates a destination server, relative to the sending app.
///
/// The variant order is the row order used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartyClass {
    ThirdParty,
    FirstParty,
    Unidentified,
}

impl PartyClass {
    pub const ALL: [PartyClass; 3] = [
        PartyClass::ThirdParty,
        PartyClass::FirstParty,
        PartyClass::Unidentified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PartyClass::ThirdParty => "third_party",
            PartyClass::FirstParty => "first_party",
            PartyClass::Unidentified => "unidentified",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            PartyClass::ThirdParty => "Third-parties",
            PartyClass::FirstParty => "First-parties",
            PartyClass::Unidentified => "Unidentified",
        }
    }
}

impl fmt::Display for PartyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DestKind {
    Domain,
    IpLiteral,
    /// Not a syntactically valid host; kept verbatim.
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NormalizedDest {
    /// Lowercased full host name (or the literal / verbatim text).
    pub host: String,
    /// Registrable domain for DNS names, otherwise equal to `host`.
    pub registrable: String,
    pub kind: DestKind,
}

/// Segments too generic to identify an app.
const STOP_SEGMENTS: &[&str] = &["com", "org", "net", "www", "android", "mobile", "app", "free"];

/// Shortest app-name token compared against domain labels.
pub const MIN_TOKEN_LEN: usize = 3;

pub fn normalize_destination(host: &str) -> NormalizedDest {
    normalize_with(host, SuffixList::bundled())
}

pub fn normalize_with(host: &str, suffixes: &SuffixList) -> NormalizedDest {
    let trimmed = host.trim();
    let bare = trimmed
        .strip_prefix('[')
        .and_then(|h| h.strip_suffix(']'))
        .unwrap_or(trimmed);
    if let Ok(ip) = bare.parse::<IpAddr>() {
        let text = ip.to_string();
        return NormalizedDest {
            host: text.clone(),
            registrable: text,
            kind: DestKind::IpLiteral,
        };
    }
    let lower = trimmed.trim_end_matches('.').to_ascii_lowercase();
    if !is_dns_name(&lower) {
        let verbatim = trimmed.to_ascii_lowercase();
        return NormalizedDest {
            host: verbatim.clone(),
            registrable: verbatim,
            kind: DestKind::Invalid,
        };
    }
    let registrable = suffixes.registrable(&lower).unwrap_or(&lower).to_string();
    NormalizedDest {
        host: lower,
        registrable,
        kind: DestKind::Domain,
    }
}

/// Lowercase LDH host name check: labels of 1 to 63 characters drawn from
/// `[a-z0-9-]`, no leading or trailing hyphen, not all-numeric at the top.
pub(crate) fn is_dns_name(host: &str) -> bool {
    if host.is_empty() || host.len() > 253 {
        return false;
    }
    let labels: Vec<&str> = host.split('.').collect();
    let valid_labels = labels.iter().all(|l| {
        !l.is_empty()
            && l.len() <= 63
            && !l.starts_with('-')
            && !l.ends_with('-')
            && l.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
    });
    let tld = labels.last().copied().unwrap_or_default();
    valid_labels && !tld.bytes().all(|b| b.is_ascii_digit())
}

/// Lowercase name tokens of an app, from its id, package and display names.
pub fn app_tokens(app: &AppMeta) -> Vec<String> {
    let mut tokens: Vec<String> = [&app.app_id, &app.package, &app.display]
        .iter()
        .flat_map(|name| name.split(|c: char| !(c.is_ascii_alphanumeric() || c == '-')))
        .map(str::to_ascii_lowercase)
        .filter(|t| t.len() >= MIN_TOKEN_LEN && !STOP_SEGMENTS.contains(&t.as_str()))
        .collect();
    tokens.sort();
    tokens.dedup();
    tokens
}

/// Leftmost label of the registrable domain.
fn registrable_label(dest: &NormalizedDest) -> &str {
    dest.registrable.split('.').next().unwrap_or_default()
}

pub fn classify_party(app: &AppMeta, dest: &NormalizedDest, trackers: &TrackerList) -> PartyClass {
    if dest.kind == DestKind::IpLiteral {
        return PartyClass::Unidentified;
    }
    let label = registrable_label(dest);
    if app_tokens(app).iter().any(|t| t == label) {
        return PartyClass::FirstParty;
    }
    if trackers.contains(dest) {
        PartyClass::ThirdParty
    } else {
        PartyClass::Unidentified
    }
}
