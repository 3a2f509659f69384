use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::party::{is_dns_name, DestKind, NormalizedDest};

const BUNDLED: &str = include_str!("../../data/trackers.txt");

/// Known advertiser and tracker domains.
///
/// Entries are lowercase host names. A registrable domain covers all of its
/// subdomains; a longer entry covers that host and the names below it only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrackerList {
    entries: BTreeSet<String>,
}

impl TrackerList {
    /// Parses one entry per line; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let entry = line.trim();
            if entry.is_empty() || entry.starts_with('#') {
                continue;
            }
            if !is_dns_name(entry) {
                return Err(Error::TrackerList {
                    line: i + 1,
                    message: format!("{entry:?} is not a normalized lowercase host name"),
                });
            }
            entries.insert(entry.to_string());
        }
        Ok(TrackerList { entries })
    }

    pub fn bundled() -> Self {
        TrackerList::parse(BUNDLED).expect("bundled tracker list is normalized")
    }

    pub fn bundled_text() -> &'static str {
        BUNDLED
    }

    pub fn insert(&mut self, host: &str) -> Result<()> {
        if !is_dns_name(host) {
            return Err(Error::TrackerList {
                line: 0,
                message: format!("{host:?} is not a normalized lowercase host name"),
            });
        }
        self.entries.insert(host.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }

    /// True when the host or one of its parents, down to the registrable
    /// domain, is listed.
    pub fn contains(&self, dest: &NormalizedDest) -> bool {
        if dest.kind != DestKind::Domain {
            return false;
        }
        let mut name = dest.host.as_str();
        loop {
            if self.entries.contains(name) {
                return true;
            }
            if name.len() <= dest.registrable.len() {
                return false;
            }
            match name.split_once('.') {
                Some((_, parent)) => name = parent,
                None => return false,
            }
        }
    }
}
