//! Multi-pattern payload search and modification-chain resolution.
//!
//! A payload is searched twice when it contains percent escapes: once as
//! sent and once after a single `%XX` decoding pass. Offsets refer to the
//! view the match was found in.

use std::collections::{BTreeMap, BTreeSet};

use aho_corasick::{AhoCorasick, MatchKind};
use serde::{Deserialize, Serialize};

use crate::catalog::PiiKind;
use crate::trace::{DataModify, ModifyApi};

/// Default bound on the number of chained modifications followed.
pub const DEFAULT_MAX_DEPTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Raw,
    Utf8Text,
    HexLower,
    HexUpper,
    Variant,
}

/// A byte pattern searched for in payloads, tagged with the PII it stands for.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Needle {
    pub pii_kind: PiiKind,
    pub bytes: Vec<u8>,
    pub representation: Representation,
    /// Modifications applied to the original value, oldest first.
    pub chain: Vec<ModifyApi>,
    /// Text of the original value (for installed apps: the app id).
    pub origin: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    Raw,
    Decoded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match {
    pub needle: Needle,
    pub offset: usize,
    pub view: View,
}

/// Position of a needle occurrence, by index into [`NeedleIndex::needles`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Hit {
    pub needle: usize,
    pub offset: usize,
    pub view: View,
}

/// Needles compiled into one automaton for repeated scans.
#[derive(Debug, Clone)]
pub struct NeedleIndex {
    needles: Vec<Needle>,
    /// needle indices per automaton pattern id
    owners: Vec<Vec<usize>>,
    automaton: Option<AhoCorasick>,
}

impl NeedleIndex {
    pub fn new(needles: impl IntoIterator<Item = Needle>) -> Self {
        let unique: BTreeSet<Needle> = needles.into_iter().filter(|n| !n.bytes.is_empty()).collect();
        let needles: Vec<Needle> = unique.into_iter().collect();
        let mut by_bytes: BTreeMap<&[u8], Vec<usize>> = BTreeMap::new();
        for (i, n) in needles.iter().enumerate() {
            by_bytes.entry(n.bytes.as_slice()).or_default().push(i);
        }
        let patterns: Vec<&[u8]> = by_bytes.keys().copied().collect();
        let owners: Vec<Vec<usize>> = by_bytes.values().cloned().collect();
        let automaton = if patterns.is_empty() {
            None
        } else {
            Some(
                AhoCorasick::builder()
                    .match_kind(MatchKind::Standard)
                    .build(&patterns)
                    .expect("automaton over non-empty patterns"),
            )
        };
        NeedleIndex {
            needles,
            owners,
            automaton,
        }
    }

    pub fn needles(&self) -> &[Needle] {
        &self.needles
    }

    pub fn is_empty(&self) -> bool {
        self.needles.is_empty()
    }

    /// Every occurrence of every needle in the raw view and, when it differs,
    /// the percent-decoded view. Sorted by (offset, needle bytes, view, needle).
    pub fn scan(&self, payload: &[u8]) -> Vec<Hit> {
        let mut hits = Vec::new();
        let Some(ac) = &self.automaton else {
            return hits;
        };
        self.collect(ac, payload, View::Raw, &mut hits);
        if let Some(decoded) = decoded_view(payload) {
            self.collect(ac, &decoded, View::Decoded, &mut hits);
        }
        hits.sort_by(|a, b| {
            let (na, nb) = (&self.needles[a.needle], &self.needles[b.needle]);
            (a.offset, &na.bytes, a.view, na).cmp(&(b.offset, &nb.bytes, b.view, nb))
        });
        hits
    }

    fn collect(&self, ac: &AhoCorasick, haystack: &[u8], view: View, out: &mut Vec<Hit>) {
        for m in ac.find_overlapping_iter(haystack) {
            for &needle in &self.owners[m.pattern().as_usize()] {
                out.push(Hit {
                    needle,
                    offset: m.start(),
                    view,
                });
            }
        }
    }

    /// Indices of needles occurring anywhere in `payload`, ascending.
    pub fn matching_needles(&self, payload: &[u8]) -> BTreeSet<usize> {
        self.scan(payload).into_iter().map(|h| h.needle).collect()
    }
}

/// The payload after one `%XX` decoding pass, or `None` when nothing changes.
pub fn decoded_view(payload: &[u8]) -> Option<Vec<u8>> {
    if !payload.contains(&b'%') {
        return None;
    }
    let decoded: Vec<u8> = percent_encoding::percent_decode(payload).collect();
    (decoded != payload).then_some(decoded)
}

pub fn find_in_payload<'a>(needles: impl IntoIterator<Item = &'a Needle>, payload: &[u8]) -> Vec<Match> {
    let index = NeedleIndex::new(needles.into_iter().cloned());
    index
        .scan(payload)
        .into_iter()
        .map(|h| Match {
            needle: index.needles[h.needle].clone(),
            offset: h.offset,
            view: h.view,
        })
        .collect()
}

/// Needles for the output of a modification applied to a needle's value.
pub fn derived_needles(parent: &Needle, api: ModifyApi, output: &[u8], min_len: usize) -> Vec<Needle> {
    let mut chain = parent.chain.clone();
    chain.push(api);
    let forms = [
        (output.to_vec(), Representation::Raw),
        (hex::encode(output).into_bytes(), Representation::HexLower),
        (hex::encode_upper(output).into_bytes(), Representation::HexUpper),
    ];
    let mut seen = BTreeSet::new();
    forms
        .into_iter()
        .filter(|(bytes, _)| bytes.len() >= min_len && seen.insert(bytes.clone()))
        .map(|(bytes, representation)| Needle {
            pii_kind: parent.pii_kind,
            bytes,
            representation,
            chain: chain.clone(),
            origin: parent.origin.clone(),
        })
        .collect()
}

/// Follows recorded modifications outward from `base`, up to `max_depth`
/// steps. Returns the derived needles only.
pub fn resolve_modification_chains<'a>(
    mods: impl IntoIterator<Item = &'a DataModify>,
    base: &BTreeSet<Needle>,
    max_depth: usize,
    min_len: usize,
) -> BTreeSet<Needle> {
    let mods: Vec<&DataModify> = mods.into_iter().collect();
    let mut derived: BTreeSet<Needle> = BTreeSet::new();
    if mods.is_empty() {
        return derived;
    }
    let mut frontier: Vec<Needle> = base.iter().cloned().collect();
    for _ in 0..max_depth {
        if frontier.is_empty() {
            break;
        }
        let index = NeedleIndex::new(frontier);
        let mut next = Vec::new();
        for m in &mods {
            for i in index.matching_needles(&m.input) {
                for n in derived_needles(&index.needles()[i], m.api, &m.output, min_len) {
                    if !base.contains(&n) && derived.insert(n.clone()) {
                        next.push(n);
                    }
                }
            }
        }
        frontier = next;
    }
    derived
}
