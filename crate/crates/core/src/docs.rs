//! On-disk JSON documents written and read by the command-line driver.
//!
//! Every document records the tool version and the sha256 of each input
//! file it was computed from.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analyzer::{AnalysisConfig, AnalysisResult};
use crate::baseline::{BaselineFindings, ComparisonReport};
use crate::cross_app::SharedIdFinding;
use crate::error::Result;
use crate::synth::GroundTruth;
use crate::TOOL_VERSION;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    /// Input name to sha256 of the file bytes.
    pub inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new<'a>(inputs: impl IntoIterator<Item = (&'a str, &'a [u8])>) -> Self {
        Provenance {
            tool_version: TOOL_VERSION.to_string(),
            inputs: inputs.into_iter().map(|(k, v)| (k.to_string(), sha256_hex(v))).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigDoc {
    pub max_depth: usize,
    pub min_needle_len: usize,
}

impl From<&AnalysisConfig> for ConfigDoc {
    fn from(c: &AnalysisConfig) -> Self {
        ConfigDoc {
            max_depth: c.max_depth,
            min_needle_len: c.min_needle_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisDoc {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub config: ConfigDoc,
    #[serde(flatten)]
    pub result: AnalysisResult,
    pub shared_identifiers: Vec<SharedIdFinding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineDoc {
    #[serde(flatten)]
    pub provenance: Provenance,
    #[serde(flatten)]
    pub baseline: BaselineFindings,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthDoc {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub seed: u64,
    #[serde(flatten)]
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDoc {
    #[serde(flatten)]
    pub provenance: Provenance,
    #[serde(flatten)]
    pub report: ComparisonReport,
}

/// Index written next to rendered report files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportIndex {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub format: String,
    /// File name to sha256 of its contents.
    pub files: BTreeMap<String, String>,
}

/// Pretty JSON with a trailing newline.
pub fn to_document<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

pub fn from_document<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}
