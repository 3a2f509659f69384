//! Event taxonomy and the NDJSON trace format.
//!
//! One line per event. Byte fields are lowercase hex; lines starting with
//! `#` are comments. Malformed lines and unknown event kinds are skipped and
//! counted, a duplicate `seq` aborts parsing.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::BufRead;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::catalog::{PiiKind, Platform};
use crate::error::{Error, Result};

/// Warning keys counted by [`parse_trace`].
pub const WARN_MALFORMED: &str = "malformed";
pub const WARN_UNKNOWN_KIND: &str = "unknown_kind";
pub const WARN_INVALID_BODY: &str = "invalid_body";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PiiAccess,
    DataModify,
    NetTransmit,
    PasteboardWrite,
    PasteboardRead,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::PiiAccess => "pii_access",
            EventKind::DataModify => "data_modify",
            EventKind::NetTransmit => "net_transmit",
            EventKind::PasteboardWrite => "pasteboard_write",
            EventKind::PasteboardRead => "pasteboard_read",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pii_access" => EventKind::PiiAccess,
            "data_modify" => EventKind::DataModify,
            "net_transmit" => EventKind::NetTransmit,
            "pasteboard_write" => EventKind::PasteboardWrite,
            "pasteboard_read" => EventKind::PasteboardRead,
            _ => return None,
        })
    }
}

/// Hash and encryption APIs whose input/output pairs are recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModifyApi {
    HashMd5,
    HashSha1,
    HashSha256,
    EncryptOpaque,
}

impl ModifyApi {
    pub const ALL: [ModifyApi; 4] = [
        ModifyApi::HashMd5,
        ModifyApi::HashSha1,
        ModifyApi::HashSha256,
        ModifyApi::EncryptOpaque,
    ];

    /// Output length in bytes for digest APIs.
    pub fn digest_len(self) -> Option<usize> {
        match self {
            ModifyApi::HashMd5 => Some(16),
            ModifyApi::HashSha1 => Some(20),
            ModifyApi::HashSha256 => Some(32),
            ModifyApi::EncryptOpaque => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModifyApi::HashMd5 => "hash_md5",
            ModifyApi::HashSha1 => "hash_sha1",
            ModifyApi::HashSha256 => "hash_sha256",
            ModifyApi::EncryptOpaque => "encrypt_opaque",
        }
    }
}

impl fmt::Display for ModifyApi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Clear,
    Ssl,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Clear => "clear",
            Channel::Ssl => "ssl",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiAccess {
    pub pii_kind: PiiKind,
    #[serde(with = "hex_bytes")]
    pub value: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataModify {
    pub api: ModifyApi,
    #[serde(with = "hex_bytes")]
    pub input: Vec<u8>,
    #[serde(with = "hex_bytes")]
    pub output: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetTransmit {
    pub destination_host: String,
    pub channel: Channel,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_agent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pasteboard {
    pub name: String,
    pub pb_type: String,
    #[serde(with = "hex_bytes")]
    pub value: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventBody {
    PiiAccess(PiiAccess),
    DataModify(DataModify),
    NetTransmit(NetTransmit),
    PasteboardWrite(Pasteboard),
    PasteboardRead(Pasteboard),
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::PiiAccess(_) => EventKind::PiiAccess,
            EventBody::DataModify(_) => EventKind::DataModify,
            EventBody::NetTransmit(_) => EventKind::NetTransmit,
            EventBody::PasteboardWrite(_) => EventKind::PasteboardWrite,
            EventBody::PasteboardRead(_) => EventKind::PasteboardRead,
        }
    }

    fn decode(kind: EventKind, body: serde_json::Value) -> std::result::Result<Self, String> {
        fn de<T: DeserializeOwned>(v: serde_json::Value) -> std::result::Result<T, String> {
            serde_json::from_value(v).map_err(|e| e.to_string())
        }
        let body = match kind {
            EventKind::PiiAccess => EventBody::PiiAccess(de(body)?),
            EventKind::DataModify => EventBody::DataModify(de(body)?),
            EventKind::NetTransmit => EventBody::NetTransmit(de(body)?),
            EventKind::PasteboardWrite => EventBody::PasteboardWrite(de(body)?),
            EventKind::PasteboardRead => EventBody::PasteboardRead(de(body)?),
        };
        body.validate()?;
        Ok(body)
    }

    /// Checks the per-variant invariants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        match self {
            EventBody::PiiAccess(a) if a.value.is_empty() => Err("empty access value".into()),
            EventBody::DataModify(m) => match m.api.digest_len() {
                Some(n) if m.output.len() != n => Err(format!(
                    "{} output is {} bytes, expected {n}",
                    m.api,
                    m.output.len()
                )),
                None if m.output.is_empty() => Err("empty encrypt_opaque output".into()),
                _ => Ok(()),
            },
            EventBody::NetTransmit(t) if t.destination_host.is_empty() => {
                Err("empty destination_host".into())
            }
            EventBody::PasteboardWrite(p) | EventBody::PasteboardRead(p) if p.name.is_empty() => {
                Err("empty pasteboard name".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub seq: u64,
    pub ts_ms: i64,
    pub platform: Platform,
    pub app_id: String,
    pub body: EventBody,
}

impl Event {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }

    fn sort_key(&self) -> (i64, u64) {
        (self.ts_ms, self.seq)
    }

    /// Canonical single-line JSON form, without the trailing newline.
    pub fn to_json_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a, B: Serialize> {
            seq: u64,
            ts_ms: i64,
            platform: Platform,
            app_id: &'a str,
            kind: &'static str,
            body: &'a B,
        }
        fn line<B: Serialize>(e: &Event, body: &B) -> String {
            serde_json::to_string(&Line {
                seq: e.seq,
                ts_ms: e.ts_ms,
                platform: e.platform,
                app_id: &e.app_id,
                kind: e.kind().as_str(),
                body,
            })
            .expect("event serializes")
        }
        match &self.body {
            EventBody::PiiAccess(b) => line(self, b),
            EventBody::DataModify(b) => line(self, b),
            EventBody::NetTransmit(b) => line(self, b),
            EventBody::PasteboardWrite(b) | EventBody::PasteboardRead(b) => line(self, b),
        }
    }
}

#[derive(Deserialize)]
struct RawLine {
    seq: u64,
    ts_ms: i64,
    platform: Platform,
    app_id: String,
    kind: String,
    body: serde_json::Value,
}

/// Parsed events in `(ts_ms, seq)` order plus skipped-line counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventTrace {
    events: Vec<Event>,
    warnings: BTreeMap<String, u64>,
}

impl EventTrace {
    /// Builds a trace from in-memory events, sorting them. Fails on a
    /// repeated `seq` or a body the parser would reject.
    pub fn from_events(mut events: Vec<Event>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(events.len());
        for (i, e) in events.iter().enumerate() {
            if let Err(message) = e.body.validate() {
                return Err(Error::TraceFormat { line: i + 1, message });
            }
            if seen.insert(e.seq, i).is_some() {
                return Err(Error::TraceFormat {
                    line: i + 1,
                    message: format!("duplicate seq {}", e.seq),
                });
            }
        }
        events.sort_by_key(Event::sort_key);
        Ok(EventTrace {
            events,
            warnings: BTreeMap::new(),
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn warnings(&self) -> &BTreeMap<String, u64> {
        &self.warnings
    }

    pub fn warning_count(&self) -> u64 {
        self.warnings.values().sum()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Canonical NDJSON serialization: one line per event, newline-terminated.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_json_line());
            out.push('\n');
        }
        out
    }

    /// Hex sha256 of [`EventTrace::to_ndjson`]; identifies the event content
    /// independently of input formatting.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for e in &self.events {
            h.update(e.to_json_line().as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// Reads an NDJSON trace.
pub fn parse_trace<R: BufRead>(mut reader: R) -> Result<EventTrace> {
    let mut events = Vec::new();
    let mut warnings: BTreeMap<String, u64> = BTreeMap::new();
    let mut seq_lines: HashMap<u64, usize> = HashMap::new();
    let mut buf = Vec::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = match std::str::from_utf8(&buf) {
            Ok(s) => s.trim(),
            Err(_) => {
                *warnings.entry(WARN_MALFORMED.into()).or_default() += 1;
                continue;
            }
        };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_line(line) {
            Ok(event) => {
                if let Some(first) = seq_lines.insert(event.seq, line_no) {
                    return Err(Error::TraceFormat {
                        line: line_no,
                        message: format!("duplicate seq {} (first seen on line {first})", event.seq),
                    });
                }
                events.push(event);
            }
            Err(reason) => *warnings.entry(reason.into()).or_default() += 1,
        }
    }
    events.sort_by_key(Event::sort_key);
    Ok(EventTrace { events, warnings })
}

fn parse_line(line: &str) -> std::result::Result<Event, &'static str> {
    let raw: RawLine = serde_json::from_str(line).map_err(|_| WARN_MALFORMED)?;
    if raw.app_id.is_empty() {
        return Err(WARN_MALFORMED);
    }
    let kind = EventKind::parse(&raw.kind).ok_or(WARN_UNKNOWN_KIND)?;
    let body = EventBody::decode(kind, raw.body).map_err(|_| WARN_INVALID_BODY)?;
    Ok(Event {
        seq: raw.seq,
        ts_ms: raw.ts_ms,
        platform: raw.platform,
        app_id: raw.app_id,
        body,
    })
}

/// Groups events by app, preserving trace order inside each group.
pub fn partition_by_app(trace: &EventTrace) -> BTreeMap<&str, Vec<&Event>> {
    let mut parts: BTreeMap<&str, Vec<&Event>> = BTreeMap::new();
    for e in trace.events() {
        parts.entry(e.app_id.as_str()).or_default().push(e);
    }
    parts
}

/// Serde adapter for byte strings stored as lowercase hex text.
pub mod hex_bytes {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = <std::borrow::Cow<'de, str>>::deserialize(d)?;
        decode(&text).map_err(de::Error::custom)
    }

    /// Strict decoder: rejects uppercase digits and odd lengths.
    pub fn decode(text: &str) -> Result<Vec<u8>, String> {
        if text.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err("hex must be lowercase".into());
        }
        hex::decode(text).map_err(|e| e.to_string())
    }
}
