//! Table documents rendered from aggregate statistics.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{PiiKind, Platform};
use crate::error::{Error, Result};
use crate::party::PartyClass;
use crate::report::stats::AggregateStats;
use crate::trace::Channel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Table => "txt",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" | "table_text" | "text" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Usage(format!("unknown report format {other:?}"))),
        }
    }
}

/// A matrix column: a PII kind, optionally restricted to (un)modified flows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnSpec {
    pub kind: PiiKind,
    pub modified: Option<bool>,
}

impl ColumnSpec {
    const fn any(kind: PiiKind) -> Self {
        ColumnSpec { kind, modified: None }
    }

    const fn split(kind: PiiKind, modified: bool) -> Self {
        ColumnSpec {
            kind,
            modified: Some(modified),
        }
    }

    pub fn key(&self) -> String {
        match self.modified {
            None => self.kind.as_str().to_string(),
            Some(true) => format!("{}:modified", self.kind),
            Some(false) => format!("{}:unmodified", self.kind),
        }
    }

    fn title(&self) -> String {
        match self.modified {
            None => self.kind.title().to_string(),
            Some(true) => format!("{} (M)", self.kind.title()),
            Some(false) => format!("{} (U)", self.kind.title()),
        }
    }
}

pub struct Layout {
    pub id: &'static str,
    pub title: &'static str,
    pub platform: Platform,
    pub columns: &'static [ColumnSpec],
}

use PiiKind as K;

const ANDROID_SYSTEM: &[ColumnSpec] = &[
    ColumnSpec::split(K::AndroidId, true),
    ColumnSpec::split(K::AndroidId, false),
    ColumnSpec::any(K::PhoneNo),
    ColumnSpec::split(K::Imei, true),
    ColumnSpec::split(K::Imei, false),
    ColumnSpec::any(K::SerialNo),
    ColumnSpec::any(K::Imsi),
    ColumnSpec::any(K::WifiMac),
];

const IOS_SYSTEM: &[ColumnSpec] = &[
    ColumnSpec::any(K::AdIdentifier),
    ColumnSpec::any(K::Udid),
    ColumnSpec::any(K::DeviceName),
    ColumnSpec::split(K::WifiMac, true),
    ColumnSpec::split(K::WifiMac, false),
    ColumnSpec::any(K::PasteboardId),
];

const ANDROID_PERSONAL: &[ColumnSpec] = &[
    ColumnSpec::any(K::Accounts),
    ColumnSpec::any(K::Contacts),
    ColumnSpec::any(K::Location),
    ColumnSpec::any(K::OperatorName),
    ColumnSpec::any(K::SimNetworkCode),
    ColumnSpec::any(K::WifiScanConfig),
];

const IOS_PERSONAL: &[ColumnSpec] = &[
    ColumnSpec::any(K::Accounts),
    ColumnSpec::any(K::AddressBook),
    ColumnSpec::any(K::DeviceName),
    ColumnSpec::any(K::Location),
    ColumnSpec::any(K::SimNetworkName),
    ColumnSpec::any(K::SimNumber),
];

const IOS_IDFV: &[ColumnSpec] = &[ColumnSpec::any(K::IdentifierForVendor)];

pub const LAYOUTS: &[Layout] = &[
    Layout {
        id: "android_system_identifiers",
        title: "Unique system identifiers transmitted by Android apps",
        platform: Platform::Android,
        columns: ANDROID_SYSTEM,
    },
    Layout {
        id: "ios_system_identifiers",
        title: "Unique system identifiers transmitted by iOS apps",
        platform: Platform::Ios,
        columns: IOS_SYSTEM,
    },
    Layout {
        id: "ios_identifier_for_vendor",
        title: "IdentifierForVendor transmitted by iOS apps",
        platform: Platform::Ios,
        columns: IOS_IDFV,
    },
    Layout {
        id: "android_personal_data",
        title: "Personal information transmitted by Android apps",
        platform: Platform::Android,
        columns: ANDROID_PERSONAL,
    },
    Layout {
        id: "ios_personal_data",
        title: "Personal information transmitted by iOS apps",
        platform: Platform::Ios,
        columns: IOS_PERSONAL,
    },
];

pub fn layouts_for(platform: Platform) -> impl Iterator<Item = &'static Layout> {
    LAYOUTS.iter().filter(move |l| l.platform == platform)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub party: PartyClass,
    pub channel: Channel,
    pub server: String,
    /// Keys of the checked columns, in column order.
    pub checked: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixTable {
    pub table: String,
    pub title: String,
    pub platform: Platform,
    pub columns: Vec<String>,
    pub rows: Vec<MatrixRow>,
}

pub fn build_matrix(stats: &AggregateStats, layout: &Layout) -> MatrixTable {
    let mut rows: Vec<MatrixRow> = Vec::new();
    let servers: BTreeSet<(PartyClass, Channel, &str)> = stats
        .server_cells
        .iter()
        .map(|c| (c.party, c.channel, c.domain.as_str()))
        .collect();
    for (party, channel, server) in servers {
        let checked: Vec<String> = layout
            .columns
            .iter()
            .filter(|col| {
                stats.server_cells.iter().any(|c| {
                    c.party == party
                        && c.channel == channel
                        && c.domain == server
                        && c.pii_kind == col.kind
                        && col.modified.map_or(true, |m| m == c.modified)
                })
            })
            .map(ColumnSpec::key)
            .collect();
        if !checked.is_empty() {
            rows.push(MatrixRow {
                party,
                channel,
                server: server.to_string(),
                checked,
            });
        }
    }
    rows.sort_by(|a, b| {
        (a.party, a.channel, std::cmp::Reverse(a.checked.len()), &a.server).cmp(&(
            b.party,
            b.channel,
            std::cmp::Reverse(b.checked.len()),
            &b.server,
        ))
    });
    MatrixTable {
        table: layout.id.to_string(),
        title: layout.title.to_string(),
        platform: layout.platform,
        columns: layout.columns.iter().map(ColumnSpec::key).collect(),
        rows,
    }
}

/// One rendered output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub file_name: String,
    pub body: String,
}

pub fn render_report(stats: &AggregateStats, format: Format) -> Result<Vec<Document>> {
    stats.check_consistency()?;
    let ext = format.extension();
    let mut docs = Vec::new();
    for layout in layouts_for(stats.platform) {
        let table = build_matrix(stats, layout);
        let body = match format {
            Format::Table => matrix_text(&table, layout),
            Format::Csv => matrix_csv(&table, layout),
            Format::Json => to_json(&table),
        };
        docs.push(Document {
            file_name: format!("{}.{ext}", layout.id),
            body,
        });
    }
    let prefix = stats.platform.as_str();
    if stats.platform == Platform::Ios {
        docs.push(Document {
            file_name: format!("{prefix}_pasteboard.{ext}"),
            body: match format {
                Format::Table => pasteboard_text(stats),
                Format::Csv => pasteboard_csv(stats),
                Format::Json => to_json(&stats.pasteboard),
            },
        });
    }
    docs.push(Document {
        file_name: format!("{prefix}_installed_apps.{ext}"),
        body: match format {
            Format::Table => installed_text(stats),
            Format::Csv => installed_csv(stats),
            Format::Json => to_json(&stats.installed_app_knowledge),
        },
    });
    docs.push(Document {
        file_name: format!("{prefix}_summary.{ext}"),
        body: match format {
            Format::Table => summary_text(stats),
            Format::Csv => summary_csv(stats),
            Format::Json => to_json(stats),
        },
    });
    Ok(docs)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn matrix_text(table: &MatrixTable, layout: &Layout) -> String {
    let titles: Vec<String> = layout.columns.iter().map(ColumnSpec::title).collect();
    let server_w = table
        .rows
        .iter()
        .map(|r| r.server.len())
        .chain(["Server".len()])
        .max()
        .unwrap_or(6);
    let mut out = String::new();
    let _ = writeln!(out, "{}", table.title);
    let _ = write!(out, "{:<14} {:<6} {:<server_w$}", "Party", "Chan", "Server");
    for t in &titles {
        let _ = write!(out, " | {t}");
    }
    out.push('\n');
    for row in &table.rows {
        let _ = write!(
            out,
            "{:<14} {:<6} {:<server_w$}",
            row.party.title(),
            row.channel.as_str(),
            row.server
        );
        for (col, t) in layout.columns.iter().zip(&titles) {
            let mark = if row.checked.contains(&col.key()) { "x" } else { "" };
            let _ = write!(out, " | {mark:^w$}", w = t.len());
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn matrix_csv(table: &MatrixTable, layout: &Layout) -> String {
    let mut out = String::from("party,channel,server");
    for col in layout.columns {
        out.push(',');
        out.push_str(&col.key());
    }
    out.push('\n');
    for row in &table.rows {
        let _ = write!(out, "{},{},{}", row.party, row.channel, csv_field(&row.server));
        for col in layout.columns {
            out.push_str(if row.checked.contains(&col.key()) { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    out
}

fn pasteboard_text(stats: &AggregateStats) -> String {
    let p = &stats.pasteboard;
    let mut out = String::from("Pasteboard names, types and values\n");
    let _ = writeln!(out, "apps creating entries: {}", p.creator_apps);
    let _ = writeln!(out, "entries read by another app: {}", p.cross_app_links);
    for (title, set) in [("Names", &p.names), ("Types", &p.types), ("Values", &p.values)] {
        let _ = writeln!(out, "{title} ({}):", set.len());
        for v in set {
            let _ = writeln!(out, "  {v}");
        }
    }
    out
}

fn pasteboard_csv(stats: &AggregateStats) -> String {
    let p = &stats.pasteboard;
    let mut out = String::from("field,value\n");
    for (field, set) in [("name", &p.names), ("type", &p.types), ("value", &p.values)] {
        for v in set {
            let _ = writeln!(out, "{field},{}", csv_field(v));
        }
    }
    out
}

fn installed_text(stats: &AggregateStats) -> String {
    let mut out = String::from("Installed apps known to third parties\n");
    for row in &stats.installed_app_knowledge {
        let apps: Vec<&str> = row.apps.iter().map(String::as_str).collect();
        let _ = writeln!(
            out,
            "{} [{}] {} apps: {}",
            row.domain,
            row.channel,
            apps.len(),
            apps.join(", ")
        );
    }
    out
}

fn installed_csv(stats: &AggregateStats) -> String {
    let mut out = String::from("third_party,channel,app\n");
    for row in &stats.installed_app_knowledge {
        for app in &row.apps {
            let _ = writeln!(out, "{},{},{}", row.domain, row.channel, csv_field(app));
        }
    }
    out
}

fn summary_lines(stats: &AggregateStats) -> Vec<(String, String)> {
    let mut lines = vec![
        ("platform".to_string(), stats.platform.to_string()),
        ("total_apps".to_string(), stats.total_apps.to_string()),
        (
            "apps_with_any_stable_id".to_string(),
            stats.apps_with_any_stable_id.to_string(),
        ),
    ];
    for (kind, c) in &stats.apps_per_identifier {
        lines.push((format!("apps.{kind}.total"), c.total.to_string()));
        lines.push((format!("apps.{kind}.modified"), c.modified.to_string()));
        lines.push((format!("apps.{kind}.unmodified"), c.unmodified.to_string()));
    }
    for (kind, s) in &stats.servers_per_identifier {
        lines.push((format!("servers.{kind}"), s.distinct.to_string()));
    }
    let r = &stats.reset_resilience;
    lines.push(("reset_resilience".into(), r.count.to_string()));
    lines.push((
        "reset_resilience_excluding_wifi_mac_only".into(),
        r.count_excluding_wifi_mac_only.to_string(),
    ));
    lines.push(("pasteboard_creator_apps".into(), stats.pasteboard.creator_apps.to_string()));
    lines.push(("pasteboard_cross_app_links".into(), stats.pasteboard.cross_app_links.to_string()));
    lines.push(("idfv_third_party_apps".into(), stats.idfv_third_party_apps.to_string()));
    for (domain, apps) in stats.knowledge_by_domain() {
        lines.push((format!("installed_app_knowledge.{domain}"), apps.len().to_string()));
    }
    lines
}

fn summary_text(stats: &AggregateStats) -> String {
    let lines = summary_lines(stats);
    let w = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    lines.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
}

fn summary_csv(stats: &AggregateStats) -> String {
    let mut out = String::from("counter,value\n");
    for (k, v) in summary_lines(stats) {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::stats::{aggregate_stats, Flow, StatsInput};

    fn stats() -> AggregateStats {
        let flows = [
            ("a", K::Imei, "ad-x.co.uk", PartyClass::ThirdParty, Channel::Clear, false),
            ("a", K::AndroidId, "flurry.com", PartyClass::ThirdParty, Channel::Ssl, true),
            ("b", K::Imei, "flurry.com", PartyClass::ThirdParty, Channel::Ssl, false),
            ("b", K::Location, "69.28.52.39", PartyClass::Unidentified, Channel::Clear, false),
        ]
        .into_iter()
        .map(|(a, k, d, p, c, m)| Flow {
            app_id: a.into(),
            pii_kind: k,
            destination: d.into(),
            party: p,
            channel: c,
            modified: m,
        })
        .collect();
        aggregate_stats(&StatsInput {
            platform: Platform::Android,
            apps: ["a".to_string(), "b".to_string()].into(),
            flows,
            pasteboard: vec![],
            knowledge: vec![],
        })
        .unwrap()
    }

    #[test]
    fn matrix_groups_and_checks() {
        let t = build_matrix(&stats(), &LAYOUTS[0]);
        let rows: Vec<(PartyClass, Channel, &str, Vec<&str>)> = t
            .rows
            .iter()
            .map(|r| (r.party, r.channel, r.server.as_str(), r.checked.iter().map(String::as_str).collect()))
            .collect();
        assert_eq!(
            rows,
            vec![
                (PartyClass::ThirdParty, Channel::Clear, "ad-x.co.uk", vec!["imei:unmodified"]),
                (
                    PartyClass::ThirdParty,
                    Channel::Ssl,
                    "flurry.com",
                    vec!["android_id:modified", "imei:unmodified"]
                ),
            ]
        );
        let personal = build_matrix(&stats(), &LAYOUTS[3]);
        assert_eq!(personal.rows.len(), 1);
        assert_eq!(personal.rows[0].party, PartyClass::Unidentified);
    }

    #[test]
    fn rendering_is_byte_stable() {
        for format in [Format::Table, Format::Csv, Format::Json] {
            assert_eq!(render_report(&stats(), format).unwrap(), render_report(&stats(), format).unwrap());
        }
    }

    #[test]
    fn json_summary_round_trips() {
        let s = stats();
        let docs = render_report(&s, Format::Json).unwrap();
        let summary = docs.iter().find(|d| d.file_name == "android_summary.json").unwrap();
        let back: AggregateStats = serde_json::from_str(&summary.body).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn unknown_format_is_usage_error() {
        assert!(matches!("pdf".parse::<Format>(), Err(Error::Usage(_))));
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let docs = render_report(&stats(), Format::Csv).unwrap();
        let sys = &docs[0];
        assert_eq!(sys.file_name, "android_system_identifiers.csv");
        assert_eq!(sys.body.lines().count(), 3);
        assert!(sys.body.starts_with("party,channel,server,android_id:modified"));
    }
}
