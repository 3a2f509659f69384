use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use scrutinator::analyzer::{analyze_trace, AnalysisConfig};
use scrutinator::baseline::{analyze_baseline_with, compare_detectors};
use scrutinator::catalog::DeviceProfile;
use scrutinator::cross_app::detect_shared_identifiers;
use scrutinator::docs::{
    from_document, sha256_hex, to_document, AnalysisDoc, BaselineDoc, ComparisonDoc, ConfigDoc, Provenance,
    ReportIndex, TruthDoc,
};
use scrutinator::party::TrackerList;
use scrutinator::report::{aggregate_stats, render_report, Format, StatsInput};
use scrutinator::synth::{synthesize_trace, LeakManifest, SynthConfig};
use scrutinator::trace::parse_trace;

#[derive(Parser)]
#[command(name = "scrutinator", version, about = "Find PII leaks in hooked mobile-app event traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a trace and its ground truth from a leak manifest.
    Synthesize(SynthesizeArgs),
    /// Detect leaks in a trace.
    Analyze(AnalyzeArgs),
    /// Render statistics tables from an analysis document.
    Report(ReportArgs),
    /// Run the clear-text network-observer baseline.
    Baseline(BaselineArgs),
    /// Compare analyzer and baseline findings, optionally against ground truth.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SynthesizeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    /// Tracker list; the bundled list is used when omitted.
    #[arg(long)]
    trackers: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    max_depth: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    analysis: PathBuf,
    #[arg(long, default_value = "table")]
    format: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    analysis: PathBuf,
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(scrutinator::Error::Io).with_context(|| format!("reading {}", path.display()))
}

fn text(bytes: &[u8], path: &Path) -> Result<String> {
    String::from_utf8(bytes.to_vec())
        .map_err(|_| scrutinator::Error::config(format!("{} is not UTF-8", path.display())))
        .map_err(Into::into)
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(scrutinator::Error::Io)?;
    }
    fs::write(path, body)
        .map_err(scrutinator::Error::Io)
        .with_context(|| format!("writing {}", path.display()))
}

fn synthesize(a: SynthesizeArgs) -> Result<()> {
    let manifest_bytes = read(&a.manifest)?;
    let manifest = LeakManifest::from_json(&text(&manifest_bytes, &a.manifest)?)?;
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let profile = manifest.load_profile(base)?;
    let mut config = SynthConfig::default();
    config.min_needle_len = AnalysisConfig::from_env()?.min_needle_len;
    let (trace, truth) = synthesize_trace(&manifest, &profile, a.seed, &config)?;
    let profile_json = profile.to_json();
    let doc = TruthDoc {
        provenance: Provenance::new([("manifest", manifest_bytes.as_slice()), ("profile", profile_json.as_bytes())]),
        seed: a.seed,
        truth,
    };
    write(&a.out, &trace.to_ndjson())?;
    write(&a.truth, &to_document(&doc))
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let trace_bytes = read(&a.trace)?;
    let profile_bytes = read(&a.profile)?;
    let trace = parse_trace(trace_bytes.as_slice())?;
    let profile = DeviceProfile::from_json(&text(&profile_bytes, &a.profile)?)?;
    let (trackers, tracker_bytes) = match &a.trackers {
        Some(p) => {
            let bytes = read(p)?;
            (TrackerList::parse(&text(&bytes, p)?)?, bytes)
        }
        None => (TrackerList::bundled(), TrackerList::bundled_text().as_bytes().to_vec()),
    };
    let mut config = AnalysisConfig::from_env()?;
    config.workers = a.workers;
    if let Some(d) = a.max_depth {
        config.max_depth = d;
    }
    let mut result = analyze_trace(&trace, &profile, &trackers, &config)?;
    for (k, v) in trace.warnings() {
        *result.warnings.entry(k.clone()).or_insert(0) += v;
    }
    let shared = detect_shared_identifiers(&trace, &result);
    let doc = AnalysisDoc {
        provenance: Provenance::new([
            ("trace", trace_bytes.as_slice()),
            ("profile", profile_bytes.as_slice()),
            ("trackers", tracker_bytes.as_slice()),
        ]),
        config: ConfigDoc::from(&config),
        result,
        shared_identifiers: shared,
    };
    let warnings: u64 = doc.result.warnings.values().sum();
    if warnings > 0 {
        eprintln!("warning: {warnings} trace lines or destinations were skipped or flagged");
    }
    write(&a.out, &to_document(&doc))
}

fn report(a: ReportArgs) -> Result<()> {
    let format: Format = a.format.parse()?;
    let bytes = read(&a.analysis)?;
    let doc: AnalysisDoc = from_document(&text(&bytes, &a.analysis)?)?;
    let stats = aggregate_stats(&StatsInput::from_analysis(&doc.result, &doc.shared_identifiers)?)?;
    let docs = render_report(&stats, format)?;
    fs::create_dir_all(&a.out).map_err(scrutinator::Error::Io)?;
    let mut files = std::collections::BTreeMap::new();
    for d in &docs {
        write(&a.out.join(&d.file_name), &d.body)?;
        files.insert(d.file_name.clone(), sha256_hex(d.body.as_bytes()));
    }
    let index = ReportIndex {
        provenance: Provenance::new([("analysis", bytes.as_slice())]),
        format: a.format,
        files,
    };
    write(&a.out.join("index.json"), &to_document(&index))
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let trace_bytes = read(&a.trace)?;
    let profile_bytes = read(&a.profile)?;
    let trace = parse_trace(trace_bytes.as_slice())?;
    let profile = DeviceProfile::from_json(&text(&profile_bytes, &a.profile)?)?;
    let config = AnalysisConfig::from_env()?;
    let doc = BaselineDoc {
        provenance: Provenance::new([("trace", trace_bytes.as_slice()), ("profile", profile_bytes.as_slice())]),
        baseline: analyze_baseline_with(&trace, &profile.user_known(), config.min_needle_len),
    };
    write(&a.out, &to_document(&doc))
}

fn compare(a: CompareArgs) -> Result<()> {
    let analysis_bytes = read(&a.analysis)?;
    let baseline_bytes = read(&a.baseline)?;
    let analysis: AnalysisDoc = from_document(&text(&analysis_bytes, &a.analysis)?)?;
    let baseline: BaselineDoc = from_document(&text(&baseline_bytes, &a.baseline)?)?;
    let mut inputs = vec![("analysis", analysis_bytes.as_slice()), ("baseline", baseline_bytes.as_slice())];
    let truth_bytes;
    let truth = match &a.truth {
        Some(p) => {
            truth_bytes = read(p)?;
            inputs.push(("truth", truth_bytes.as_slice()));
            Some(from_document::<TruthDoc>(&text(&truth_bytes, p)?)?.truth)
        }
        None => None,
    };
    let report = compare_detectors(
        &analysis.result,
        &baseline.baseline,
        truth.as_ref().map(|t| t.findings.as_slice()),
    )?;
    if !report.baseline_only.is_empty() {
        eprintln!("warning: {} flows were found by the baseline only", report.baseline_only.len());
    }
    let doc = ComparisonDoc {
        provenance: Provenance::new(inputs),
        report,
    };
    write(&a.out, &to_document(&doc))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<scrutinator::Error>()) {
        Some(e) => e.exit_code() as u8,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Synthesize(a) => synthesize(a),
        Command::Analyze(a) => analyze(a),
        Command::Report(a) => report(a),
        Command::Baseline(a) => baseline(a),
        Command::Compare(a) => compare(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
