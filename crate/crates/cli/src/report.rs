use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use verirank_core::metrics::{aggregate_report, MetricError, ReportRow, ReportTable};
use verirank_core::model::{to_jsonl, RunManifest};
use verirank_core::rerank::RerankDecision;

use crate::config::{Format, RunConfig};
use crate::pipeline::{GatewayStats, Latency, MetricSummary, ProblemError, ProblemEval, RunReport};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DECISIONS_FILE: &str = "decisions.jsonl";
pub const LABELS_FILE: &str = "labels.jsonl";
pub const REPORT_STEM: &str = "report";

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// `manifest.json`: run identity plus everything that varies between
/// otherwise identical runs (timestamps, timings, cache traffic).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFile {
    #[serde(flatten)]
    pub manifest: RunManifest,
    pub backend: String,
    pub latency: Latency,
    pub gateway: GatewayStats,
    pub config: RunConfig,
}

/// `report.json`: deterministic for a fixed configuration and warm cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub run_id: String,
    pub model: String,
    pub strategy: String,
    pub k: usize,
    pub m: usize,
    pub summary: MetricSummary,
    pub errored: Vec<ProblemError>,
    pub per_problem: Vec<ProblemEval>,
}

impl ReportFile {
    pub fn from_report(r: &RunReport) -> Self {
        ReportFile {
            run_id: r.manifest.run_id.clone(),
            model: r.model.clone(),
            strategy: r.manifest.strategy.clone(),
            k: r.manifest.k,
            m: r.manifest.m,
            summary: r.summary.clone(),
            errored: r.errored.clone(),
            per_problem: r.outcomes.clone(),
        }
    }

    fn row(&self) -> Option<(String, ReportRow)> {
        let s = &self.summary;
        Some((
            self.model.clone(),
            ReportRow {
                model: self.model.clone(),
                pass1: s.pass1.clone()?,
                reranked: IndexMap::from([(self.strategy.clone(), s.reranked_pass1.clone())]),
                passk: s.passk.clone()?,
            },
        ))
    }
}

/// One row per model, one column per strategy, in first-seen order. Runs
/// without evaluated problems contribute nothing; the model's pass@1 and
/// pass@k come from its first run.
pub fn build_table(runs: &[ReportFile]) -> Option<ReportTable> {
    let mut columns: Vec<String> = Vec::new();
    let mut rows: IndexMap<String, ReportRow> = IndexMap::new();
    for run in runs {
        let Some((model, row)) = run.row() else { continue };
        if !columns.contains(&run.strategy) {
            columns.push(run.strategy.clone());
        }
        let entry = rows.entry(model).or_insert(ReportRow {
            reranked: IndexMap::new(),
            ..row.clone()
        });
        entry
            .reranked
            .insert(run.strategy.clone(), row.reranked[&run.strategy].clone());
    }
    let rows: Vec<ReportRow> = rows
        .into_values()
        .map(|mut r| {
            r.reranked = columns
                .iter()
                .map(|c| (c.clone(), r.reranked.get(c).cloned().flatten()))
                .collect();
            r
        })
        .collect();
    aggregate_report(rows).ok()
}

fn footer(runs: &[ReportFile]) -> String {
    runs.iter()
        .map(|r| {
            let s = &r.summary;
            format!(
                "{} / {}: problems {}, decided {}, errored {}, evaluated {}\n",
                r.model, r.strategy, s.problems, s.decided, s.errored, s.evaluated
            )
        })
        .collect()
}

pub fn render_csv(runs: &[ReportFile], k: usize) -> String {
    match build_table(runs) {
        Some(t) => t.to_csv(k),
        None => format!("Model,Pass@1,Pass@{k}\n"),
    }
}

pub fn render_text(runs: &[ReportFile], k: usize) -> String {
    let mut out = match build_table(runs) {
        Some(t) => t.to_text(k),
        None => "no evaluated problems\n".to_string(),
    };
    out.push('\n');
    out.push_str(&footer(runs));
    out
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> EmitError + '_ {
    move |source| EmitError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary file in the same directory and renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EmitError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io(path))?;
    tmp.write_all(bytes).map_err(io(path))?;
    tmp.persist(path).map_err(|e| io(path)(e.error))?;
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

/// Writes the run directory: manifest, decisions, labels (when any) and the
/// report in each requested format. Returns the paths written.
pub fn emit_report(report: &RunReport, out_dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>, EmitError> {
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<(), EmitError> {
        let path = out_dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
        Ok(())
    };
    put(
        MANIFEST_FILE,
        pretty(&ManifestFile {
            manifest: report.manifest.clone(),
            backend: report.backend.clone(),
            latency: report.latency.clone(),
            gateway: report.gateway,
            config: report.config.clone(),
        }),
    )?;
    put(DECISIONS_FILE, to_jsonl(&report.decisions).into_bytes())?;
    if !report.labels.is_empty() {
        put(LABELS_FILE, to_jsonl(report.labels.records()).into_bytes())?;
    }
    let runs = [ReportFile::from_report(report)];
    let k = report.manifest.k;
    for f in formats {
        let body = match f {
            Format::Json => pretty(&runs[0]),
            Format::Csv => render_csv(&runs, k).into_bytes(),
            Format::Txt => render_text(&runs, k).into_bytes(),
        };
        put(&format!("{REPORT_STEM}.{}", f.extension()), body)?;
    }
    Ok(written)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, EmitError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| EmitError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads `report.json` from a run directory (or the file itself).
pub fn load_run(path: &Path) -> Result<ReportFile, EmitError> {
    if path.is_dir() {
        read_json(&path.join(format!("{REPORT_STEM}.json")))
    } else {
        read_json(path)
    }
}

pub fn load_manifest(dir: &Path) -> Result<ManifestFile, EmitError> {
    read_json(&dir.join(MANIFEST_FILE))
}

pub fn load_decisions(dir: &Path) -> Result<Vec<RerankDecision>, EmitError> {
    let path = dir.join(DECISIONS_FILE);
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| EmitError::Parse {
                path: path.clone(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Merges several runs into one table and writes `report.<ext>` files.
pub fn emit_merged(runs: &[ReportFile], out_dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>, EmitError> {
    let k = runs.first().map_or(1, |r| r.k);
    let mut written = Vec::new();
    for f in formats {
        let body = match f {
            Format::Json => pretty(&build_table(runs)),
            Format::Csv => render_csv(runs, k).into_bytes(),
            Format::Txt => render_text(runs, k).into_bytes(),
        };
        let path = out_dir.join(format!("{REPORT_STEM}.{}", f.extension()));
        write_atomic(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}
