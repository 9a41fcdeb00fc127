//! Judge-reasoning datasets from execution-labeled candidates.
//!
//! Candidates sampled for a seed specification are labeled by running them
//! against the seed testbench. Each labeled row is then shown to a primary
//! teacher; its reasoning is kept when its prediction agrees with the
//! execution label, otherwise a secondary teacher gets one chance, and rows
//! both teachers get wrong are dropped. Execution labels are never replaced
//! by teacher predictions.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{execute, Executor};
use crate::judge::{ChatError, Generator, Judge};
use crate::model::{content_digest, parse_jsonl, to_jsonl, Candidate, DatasetError, Label, LabeledCandidate, Problem};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedExample {
    #[serde(default)]
    pub id: Option<String>,
    pub spec: String,
    pub reference: String,
    pub testbench: String,
}

impl SeedExample {
    /// Explicit id, or a short digest of the specification.
    pub fn key(&self) -> String {
        self.id
            .clone()
            .unwrap_or_else(|| content_digest(self.spec.as_bytes())[..12].to_string())
    }

    pub fn validate(&self) -> Result<(), DistillError> {
        for (name, v) in [
            ("spec", &self.spec),
            ("reference", &self.reference),
            ("testbench", &self.testbench),
        ] {
            if v.trim().is_empty() {
                return Err(DistillError::InvalidSeed(format!(
                    "{} has an empty `{name}`",
                    self.key()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Teacher {
    T1,
    T2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistillRecord {
    pub spec: String,
    pub code: String,
    pub label: Label,
    pub reasoning: String,
    pub teacher: Teacher,
}

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("invalid seed: {0}")]
    InvalidSeed(String),
    #[error("generator unavailable: {0}")]
    Generator(#[from] ChatError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Samples `k` candidates for `seed` and labels each by execution.
/// Candidates whose run times out or hits an infrastructure error are
/// dropped, not counted as failures.
pub fn build_candidate_pool(
    seed: &SeedExample,
    generator: &dyn Generator,
    executor: &dyn Executor,
    k: usize,
) -> Result<Vec<LabeledCandidate>, DistillError> {
    seed.validate()?;
    let key = seed.key();
    let sources = generator.generate(&seed.spec, k)?;
    let mut out = Vec::with_capacity(sources.len());
    for (i, source) in sources.into_iter().enumerate() {
        let candidate = Candidate {
            generator: "distill".into(),
            ..Candidate::new(&key, format!("{key}-s{i}"), source)
        };
        let result = execute(&candidate, &seed.testbench, executor);
        match result.status.label() {
            Some(label) => out.push(LabeledCandidate { candidate, label }),
            None => tracing::warn!(
                seed = %key,
                candidate = %candidate.candidate_id,
                status = %result.status,
                "excluded from labeling"
            ),
        }
    }
    if out.is_empty() {
        tracing::warn!(seed = %key, "no labelable candidates");
    }
    Ok(out)
}

/// Keeps the first teacher whose prediction matches each row's execution
/// label. The secondary teacher is queried only after a primary mismatch; a
/// failed teacher call counts as a mismatch.
pub fn distill_labels(pool: &[LabeledCandidate], spec: &str, t1: &dyn Judge, t2: &dyn Judge) -> Vec<DistillRecord> {
    let mut out = Vec::new();
    for row in pool {
        let problem = Problem {
            id: row.candidate.problem_id.clone(),
            spec: spec.to_string(),
            testbench: None,
            tags: Vec::new(),
            benchmark: String::new(),
        };
        for (teacher, judge) in [(Teacher::T1, t1), (Teacher::T2, t2)] {
            match judge.verdict(&problem, &row.candidate, 0) {
                Ok(v) if v.prediction == row.label && !v.reasoning.trim().is_empty() => {
                    out.push(DistillRecord {
                        spec: spec.to_string(),
                        code: row.candidate.source.clone(),
                        label: row.label,
                        reasoning: v.reasoning,
                        teacher,
                    });
                    break;
                }
                Ok(_) => {}
                Err(e) => tracing::warn!(candidate = %row.candidate.candidate_id, ?teacher, "teacher call failed: {e}"),
            }
        }
    }
    out
}

/// Counts written next to an exported dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: usize,
    pub labels: BTreeMap<Label, usize>,
    pub teachers: BTreeMap<Teacher, usize>,
}

impl DatasetManifest {
    pub fn count(records: &[DistillRecord]) -> Self {
        let mut m = DatasetManifest {
            records: records.len(),
            labels: [(Label::Pass, 0), (Label::Fail, 0)].into(),
            teachers: [(Teacher::T1, 0), (Teacher::T2, 0)].into(),
        };
        for r in records {
            *m.labels.entry(r.label).or_default() += 1;
            *m.teachers.entry(r.teacher).or_default() += 1;
        }
        m
    }
}

/// `data.jsonl` → `data.manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("manifest.json")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DistillError> {
    let io = |source| DistillError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    std::io::Write::write_all(&mut tmp, bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Writes records as JSON Lines plus a sidecar manifest of counts.
pub fn export_dataset(records: &[DistillRecord], path: &Path) -> Result<DatasetManifest, DistillError> {
    write_atomic(path, to_jsonl(records).as_bytes())?;
    let manifest = DatasetManifest::count(records);
    let json = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
    write_atomic(&manifest_path(path), json.as_bytes())?;
    Ok(manifest)
}

fn read(path: &Path) -> Result<String, DistillError> {
    fs::read_to_string(path).map_err(|source| DistillError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn decode_lines<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<T>, DistillError> {
    parse_jsonl(text)?
        .into_iter()
        .map(|(line, v)| {
            serde_json::from_value(v).map_err(|e| {
                DistillError::Dataset(DatasetError::Parse {
                    line,
                    message: e.to_string(),
                })
            })
        })
        .collect()
}

pub fn load_dataset(path: &Path) -> Result<Vec<DistillRecord>, DistillError> {
    decode_lines(&read(path)?)
}

pub fn load_seeds(path: &Path) -> Result<Vec<SeedExample>, DistillError> {
    let seeds: Vec<SeedExample> = decode_lines(&read(path)?)?;
    seeds.iter().try_for_each(SeedExample::validate)?;
    Ok(seeds)
}
