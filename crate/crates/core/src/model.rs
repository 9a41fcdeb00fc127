//! Problems, candidate pools, labels and run manifests, plus JSON Lines
//! ingestion with line-numbered errors.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { field: &'static str, line: usize },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("duplicate problem id `{id}` on lines {first_line} and {line}")]
    DuplicateId { id: String, first_line: usize, line: usize },
    #[error("line {line}: candidate `{candidate_id}` references unknown problem `{problem_id}`")]
    OrphanCandidate {
        problem_id: String,
        candidate_id: String,
        line: usize,
    },
    #[error("line {line}: duplicate candidate `{candidate_id}` in pool `{problem_id}`")]
    DuplicateCandidate {
        problem_id: String,
        candidate_id: String,
        line: usize,
    },
    #[error("pool `{problem_id}` has {n} candidates, {k} requested")]
    InsufficientCandidates { problem_id: String, n: usize, k: usize },
}

/// One benchmark item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub spec: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub testbench: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
    pub benchmark: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntaxStatus {
    #[default]
    Unknown,
    Pass,
    Fail,
}

impl SyntaxStatus {
    pub fn is_unknown(&self) -> bool {
        matches!(self, SyntaxStatus::Unknown)
    }
}

/// One generated Verilog implementation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub problem_id: String,
    pub candidate_id: String,
    pub source: String,
    /// Natural-log token probabilities; every entry is `<= 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<f64>>,
    pub generator: String,
    #[serde(default, skip_serializing_if = "SyntaxStatus::is_unknown")]
    pub syntax_ok: SyntaxStatus,
}

impl Candidate {
    pub fn new(problem_id: impl Into<String>, candidate_id: impl Into<String>, source: impl Into<String>) -> Self {
        Self {
            problem_id: problem_id.into(),
            candidate_id: candidate_id.into(),
            source: source.into(),
            token_logprobs: None,
            generator: String::new(),
            syntax_ok: SyntaxStatus::Unknown,
        }
    }
}

/// Candidates for one problem in generator sampling order.
///
/// The order is canonical: every downstream tie-break uses it.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub problem_id: String,
    pub candidates: Vec<Candidate>,
}

impl CandidatePool {
    pub fn new(problem_id: impl Into<String>, candidates: Vec<Candidate>) -> Self {
        Self {
            problem_id: problem_id.into(),
            candidates,
        }
    }

    pub fn n(&self) -> usize {
        self.candidates.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Pass,
    Fail,
}

impl Label {
    pub fn is_pass(self) -> bool {
        self == Label::Pass
    }

    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Label::Pass
        } else {
            Label::Fail
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Pass => "pass",
            Label::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCandidate {
    pub candidate: Candidate,
    pub label: Label,
}

/// Row of a labels file: ground truth for one candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub problem_id: String,
    pub candidate_id: String,
    pub label: Label,
}

/// Ground-truth labels keyed by problem and candidate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelSet {
    labels: BTreeMap<String, BTreeMap<String, Label>>,
}

impl LabelSet {
    pub fn insert(&mut self, problem_id: &str, candidate_id: &str, label: Label) {
        self.labels
            .entry(problem_id.to_string())
            .or_default()
            .insert(candidate_id.to_string(), label);
    }

    pub fn get(&self, problem_id: &str, candidate_id: &str) -> Option<Label> {
        self.labels.get(problem_id)?.get(candidate_id).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn len(&self) -> usize {
        self.labels.values().map(BTreeMap::len).sum()
    }

    pub fn records(&self) -> impl Iterator<Item = LabelRecord> + '_ {
        self.labels.iter().flat_map(|(problem_id, pool)| {
            pool.iter().map(move |(candidate_id, label)| LabelRecord {
                problem_id: problem_id.clone(),
                candidate_id: candidate_id.clone(),
                label: *label,
            })
        })
    }
}

impl FromIterator<LabelRecord> for LabelSet {
    fn from_iter<I: IntoIterator<Item = LabelRecord>>(iter: I) -> Self {
        let mut set = LabelSet::default();
        for r in iter {
            set.insert(&r.problem_id, &r.candidate_id, r.label);
        }
        set
    }
}

/// Identity and resolved parameters of one reranking run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    /// SHA-256 over the canonical resolved configuration.
    pub config_digest: String,
    pub created_at: String,
    pub strategy: String,
    pub k: usize,
    pub m: usize,
    pub seeds: BTreeMap<String, u64>,
}

/// Hex SHA-256 of `bytes`.
pub fn content_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_lines(path: &Path) -> Result<Vec<(usize, Value)>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_jsonl(&text)
}

/// Parses JSON Lines text into `(1-based line, value)` pairs; blank lines are skipped.
pub fn parse_jsonl(text: &str) -> Result<Vec<(usize, Value)>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|e| DatasetError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

fn require_fields(value: &Value, fields: &[&'static str], line: usize) -> Result<(), DatasetError> {
    let obj = value.as_object().ok_or(DatasetError::Invalid {
        line,
        message: "record is not a JSON object".into(),
    })?;
    for &field in fields {
        match obj.get(field) {
            None | Some(Value::Null) => return Err(DatasetError::MissingField { field, line }),
            _ => {}
        }
    }
    Ok(())
}

fn decode<T: DeserializeOwned>(value: Value, line: usize) -> Result<T, DatasetError> {
    serde_json::from_value(value).map_err(|e| DatasetError::Parse {
        line,
        message: e.to_string(),
    })
}

/// Parses problems from JSON Lines text.
pub fn parse_problems(text: &str) -> Result<Vec<Problem>, DatasetError> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::new();
    for (line, value) in parse_jsonl(text)? {
        require_fields(&value, &["id", "spec", "benchmark"], line)?;
        let p: Problem = decode(value, line)?;
        if p.id.is_empty() {
            return Err(DatasetError::Invalid {
                line,
                message: "problem id is empty".into(),
            });
        }
        if p.spec.trim().is_empty() {
            return Err(DatasetError::Invalid {
                line,
                message: format!("problem `{}` has an empty spec", p.id),
            });
        }
        if matches!(&p.testbench, Some(t) if t.trim().is_empty()) {
            return Err(DatasetError::Invalid {
                line,
                message: format!("problem `{}` has an empty testbench", p.id),
            });
        }
        if let Some(&first_line) = seen.get(&p.id) {
            return Err(DatasetError::DuplicateId {
                id: p.id,
                first_line,
                line,
            });
        }
        seen.insert(p.id.clone(), line);
        out.push(p);
    }
    Ok(out)
}

pub fn load_problems(path: impl AsRef<Path>) -> Result<Vec<Problem>, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_problems(&text)
}

/// Groups candidates into pools, preserving generator order within each pool.
pub fn parse_candidates(text: &str, problems: &[Problem]) -> Result<BTreeMap<String, CandidatePool>, DatasetError> {
    let known: HashMap<&str, ()> = problems.iter().map(|p| (p.id.as_str(), ())).collect();
    let mut pools: BTreeMap<String, CandidatePool> = BTreeMap::new();
    for (line, value) in parse_jsonl(text)? {
        require_fields(&value, &["problem_id", "candidate_id", "source", "generator"], line)?;
        let c: Candidate = decode(value, line)?;
        if !known.contains_key(c.problem_id.as_str()) {
            return Err(DatasetError::OrphanCandidate {
                problem_id: c.problem_id,
                candidate_id: c.candidate_id,
                line,
            });
        }
        if let Some(lp) = &c.token_logprobs {
            if lp.iter().any(|&x| x > 0.0 || !x.is_finite()) {
                return Err(DatasetError::Invalid {
                    line,
                    message: format!(
                        "candidate `{}` has a token log-probability that is positive or not finite",
                        c.candidate_id
                    ),
                });
            }
        }
        let pool = pools
            .entry(c.problem_id.clone())
            .or_insert_with(|| CandidatePool::new(c.problem_id.clone(), Vec::new()));
        if pool.candidates.iter().any(|o| o.candidate_id == c.candidate_id) {
            return Err(DatasetError::DuplicateCandidate {
                problem_id: c.problem_id,
                candidate_id: c.candidate_id,
                line,
            });
        }
        pool.candidates.push(c);
    }
    Ok(pools)
}

pub fn load_candidates(
    path: impl AsRef<Path>,
    problems: &[Problem],
) -> Result<BTreeMap<String, CandidatePool>, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_candidates(&text, problems)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelSet, DatasetError> {
    let mut set = LabelSet::default();
    for (line, value) in read_lines(path.as_ref())? {
        require_fields(&value, &["problem_id", "candidate_id", "label"], line)?;
        let r: LabelRecord = decode(value, line)?;
        set.insert(&r.problem_id, &r.candidate_id, r.label);
    }
    Ok(set)
}

/// Returns the first `k` candidates in generator order.
pub fn validate_pool(pool: &CandidatePool, k: usize) -> Result<CandidatePool, DatasetError> {
    if k == 0 || pool.n() < k {
        return Err(DatasetError::InsufficientCandidates {
            problem_id: pool.problem_id.clone(),
            n: pool.n(),
            k,
        });
    }
    Ok(CandidatePool::new(
        pool.problem_id.clone(),
        pool.candidates[..k].to_vec(),
    ))
}

/// Writes one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, rows: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn to_jsonl<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(&row).expect("serializable row"));
        out.push('\n');
    }
    out
}
