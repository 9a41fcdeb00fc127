use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use verirank_core::distill::{build_candidate_pool, distill_labels, export_dataset, load_seeds, DatasetManifest};
use verirank_core::exec::{execute, Executor};
use verirank_core::judge::{Generator, Judge, LlmGenerator, LlmJudge};
use verirank_core::metrics::{suite_pass_at_k, Percent, ProblemOutcome};
use verirank_core::model::{load_candidates, load_problems, to_jsonl, LabelRecord};
use verirank_core::syntax::{check_syntax, Diagnostic};

use crate::config::RunConfig;
use crate::pipeline::{backend_for, gateway_for, RunError};
use crate::report::write_atomic;

/// `file:line:col: severity: message`.
pub fn format_diagnostic(file: &str, d: &Diagnostic) -> String {
    format!("{file}:{}:{}: {}: {}", d.line, d.column, d.severity, d.message)
}

/// Checks each file; returns diagnostics lines and whether all were valid.
pub fn check_files(paths: &[impl AsRef<Path>]) -> Result<(Vec<String>, bool), RunError> {
    let mut lines = Vec::new();
    let mut all_valid = true;
    for p in paths {
        let p = p.as_ref();
        let src = std::fs::read_to_string(p).map_err(|source| RunError::Io {
            path: p.to_path_buf(),
            source,
        })?;
        let report = check_syntax(&src);
        all_valid &= report.is_valid();
        let name = p.display().to_string();
        lines.extend(report.diagnostics.iter().map(|d| format_diagnostic(&name, d)));
    }
    Ok((lines, all_valid))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub problems: usize,
    /// Problems with at least `k` labelable candidates.
    pub evaluated: usize,
    pub candidates: usize,
    /// Candidates left unlabeled by timeouts or infrastructure errors.
    pub unlabeled: usize,
    pub pass1: Option<Percent>,
    pub passk: Option<Percent>,
}

/// Executes every candidate against its problem's testbench. Returns label
/// rows plus unbiased pass@1 and pass@k over each full pool.
pub fn evaluate_pools(
    problems_path: &Path,
    candidates_path: &Path,
    k: usize,
    backend: &dyn Executor,
) -> Result<(Vec<LabelRecord>, EvalSummary), RunError> {
    let problems = load_problems(problems_path)?;
    let pools = load_candidates(candidates_path, &problems)?;
    let jobs: Vec<_> = problems
        .iter()
        .filter_map(|p| Some((p, p.testbench.as_deref()?, pools.get(&p.id)?)))
        .flat_map(|(p, tb, pool)| pool.candidates.iter().map(move |c| (p, tb, c)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|(p, tb, c)| {
            (
                p.id.clone(),
                c.candidate_id.clone(),
                execute(c, tb, backend).status.label(),
            )
        })
        .collect();
    let records: Vec<LabelRecord> = results
        .iter()
        .filter_map(|(pid, cid, l)| {
            Some(LabelRecord {
                problem_id: pid.clone(),
                candidate_id: cid.clone(),
                label: (*l)?,
            })
        })
        .collect();
    let outcomes: Vec<ProblemOutcome> = problems
        .iter()
        .filter_map(|p| {
            let mine: Vec<_> = records.iter().filter(|r| r.problem_id == p.id).collect();
            (mine.len() >= k)
                .then(|| ProblemOutcome::new(&p.id, mine.len(), mine.iter().filter(|r| r.label.is_pass()).count()))
        })
        .collect();
    let summary = EvalSummary {
        problems: problems.len(),
        evaluated: outcomes.len(),
        candidates: results.len(),
        unlabeled: results.len() - records.len(),
        pass1: suite_pass_at_k(&outcomes, 1).ok(),
        passk: suite_pass_at_k(&outcomes, k).ok(),
    };
    Ok((records, summary))
}

pub fn write_labels(records: &[LabelRecord], path: &Path) -> Result<(), RunError> {
    write_atomic(path, to_jsonl(records).as_bytes()).map_err(RunError::Emit)
}

/// Generates `k` candidates per seed, labels them by execution and keeps
/// teacher reasoning that agrees with the label. A failing seed is logged and
/// skipped.
pub fn run_distill(
    seeds: &Path,
    k: usize,
    out: &Path,
    generator: &dyn Generator,
    backend: &dyn Executor,
    t1: &dyn Judge,
    t2: &dyn Judge,
) -> Result<DatasetManifest, RunError> {
    let seeds = load_seeds(seeds)?;
    let mut records = Vec::new();
    for seed in &seeds {
        match build_candidate_pool(seed, generator, backend, k) {
            Ok(pool) => records.extend(distill_labels(&pool, &seed.spec, t1, t2)),
            Err(e) => tracing::warn!(seed = %seed.key(), "skipped: {e}"),
        }
    }
    Ok(export_dataset(&records, out)?)
}

/// [`run_distill`] with generator, teachers and backend built from `config`.
pub fn distill_from_config(
    config: &RunConfig,
    seeds: &Path,
    k: usize,
    out: &Path,
) -> Result<DatasetManifest, RunError> {
    let eps = &config.endpoints;
    let sampling = config
        .generator
        .as_ref()
        .map(|g| g.sampling.clone())
        .unwrap_or_default();
    let generator = LlmGenerator {
        chat: gateway_for(config, &eps.generator)?,
        config: sampling,
    };
    let t1 = LlmJudge::new(gateway_for(config, &eps.judge)?, config.judge.clone());
    let t2 = LlmJudge::new(gateway_for(config, &eps.teacher)?, config.teacher.clone());
    let backend = backend_for(config)?;
    run_distill(seeds, k, out, &generator, backend.as_ref(), &t1, &t2)
}
