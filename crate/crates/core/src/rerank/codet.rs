use std::collections::HashSet;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RerankError, ScoreVector, Scorer, Strategy};
use crate::exec::{ExecStatus, Executor};
use crate::judge::TestGenerator;
use crate::model::{Candidate, Problem};

/// Candidates that pass exactly the same generated tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusGroup {
    pub pass_vector: Vec<bool>,
    pub members: Vec<String>,
    /// `|members| * |passed tests|`.
    pub group_score: u64,
}

/// Whitespace-insensitive form used to deduplicate pooled tests.
pub fn normalize_test(test: &str) -> String {
    test.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Partitions candidates by identical pass vector, in order of first member.
pub fn consensus_groups(ids: &[String], vectors: &[Vec<bool>]) -> Vec<ConsensusGroup> {
    let mut groups: IndexMap<&[bool], Vec<String>> = IndexMap::new();
    for (id, v) in ids.iter().zip(vectors) {
        groups.entry(v.as_slice()).or_default().push(id.clone());
    }
    groups
        .into_iter()
        .map(|(v, members)| ConsensusGroup {
            group_score: members.len() as u64 * v.iter().filter(|b| **b).count() as u64,
            pass_vector: v.to_vec(),
            members,
        })
        .collect()
}

/// Runs every candidate on every (deduplicated) test and scores each
/// candidate by its consensus group. Any outcome other than `pass` is a 0 bit.
pub fn score_codet(
    problem_id: &str,
    candidates: &[Candidate],
    tests: &[String],
    oracle: &dyn Executor,
) -> Result<(ScoreVector, Vec<ConsensusGroup>), RerankError> {
    let mut seen = HashSet::new();
    let tests: Vec<&String> = tests.iter().filter(|t| seen.insert(normalize_test(t))).collect();
    if tests.is_empty() {
        return Err(RerankError::NoTests);
    }
    let vectors: Vec<Vec<bool>> = candidates
        .par_iter()
        .map(|c| {
            tests
                .iter()
                .map(|t| {
                    let r = oracle.execute(&c.source, t);
                    if matches!(r.status, ExecStatus::Timeout | ExecStatus::InfraError) {
                        tracing::warn!(candidate = %c.candidate_id, status = %r.status, "test execution failed");
                    }
                    r.status == ExecStatus::Pass
                })
                .collect()
        })
        .collect();
    let ids: Vec<String> = candidates.iter().map(|c| c.candidate_id.clone()).collect();
    let groups = consensus_groups(&ids, &vectors);
    let scores = ids
        .iter()
        .map(|id| {
            let g = groups
                .iter()
                .find(|g| g.members.contains(id))
                .expect("groups cover candidates");
            (id.clone(), g.group_score as f64)
        })
        .collect();
    let sv = ScoreVector {
        problem_id: problem_id.to_string(),
        scores,
        strategy: Strategy::CodeT.name().to_string(),
    };
    Ok((sv, groups))
}

/// CodeT with tests generated per candidate and pooled across the problem.
pub struct CodeTScorer<G, E> {
    pub generator: G,
    pub oracle: E,
    pub tests_per_candidate: usize,
}

impl<G: TestGenerator, E: Executor> Scorer for CodeTScorer<G, E> {
    fn strategy(&self) -> Strategy {
        Strategy::CodeT
    }

    fn score(&self, problem: &Problem, candidates: &[Candidate]) -> Result<ScoreVector, RerankError> {
        let mut tests = Vec::new();
        for c in candidates {
            match self.generator.generate_tests(problem, c, self.tests_per_candidate) {
                Ok(ts) => tests.extend(ts),
                Err(e) => tracing::warn!(candidate = %c.candidate_id, "test generation failed: {e}"),
            }
        }
        Ok(score_codet(&problem.id, candidates, &tests, &self.oracle)?.0)
    }
}
