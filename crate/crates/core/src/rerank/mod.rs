//! Candidate reranking: syntax prefilter, scorers and argmax selection.

mod codet;
mod scorers;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judge::ChatError;
use crate::model::{Candidate, CandidatePool, Problem};
use crate::syntax::check_syntax;
use crate::Score;

pub use codet::{consensus_groups, normalize_test, score_codet, CodeTScorer, ConsensusGroup};
pub use scorers::{
    cosine_similarity, score_discriminator, score_embedding, score_probability, score_random, vote_fraction,
    DiscriminatorScorer, EmbeddingScorer, ProbabilityScorer, RandomScorer, DEFAULT_VOTES,
};

/// Strategy identifiers accepted in configuration and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Probability,
    #[serde(rename = "coderank")]
    CodeRank,
    #[serde(rename = "codet")]
    CodeT,
    Discriminator,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Probability,
        Strategy::CodeRank,
        Strategy::CodeT,
        Strategy::Discriminator,
        Strategy::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Probability => "probability",
            Strategy::CodeRank => "coderank",
            Strategy::CodeT => "codet",
            Strategy::Discriminator => "discriminator",
            Strategy::Random => "random",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = RerankError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| RerankError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RerankError {
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("problem `{0}`: no scores to select from")]
    EmptyScores(String),
    #[error("candidate `{0}` has no token log-probabilities")]
    MissingLogprobs(String),
    #[error("candidate `{candidate_id}`: non-finite score")]
    NonFinite { candidate_id: String },
    #[error("candidate `{candidate_id}`: embedding has dimension {found}, expected {expected}")]
    DimensionMismatch {
        candidate_id: String,
        expected: usize,
        found: usize,
    },
    #[error("embedding `{context}`: {source}")]
    Embedder {
        context: String,
        #[source]
        source: ChatError,
    },
    #[error("no tests to execute")]
    NoTests,
    #[error("strategy `{strategy}` unavailable: {reason}")]
    StrategyUnavailable { strategy: String, reason: String },
}

/// One score per surviving candidate, in generator order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub problem_id: String,
    pub scores: Vec<(String, Score)>,
    pub strategy: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankDecision {
    pub problem_id: String,
    pub selected_candidate_id: String,
    pub score_vector: ScoreVector,
    pub prefiltered_out: Vec<String>,
    /// Every candidate failed the syntax gate, so all were scored.
    pub fallback: bool,
    pub tie_broken: bool,
}

/// Output of [`prefilter_syntax`].
#[derive(Debug, Clone, PartialEq)]
pub struct Prefiltered {
    pub survivors: Vec<Candidate>,
    pub removed: Vec<String>,
    pub fallback: bool,
}

/// Drops syntactically invalid candidates, keeping order. If none is valid
/// the whole pool survives and `fallback` is set.
pub fn prefilter_syntax(pool: &CandidatePool) -> Prefiltered {
    let (survivors, removed): (Vec<&Candidate>, Vec<&Candidate>) =
        pool.candidates.iter().partition(|c| check_syntax(&c.source).is_valid());
    if survivors.is_empty() && !pool.candidates.is_empty() {
        return Prefiltered {
            survivors: pool.candidates.clone(),
            removed: Vec::new(),
            fallback: true,
        };
    }
    Prefiltered {
        survivors: survivors.into_iter().cloned().collect(),
        removed: removed.into_iter().map(|c| c.candidate_id.clone()).collect(),
        fallback: false,
    }
}

/// Index of the maximum, ties to the lowest index, and whether a tie occurred.
pub fn argmax_first<T: PartialOrd>(scores: &[T]) -> Option<(usize, bool)> {
    scores.first()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    let tied = scores.iter().enumerate().any(|(i, s)| i != best && *s == scores[best]);
    Some((best, tied))
}

/// Argmax selection; exact ties go to the earliest candidate in generator order.
pub fn select(score_vector: ScoreVector) -> Result<RerankDecision, RerankError> {
    let values: Vec<Score> = score_vector.scores.iter().map(|(_, s)| *s).collect();
    if let Some((id, _)) = score_vector.scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(RerankError::NonFinite {
            candidate_id: id.clone(),
        });
    }
    let (best, tie_broken) =
        argmax_first(&values).ok_or_else(|| RerankError::EmptyScores(score_vector.problem_id.clone()))?;
    Ok(RerankDecision {
        problem_id: score_vector.problem_id.clone(),
        selected_candidate_id: score_vector.scores[best].0.clone(),
        score_vector,
        prefiltered_out: Vec::new(),
        fallback: false,
        tie_broken,
    })
}

/// A reranking strategy bound to its dependencies.
pub trait Scorer: Send + Sync {
    fn strategy(&self) -> Strategy;

    /// Scores `candidates` (already prefiltered) for `problem`.
    fn score(&self, problem: &Problem, candidates: &[Candidate]) -> Result<ScoreVector, RerankError>;
}

/// Prefilter, score and select for one problem.
pub fn rerank(problem: &Problem, pool: &CandidatePool, scorer: &dyn Scorer) -> Result<RerankDecision, RerankError> {
    let pre = prefilter_syntax(pool);
    if pre.fallback {
        tracing::warn!(problem = %problem.id, "no candidate passed the syntax gate; scoring the full pool");
    }
    let scores = scorer.score(problem, &pre.survivors)?;
    let mut decision = select(scores)?;
    decision.prefiltered_out = pre.removed;
    decision.fallback = pre.fallback;
    Ok(decision)
}
