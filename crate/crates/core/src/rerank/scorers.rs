use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{RerankError, ScoreVector, Scorer, Strategy};
use crate::judge::{Embedder, Judge};
use crate::model::{Candidate, Problem};
use crate::{Real, Scalar, Score};

/// Voting passes per candidate unless configured otherwise. Odd, so a
/// candidate can never sit exactly at one half.
pub const DEFAULT_VOTES: usize = 5;

fn vector(problem_id: &str, strategy: Strategy, scores: Vec<(String, Score)>) -> ScoreVector {
    ScoreVector {
        problem_id: problem_id.to_string(),
        scores,
        strategy: strategy.name().to_string(),
    }
}

/// Length-normalized log-probability: the mean of the token log-probs.
pub fn score_probability(problem_id: &str, candidates: &[Candidate]) -> Result<ScoreVector, RerankError> {
    let scores = candidates
        .iter()
        .map(|c| {
            let lp = c
                .token_logprobs
                .as_deref()
                .filter(|lp| !lp.is_empty())
                .ok_or_else(|| RerankError::MissingLogprobs(c.candidate_id.clone()))?;
            let mean = lp.iter().sum::<f64>() / lp.len() as f64;
            if !mean.is_finite() {
                return Err(RerankError::NonFinite {
                    candidate_id: c.candidate_id.clone(),
                });
            }
            Ok((c.candidate_id.clone(), mean))
        })
        .collect::<Result<_, _>>()?;
    Ok(vector(problem_id, Strategy::Probability, scores))
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine_similarity<T: Real>(a: &[T], b: &[T]) -> T {
    let dot = a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y);
    let na = a.iter().fold(T::zero(), |acc, x| acc + *x * *x).sqrt();
    let nb = b.iter().fold(T::zero(), |acc, x| acc + *x * *x).sqrt();
    if na == T::zero() || nb == T::zero() {
        T::zero()
    } else {
        dot / (na * nb)
    }
}

/// Cosine similarity between the specification and each candidate's source.
pub fn score_embedding(
    problem: &Problem,
    candidates: &[Candidate],
    embedder: &dyn Embedder,
) -> Result<ScoreVector, RerankError> {
    let spec = embedder.embed(&problem.spec).map_err(|source| RerankError::Embedder {
        context: format!("spec of {}", problem.id),
        source,
    })?;
    let scores = candidates
        .par_iter()
        .map(|c| {
            let v = embedder.embed(&c.source).map_err(|source| RerankError::Embedder {
                context: c.candidate_id.clone(),
                source,
            })?;
            if v.len() != spec.len() {
                return Err(RerankError::DimensionMismatch {
                    candidate_id: c.candidate_id.clone(),
                    expected: spec.len(),
                    found: v.len(),
                });
            }
            Ok((c.candidate_id.clone(), cosine_similarity(&spec, &v)))
        })
        .collect::<Result<_, _>>()?;
    Ok(vector(&problem.id, Strategy::CodeRank, scores))
}

/// `count / m`.
pub fn vote_fraction<T: Scalar>(count: usize, m: usize) -> T {
    T::from_count(count) / T::from_count(m)
}

/// Majority-vote score: share of `m` judge passes that predict pass. A pass
/// that errors or cannot be parsed counts as a fail vote.
pub fn score_discriminator(
    problem: &Problem,
    candidates: &[Candidate],
    judge: &dyn Judge,
    m: usize,
) -> Result<ScoreVector, RerankError> {
    let unavailable = |reason: String| RerankError::StrategyUnavailable {
        strategy: Strategy::Discriminator.name().into(),
        reason,
    };
    if m == 0 {
        return Err(unavailable("m must be at least 1".into()));
    }
    let tallies: Vec<(usize, usize, Option<String>)> = candidates
        .par_iter()
        .map(|c| {
            let (mut pass, mut errors, mut last_error) = (0, 0, None);
            for j in 1..=m {
                match judge.verdict(problem, c, j) {
                    Ok(v) => pass += v.prediction.is_pass() as usize,
                    Err(e) => {
                        tracing::warn!(problem = %problem.id, candidate = %c.candidate_id, pass = j, "judge pass failed: {e}");
                        errors += 1;
                        last_error = Some(e.to_string());
                    }
                }
            }
            (pass, errors, last_error)
        })
        .collect();
    if !candidates.is_empty() && tallies.iter().all(|(_, errors, _)| *errors == m) {
        let reason = tallies.iter().find_map(|t| t.2.clone()).unwrap_or_default();
        return Err(unavailable(format!("every judge call failed; last error: {reason}")));
    }
    let scores = candidates
        .iter()
        .zip(&tallies)
        .map(|(c, (pass, _, _))| (c.candidate_id.clone(), vote_fraction::<f64>(*pass, m)))
        .collect();
    Ok(vector(&problem.id, Strategy::Discriminator, scores))
}

/// Uniform scores in `[0, 1)` derived from SHA-256 of `(seed, problem_id,
/// candidate_id)`. The argmax is a uniformly random candidate, stable across
/// runs and independent of input order.
pub fn score_random(problem_id: &str, candidates: &[Candidate], seed: u64) -> ScoreVector {
    let scores = candidates
        .iter()
        .map(|c| {
            let mut h = Sha256::new();
            h.update(seed.to_le_bytes());
            for part in [problem_id, &c.candidate_id] {
                h.update((part.len() as u64).to_le_bytes());
                h.update(part.as_bytes());
            }
            let bits = u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"));
            (c.candidate_id.clone(), (bits >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect();
    vector(problem_id, Strategy::Random, scores)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ProbabilityScorer;

impl Scorer for ProbabilityScorer {
    fn strategy(&self) -> Strategy {
        Strategy::Probability
    }

    fn score(&self, problem: &Problem, candidates: &[Candidate]) -> Result<ScoreVector, RerankError> {
        score_probability(&problem.id, candidates)
    }
}

pub struct EmbeddingScorer<E> {
    pub embedder: E,
}

impl<E: Embedder> Scorer for EmbeddingScorer<E> {
    fn strategy(&self) -> Strategy {
        Strategy::CodeRank
    }

    fn score(&self, problem: &Problem, candidates: &[Candidate]) -> Result<ScoreVector, RerankError> {
        score_embedding(problem, candidates, &self.embedder)
    }
}

pub struct DiscriminatorScorer<J> {
    pub judge: J,
    pub m: usize,
}

impl<J: Judge> Scorer for DiscriminatorScorer<J> {
    fn strategy(&self) -> Strategy {
        Strategy::Discriminator
    }

    fn score(&self, problem: &Problem, candidates: &[Candidate]) -> Result<ScoreVector, RerankError> {
        score_discriminator(problem, candidates, &self.judge, self.m)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn strategy(&self) -> Strategy {
        Strategy::Random
    }

    fn score(&self, problem: &Problem, candidates: &[Candidate]) -> Result<ScoreVector, RerankError> {
        Ok(score_random(&problem.id, candidates, self.seed))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::judge::{ChatError, JudgeError, ParseQuality, UnparseableVerdict, Verdict};
    use crate::model::Label;
    use crate::rerank::select;
    use crate::Exact;

    fn problem() -> Problem {
        Problem {
            id: "p".into(),
            spec: "spec".into(),
            testbench: None,
            tags: vec![],
            benchmark: String::new(),
        }
    }

    fn cand(id: &str, lp: Option<Vec<f64>>) -> Candidate {
        Candidate {
            token_logprobs: lp,
            ..Candidate::new("p", id, format!("// {id}"))
        }
    }

    #[test]
    fn probability_means() {
        let cs = [cand("a", Some(vec![-1.0, -1.0, -1.0])), cand("b", Some(vec![-2.0]))];
        let sv = score_probability("p", &cs).unwrap();
        assert_eq!(sv.scores, [("a".to_string(), -1.0), ("b".to_string(), -2.0)]);
        assert_eq!(select(sv).unwrap().selected_candidate_id, "a");
        let err = score_probability("p", &[cand("a", Some(vec![-1.0])), cand("z", None)]).unwrap_err();
        assert_eq!(err, RerankError::MissingLogprobs("z".into()));
        assert!(score_probability("p", &[cand("e", Some(vec![]))]).is_err());
        let tie = score_probability("p", &[cand("a", Some(vec![-0.5])), cand("b", Some(vec![-0.5]))]).unwrap();
        assert!(select(tie).unwrap().tie_broken);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[0.3, 0.4], &[0.3, 0.4]), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        let v: f64 = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]);
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[0.0f32, 0.0], &[1.0, 1.0]), 0.0);
    }

    struct TableEmbedder;
    impl Embedder for TableEmbedder {
        fn embed(&self, text: &str) -> Result<Vec<f64>, ChatError> {
            match text {
                "spec" => Ok(vec![1.0, 0.0]),
                "// same" => Ok(vec![2.0, 0.0]),
                "// diag" => Ok(vec![1.0, 1.0]),
                "// wide" => Ok(vec![1.0, 1.0, 1.0]),
                _ => Err(ChatError::Malformed(text.into())),
            }
        }
    }

    #[test]
    fn embedding_scores_and_errors() {
        let sv = score_embedding(&problem(), &[cand("diag", None), cand("same", None)], &TableEmbedder).unwrap();
        assert!((sv.scores[0].1 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(sv.scores[1].1, 1.0);
        assert!(matches!(
            score_embedding(&problem(), &[cand("wide", None)], &TableEmbedder),
            Err(RerankError::DimensionMismatch {
                expected: 2,
                found: 3,
                ..
            })
        ));
        match score_embedding(&problem(), &[cand("what", None)], &TableEmbedder) {
            Err(RerankError::Embedder { context, .. }) => assert_eq!(context, "what"),
            other => panic!("{other:?}"),
        }
    }

    /// Verdicts from a fixed per-pass script keyed by candidate id.
    struct Scripted {
        script: fn(&str, usize) -> Option<bool>,
        calls: AtomicUsize,
    }

    impl Judge for Scripted {
        fn verdict(&self, _: &Problem, c: &Candidate, j: usize) -> Result<Verdict, JudgeError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            match (self.script)(&c.candidate_id, j) {
                Some(p) => Ok(Verdict {
                    prediction: Label::from_pass(p),
                    reasoning: String::new(),
                    raw: String::new(),
                    parse_quality: ParseQuality::Clean,
                }),
                None => Err(UnparseableVerdict { raw: "??".into() }.into()),
            }
        }
    }

    #[test]
    fn majority_vote_examples() {
        let j = Scripted {
            script: |_, j| Some(j != 2),
            calls: AtomicUsize::new(0),
        };
        let sv = score_discriminator(&problem(), &[cand("a", None)], &j, 4).unwrap();
        assert_eq!(sv.scores[0].1, 0.75);
        assert_eq!(j.calls.load(Ordering::SeqCst), 4);
        let sv = score_discriminator(&problem(), &[cand("a", None)], &j, 1).unwrap();
        assert_eq!(sv.scores[0].1, 1.0);

        let j = Scripted {
            script: |id, j| Some(if id == "a" { j <= 3 } else { j <= 2 }),
            calls: AtomicUsize::new(0),
        };
        let sv = score_discriminator(&problem(), &[cand("a", None), cand("b", None)], &j, 5).unwrap();
        assert_eq!((sv.scores[0].1, sv.scores[1].1), (0.6, 0.4));
        assert_eq!(select(sv).unwrap().selected_candidate_id, "a");
    }

    #[test]
    fn failed_passes_count_as_fail_votes() {
        let j = Scripted {
            script: |_, j| if j == 1 { None } else { Some(true) },
            calls: AtomicUsize::new(0),
        };
        let sv = score_discriminator(&problem(), &[cand("a", None)], &j, 3).unwrap();
        assert_eq!(sv.scores[0].1, vote_fraction::<f64>(2, 3));
        let dead = Scripted {
            script: |_, _| None,
            calls: AtomicUsize::new(0),
        };
        assert!(matches!(
            score_discriminator(&problem(), &[cand("a", None), cand("b", None)], &dead, 3),
            Err(RerankError::StrategyUnavailable { .. })
        ));
    }

    #[test]
    fn vote_fraction_is_exact_in_rationals() {
        assert_eq!(vote_fraction::<Exact>(2, 6), Exact::new(1.into(), 3.into()));
        assert_eq!(vote_fraction::<f64>(3, 4), 0.75);
    }

    #[test]
    fn random_is_seeded_and_problem_keyed() {
        let cs: Vec<_> = (0..10).map(|i| cand(&format!("c{i}"), None)).collect();
        assert_eq!(score_random("p", &cs, 7), score_random("p", &cs, 7));
        assert_ne!(score_random("p", &cs, 7).scores, score_random("p", &cs, 8).scores);
        assert_ne!(score_random("p", &cs, 7).scores, score_random("q", &cs, 7).scores);
        assert!(score_random("p", &cs, 1)
            .scores
            .iter()
            .all(|(_, s)| (0.0..1.0).contains(s)));
    }
}
