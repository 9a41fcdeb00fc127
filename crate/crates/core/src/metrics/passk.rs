use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::{MetricError, Percent};
use crate::model::Label;
use crate::{Exact, Scalar};

/// Per-problem sampling outcome: `correct_count` of `n` candidates pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemOutcome {
    pub problem_id: String,
    pub n: usize,
    pub correct_count: usize,
}

impl ProblemOutcome {
    pub fn new(problem_id: impl Into<String>, n: usize, correct_count: usize) -> Self {
        Self {
            problem_id: problem_id.into(),
            n,
            correct_count,
        }
    }
}

/// Unbiased pass@k: `1 - C(n-c, k) / C(n, k)`.
///
/// Evaluated as `1 - prod_{i<k} (n-c-i)/(n-i)`, so no binomial coefficient is
/// ever formed. Exactly `1` when `n - c < k` and exactly `0` when `c = 0`.
pub fn pass_at_k<T: Scalar>(n: usize, c: usize, k: usize) -> Result<T, MetricError> {
    if k == 0 || k > n || c > n {
        return Err(MetricError::Domain { n, c, k });
    }
    if c == 0 {
        return Ok(T::zero());
    }
    if n - c < k {
        return Ok(T::one());
    }
    let miss = (0..k).fold(T::one(), |acc, i| acc * T::from_count(n - c - i) / T::from_count(n - i));
    Ok(T::one() - miss)
}

/// Mean per-problem pass@k over a suite, computed exactly.
pub fn suite_pass_at_k(outcomes: &[ProblemOutcome], k: usize) -> Result<Percent, MetricError> {
    if outcomes.is_empty() {
        return Err(MetricError::Empty("suite_pass_at_k"));
    }
    let mut sum = Exact::zero();
    for o in outcomes {
        sum += pass_at_k::<Exact>(o.n, o.correct_count, k)?;
    }
    Ok(Percent::from_fraction(sum / Exact::from_count(outcomes.len())))
}

/// Share of problems whose selected candidate passes.
pub fn reranked_pass_at_1<I>(selected: I) -> Result<Percent, MetricError>
where
    I: IntoIterator<Item = Label>,
{
    let (mut correct, mut total) = (0usize, 0usize);
    for label in selected {
        total += 1;
        correct += label.is_pass() as usize;
    }
    if total == 0 {
        return Err(MetricError::Empty("reranked_pass_at_1"));
    }
    Ok(Percent::from_counts(correct, total))
}
