use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use verirank_core::metrics::{wilcoxon_signed_rank, Alternative, MetricError, PairedSample, WilcoxonResult};

use crate::report::ReportFile;

pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("runs use different k ({a} vs {b})")]
    MismatchedK { a: usize, b: usize },
    #[error("runs cover different problems: {only_a} only in the first, {only_b} only in the second")]
    MismatchedProblems { only_a: usize, only_b: usize },
    #[error(transparent)]
    Metric(MetricError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub pairs: usize,
    pub alpha: f64,
    /// `None` when too few pairs differ for the test to say anything.
    pub test: Option<WilcoxonResult>,
    pub significant: bool,
    pub note: String,
}

/// One-sided Wilcoxon signed-rank test that run `a` selects correct
/// candidates more often than run `b`. Each evaluated problem is one pair,
/// scored 1 when the selected candidate passes and 0 otherwise.
pub fn compare_strategies(a: &ReportFile, b: &ReportFile, alpha: f64) -> Result<Comparison, CompareError> {
    if a.k != b.k {
        return Err(CompareError::MismatchedK { a: a.k, b: b.k });
    }
    let score = |r: &ReportFile| -> BTreeMap<String, f64> {
        r.per_problem
            .iter()
            .map(|p| (p.problem_id.clone(), if p.selected_pass { 1.0 } else { 0.0 }))
            .collect()
    };
    let (sa, sb) = (score(a), score(b));
    let only_a = sa.keys().filter(|k| !sb.contains_key(*k)).count();
    let only_b = sb.keys().filter(|k| !sa.contains_key(*k)).count();
    if only_a + only_b > 0 {
        return Err(CompareError::MismatchedProblems { only_a, only_b });
    }
    let pairs: Vec<PairedSample> = sa.iter().map(|(id, x)| PairedSample::new(id, *x, sb[id])).collect();
    let name = |r: &ReportFile| format!("{}/{}", r.model, r.strategy);
    let mut out = Comparison {
        a: name(a),
        b: name(b),
        pairs: pairs.len(),
        alpha,
        test: None,
        significant: false,
        note: String::new(),
    };
    match wilcoxon_signed_rank(&pairs, Alternative::Greater) {
        Ok(w) => {
            out.significant = w.p_value < alpha;
            out.note = if out.significant {
                format!("{} beats {} at alpha = {alpha}", out.a, out.b)
            } else {
                format!("no significant advantage at alpha = {alpha}")
            };
            out.test = Some(w);
        }
        Err(MetricError::TooFewSamples { found, required }) => {
            out.note = format!("not comparable: {found} differing problems, at least {required} needed");
        }
        Err(e) => return Err(CompareError::Metric(e)),
    }
    Ok(out)
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let mut s = format!("{} vs {} ({} paired problems)\n", self.a, self.b, self.pairs);
        if let Some(w) = &self.test {
            s.push_str(&format!(
                "W+ = {}, W- = {}, n = {}, p = {:.6e} ({:?})\n",
                w.w_plus, w.w_minus, w.n, w.p_value, w.method
            ));
        }
        s.push_str(&self.note);
        s.push('\n');
        s
    }
}
