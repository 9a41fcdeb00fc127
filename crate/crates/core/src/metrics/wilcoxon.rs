use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::MetricError;

/// Largest number of nonzero differences for which [`Method::Auto`] enumerates.
pub const EXACT_MAX_N: usize = 12;

/// Fewest nonzero differences the test accepts.
pub const MIN_NONZERO: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSample {
    pub label: String,
    pub a: f64,
    pub b: f64,
}

impl PairedSample {
    pub fn new(label: impl Into<String>, a: f64, b: f64) -> Self {
        Self {
            label: label.into(),
            a,
            b,
        }
    }
}

/// Alternative hypothesis about the differences `a - b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    TwoSided,
    /// `a` tends to exceed `b`.
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Exact up to [`EXACT_MAX_N`] differences, normal approximation above.
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Nonzero differences that entered the ranking.
    pub n: usize,
    pub zeros_dropped: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// The rank sum whose small values favour the alternative: `W-` for
    /// `greater`, `W+` for `less`, `min(W+, W-)` for two-sided.
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub alternative: Alternative,
}

pub fn wilcoxon_signed_rank(pairs: &[PairedSample], alternative: Alternative) -> Result<WilcoxonResult, MetricError> {
    wilcoxon_signed_rank_with(pairs, alternative, Method::Auto)
}

/// Wilcoxon signed-rank test on `a - b`.
///
/// Zero differences are dropped and tied magnitudes share their average rank.
/// The exact path counts sign assignments by rank sum (ranks are doubled so
/// half ranks stay integral); the normal path applies tie and continuity
/// corrections.
pub fn wilcoxon_signed_rank_with(
    pairs: &[PairedSample],
    alternative: Alternative,
    method: Method,
) -> Result<WilcoxonResult, MetricError> {
    if pairs.iter().any(|p| !p.a.is_finite() || !p.b.is_finite()) {
        return Err(MetricError::NonFinite("paired sample"));
    }
    let diffs: Vec<f64> = pairs.iter().map(|p| p.a - p.b).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n < MIN_NONZERO {
        return Err(MetricError::TooFewSamples {
            found: n,
            required: MIN_NONZERO,
        });
    }
    let (ranks2, tie_sizes) = doubled_ranks(&diffs);
    let plus2: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total2: u64 = ranks2.iter().sum();
    let w_plus = plus2 as f64 / 2.0;
    let w_minus = (total2 - plus2) as f64 / 2.0;

    let method = match method {
        Method::Auto if n <= EXACT_MAX_N => Method::Exact,
        Method::Auto => Method::Normal,
        m => m,
    };
    let p_value = match method {
        Method::Exact => exact_p(&ranks2, plus2, alternative),
        _ => normal_p(n, &tie_sizes, w_plus, alternative),
    };
    let statistic = match alternative {
        Alternative::Greater => w_minus,
        Alternative::Less => w_plus,
        Alternative::TwoSided => w_plus.min(w_minus),
    };
    Ok(WilcoxonResult {
        n,
        zeros_dropped: pairs.len() - n,
        w_plus,
        w_minus,
        statistic,
        p_value,
        method,
        alternative,
    })
}

/// Twice the average rank of each `|d|`, plus the sizes of tie groups.
fn doubled_ranks(diffs: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut ranks2 = vec![0u64; diffs.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && diffs[order[end]].abs() == diffs[order[start]].abs() {
            end += 1;
        }
        // Positions start+1 ..= end average to (start + 1 + end) / 2.
        let r2 = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks2[i] = r2;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks2, ties)
}

fn exact_p(ranks2: &[u64], plus2: u64, alternative: Alternative) -> f64 {
    let total2: u64 = ranks2.iter().sum();
    // counts[s]: sign assignments whose positive ranks sum to s (doubled).
    let mut counts = vec![0u128; total2 as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            counts[s + r] += counts[s];
        }
        reach += r;
    }
    let scale = 0.5f64.powi(ranks2.len() as i32);
    let upper = counts[plus2 as usize..].iter().sum::<u128>() as f64 * scale;
    let lower = counts[..=plus2 as usize].iter().sum::<u128>() as f64 * scale;
    match alternative {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    }
}

fn normal_p(n: usize, tie_sizes: &[usize], w_plus: f64, alternative: Alternative) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term).sqrt();
    let std_normal = Normal::standard();
    let d = w_plus - mean;
    match alternative {
        Alternative::Greater => std_normal.sf((d - 0.5) / sd),
        Alternative::Less => std_normal.cdf((d + 0.5) / sd),
        Alternative::TwoSided => {
            let z = (d.abs() - 0.5).max(0.0) / sd;
            (2.0 * std_normal.sf(z)).min(1.0)
        }
    }
}
