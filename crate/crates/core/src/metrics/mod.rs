//! Evaluation math: pass@k, reranked pass@1, judge log-loss, Wilcoxon
//! signed-rank tests and table aggregation.

mod nll;
mod passk;
mod percent;
mod report;
mod wilcoxon;

use thiserror::Error;

pub use nll::{discriminator_nll, NLL_EPSILON};
pub use passk::{pass_at_k, reranked_pass_at_1, suite_pass_at_k, ProblemOutcome};
pub use percent::{round_half_up, Percent, PercentError};
pub use report::{aggregate_report, upper_bound_ratio, AverageRow, ReportRow, ReportTable};
pub use wilcoxon::{
    wilcoxon_signed_rank, wilcoxon_signed_rank_with, Alternative, Method, PairedSample, WilcoxonResult, EXACT_MAX_N,
    MIN_NONZERO,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("pass@k undefined for n={n}, c={c}, k={k}")]
    Domain { n: usize, c: usize, k: usize },
    #[error("{0}: empty input")]
    Empty(&'static str),
    #[error("{found} nonzero differences, at least {required} required")]
    TooFewSamples { found: usize, required: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("row `{row}` has columns {found:?}, expected {expected:?}")]
    ColumnMismatch {
        row: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("division by zero")]
    DivisionByZero,
}
