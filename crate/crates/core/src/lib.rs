//! Reranking toolkit for LLM-generated Verilog.
//!
//! The pipeline filters a candidate pool through a Verilog syntax gate, scores
//! the survivors with a pluggable strategy (token probability, embedding
//! similarity, execution consensus, or a judge model with majority voting),
//! and keeps the argmax. Evaluation helpers compute unbiased pass@k, reranked
//! pass@1, judge log-loss and Wilcoxon signed-rank tests, and the
//! [`distill`] module builds judge-reasoning datasets from execution labels.
//!
//! Numeric routines are generic over [`Scalar`] / [`Real`], so the same
//! estimator can run in `f32`, `f64`, or exact rational arithmetic
//! ([`Exact`]).

pub mod distill;
pub mod exec;
pub mod judge;
pub mod metrics;
pub mod model;
pub mod rerank;
mod scalar;
pub mod syntax;

pub use scalar::{Real, Scalar};

/// Score type used by reranking strategies and reports.
pub type Score = f64;

/// Exact rational arithmetic, used for percentages and exact pass@k.
pub type Exact = num_rational::BigRational;

/// Single-precision variant, mostly useful for checking numerical stability.
pub type Score32 = f32;
