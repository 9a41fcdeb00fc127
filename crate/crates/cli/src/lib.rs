//! Benchmark harness: configuration, the generate → prefilter → score →
//! select → evaluate pipeline, report emission and strategy comparison.

pub mod commands;
pub mod compare;
pub mod config;
pub mod pipeline;
pub mod report;

pub use compare::{compare_strategies, CompareError, Comparison, DEFAULT_ALPHA};
pub use config::{BackendKind, ConfigError, Format, RunConfig, TransportKind};
pub use pipeline::{run_benchmark, run_with, RunError, RunReport, Services};
pub use report::{emit_report, load_run, ReportFile};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const RUNTIME: i32 = 2;
}
