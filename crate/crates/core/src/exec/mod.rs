//! Execution oracle: runs a candidate against a testbench and reports one of
//! five outcomes.
//!
//! Three backends implement [`Executor`]: [`external::ExternalSimulator`]
//! drives a simulator subprocess, [`mini::MiniBackend`] evaluates
//! combinational designs in-process against a [`mini::StimulusTable`], and
//! [`mock::ScriptedExecutor`] replays fixed outcomes.

pub mod external;
pub mod mini;
pub mod mock;
mod value;

use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model::{Candidate, Label};

pub use external::{run_external, ExternalConfig, ExternalSimulator, RawOutcome};
pub use mini::{evaluate_combinational, BitValue, Design, MiniBackend, MiniError, StimulusTable};
pub use mock::ScriptedExecutor;
pub use value::Vec4;

/// Cap on captured output kept in a result.
pub const STDOUT_EXCERPT_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Pass,
    Fail,
    CompileError,
    Timeout,
    InfraError,
}

impl ExecStatus {
    /// Candidate-attributable outcome as a label. `None` for timeouts and
    /// infrastructure errors, which say nothing about the candidate.
    pub fn label(self) -> Option<Label> {
        match self {
            ExecStatus::Pass => Some(Label::Pass),
            ExecStatus::Fail | ExecStatus::CompileError => Some(Label::Fail),
            ExecStatus::Timeout | ExecStatus::InfraError => None,
        }
    }
}

impl fmt::Display for ExecStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExecStatus::Pass => "pass",
            ExecStatus::Fail => "fail",
            ExecStatus::CompileError => "compile_error",
            ExecStatus::Timeout => "timeout",
            ExecStatus::InfraError => "infra_error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub status: ExecStatus,
    pub stdout_excerpt: String,
    /// Seconds.
    pub wall_time: f64,
}

impl ExecutionResult {
    pub fn new(status: ExecStatus, output: &str, wall_time: f64) -> Self {
        ExecutionResult {
            status,
            stdout_excerpt: excerpt(output),
            wall_time,
        }
    }
}

/// Truncates to [`STDOUT_EXCERPT_LIMIT`] bytes on a character boundary.
pub fn excerpt(text: &str) -> String {
    if text.len() <= STDOUT_EXCERPT_LIMIT {
        return text.to_string();
    }
    let mut end = STDOUT_EXCERPT_LIMIT;
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    text[..end].to_string()
}

pub trait Executor: Send + Sync {
    /// Short backend name recorded in manifests.
    fn backend_id(&self) -> &str;

    fn execute(&self, source: &str, testbench: &str) -> ExecutionResult;
}

impl<T: Executor + ?Sized> Executor for Arc<T> {
    fn backend_id(&self) -> &str {
        (**self).backend_id()
    }

    fn execute(&self, source: &str, testbench: &str) -> ExecutionResult {
        (**self).execute(source, testbench)
    }
}

/// Runs `candidate` on `backend`. A panicking backend yields `infra_error`.
pub fn execute(candidate: &Candidate, testbench: &str, backend: &dyn Executor) -> ExecutionResult {
    let start = Instant::now();
    match catch_unwind(AssertUnwindSafe(|| backend.execute(&candidate.source, testbench))) {
        Ok(r) => r,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| panic.downcast_ref::<&str>().copied())
                .unwrap_or("backend panicked");
            tracing::error!(candidate = %candidate.candidate_id, "executor panic: {msg}");
            ExecutionResult::new(ExecStatus::InfraError, msg, start.elapsed().as_secs_f64())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_serializes_snake_case() {
        let s = serde_json::to_string(&ExecStatus::CompileError).unwrap();
        assert_eq!(s, "\"compile_error\"");
        assert_eq!(ExecStatus::InfraError.to_string(), "infra_error");
    }

    #[test]
    fn labels_exclude_infrastructure_outcomes() {
        assert_eq!(ExecStatus::Pass.label(), Some(Label::Pass));
        assert_eq!(ExecStatus::CompileError.label(), Some(Label::Fail));
        assert_eq!(ExecStatus::Timeout.label(), None);
        assert_eq!(ExecStatus::InfraError.label(), None);
    }

    #[test]
    fn excerpt_respects_limit_and_boundaries() {
        let long = "é".repeat(3000);
        let e = excerpt(&long);
        assert!(e.len() <= STDOUT_EXCERPT_LIMIT);
        assert!(e.len() >= STDOUT_EXCERPT_LIMIT - 1);
        assert_eq!(excerpt("ok"), "ok");
    }

    struct Panics;
    impl Executor for Panics {
        fn backend_id(&self) -> &str {
            "panics"
        }
        fn execute(&self, _: &str, _: &str) -> ExecutionResult {
            panic!("boom")
        }
    }

    #[test]
    fn panicking_backend_is_infra_error() {
        let c = Candidate::new("p", "c0", "module m; endmodule");
        let r = execute(&c, "", &Panics);
        assert_eq!(r.status, ExecStatus::InfraError);
        assert_eq!(r.stdout_excerpt, "boom");
    }
}
