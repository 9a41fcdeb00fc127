use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{ExecStatus, ExecutionResult, Executor};

type Script = dyn Fn(&str, &str) -> ExecStatus + Send + Sync;

/// Executor with predetermined outcomes, for tests and dry runs.
pub struct ScriptedExecutor {
    script: Box<Script>,
    calls: AtomicUsize,
}

impl ScriptedExecutor {
    pub fn from_fn(f: impl Fn(&str, &str) -> ExecStatus + Send + Sync + 'static) -> Self {
        ScriptedExecutor {
            script: Box::new(f),
            calls: AtomicUsize::new(0),
        }
    }

    /// Outcome per `(source, testbench)` pair, `default` for anything else.
    pub fn from_table(table: HashMap<(String, String), ExecStatus>, default: ExecStatus) -> Self {
        ScriptedExecutor::from_fn(move |s, t| table.get(&(s.to_string(), t.to_string())).copied().unwrap_or(default))
    }

    /// Outcome per source regardless of testbench.
    pub fn by_source(table: HashMap<String, ExecStatus>, default: ExecStatus) -> Self {
        ScriptedExecutor::from_fn(move |s, _| table.get(s).copied().unwrap_or(default))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl std::fmt::Debug for ScriptedExecutor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScriptedExecutor")
            .field("calls", &self.calls())
            .finish()
    }
}

impl Executor for ScriptedExecutor {
    fn backend_id(&self) -> &str {
        "mock"
    }

    fn execute(&self, source: &str, testbench: &str) -> ExecutionResult {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let status = (self.script)(source, testbench);
        ExecutionResult::new(status, &format!("scripted {status}"), 0.0)
    }
}
