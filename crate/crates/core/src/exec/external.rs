//! Subprocess adapter for external simulators such as Icarus Verilog.

use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;
use thiserror::Error;

use super::{ExecStatus, ExecutionResult, Executor};

pub const DEFAULT_FAILURE_PATTERN: &str = r"(?i)\b(error|fail)";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

/// Names the design and testbench are written under inside the work directory.
pub const DESIGN_FILE: &str = "design.v";
pub const TESTBENCH_FILE: &str = "testbench.v";

const POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("command template must contain {{design}} and {{testbench}}: `{0}`")]
    Template(String),
    #[error("cannot spawn command: {0}")]
    Spawn(#[from] std::io::Error),
}

/// What a finished (or killed) command produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawOutcome {
    /// `None` when killed by a signal.
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
    pub wall_time: Duration,
}

impl RawOutcome {
    /// Shell exit codes for "not executable" and "not found".
    pub fn spawn_failed(&self) -> bool {
        matches!(self.exit_code, Some(126 | 127))
    }

    pub fn output(&self) -> String {
        let mut s = self.stdout.clone();
        if !self.stderr.is_empty() {
            if !s.is_empty() && !s.ends_with('\n') {
                s.push('\n');
            }
            s.push_str(&self.stderr);
        }
        s
    }
}

/// Substitutes the design and testbench paths into `command_template` and
/// runs it with `sh -c` inside `workdir`.
pub fn run_external(command_template: &str, workdir: &Path, timeout: Duration) -> Result<RawOutcome, ExternalError> {
    if !command_template.contains("{design}") || !command_template.contains("{testbench}") {
        return Err(ExternalError::Template(command_template.to_string()));
    }
    let cmd = command_template
        .replace("{design}", DESIGN_FILE)
        .replace("{testbench}", TESTBENCH_FILE);
    run_command(&cmd, workdir, timeout)
}

/// Runs `cmd` with `sh -c` in its own process group. On timeout the whole
/// group is killed; stray background processes are reaped the same way once
/// the shell exits.
pub fn run_command(cmd: &str, workdir: &Path, timeout: Duration) -> Result<RawOutcome, ExternalError> {
    let start = Instant::now();
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .current_dir(workdir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()?;
    let pgid = child.id() as libc::pid_t;
    let drain = |pipe: Option<Box<dyn Read + Send>>| {
        thread::spawn(move || {
            let mut buf = Vec::new();
            if let Some(mut p) = pipe {
                let _ = p.read_to_end(&mut buf);
            }
            String::from_utf8_lossy(&buf).into_owned()
        })
    };
    let out = drain(child.stdout.take().map(|p| Box::new(p) as Box<dyn Read + Send>));
    let err = drain(child.stderr.take().map(|p| Box::new(p) as Box<dyn Read + Send>));

    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if start.elapsed() >= timeout {
            timed_out = true;
            break None;
        }
        thread::sleep(POLL);
    };
    // SAFETY: killpg only sends a signal; the group was created for this child.
    unsafe {
        libc::killpg(pgid, libc::SIGKILL);
    }
    let status = match status {
        Some(s) => s,
        None => child.wait()?,
    };
    Ok(RawOutcome {
        exit_code: if timed_out { None } else { status.code() },
        stdout: out.join().unwrap_or_default(),
        stderr: err.join().unwrap_or_default(),
        timed_out,
        wall_time: start.elapsed(),
    })
}

#[derive(Debug, Clone)]
pub struct ExternalConfig {
    /// Optional compile step; a nonzero exit is a `compile_error`.
    pub compile_template: Option<String>,
    /// Simulation step. Must contain both placeholders unless a compile
    /// template is given.
    pub run_template: String,
    pub failure_pattern: Regex,
    /// Budget shared by both steps.
    pub timeout: Duration,
}

impl ExternalConfig {
    pub fn new(run_template: impl Into<String>) -> Self {
        ExternalConfig {
            compile_template: None,
            run_template: run_template.into(),
            failure_pattern: Regex::new(DEFAULT_FAILURE_PATTERN).expect("valid default pattern"),
            timeout: DEFAULT_TIMEOUT,
        }
    }

    /// Icarus Verilog: `iverilog` then `vvp`.
    pub fn icarus() -> Self {
        ExternalConfig {
            compile_template: Some("iverilog -g2012 -o sim.vvp {design} {testbench}".into()),
            ..ExternalConfig::new("vvp -n sim.vvp")
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExternalSimulator {
    pub config: ExternalConfig,
}

impl ExternalSimulator {
    pub fn new(config: ExternalConfig) -> Self {
        ExternalSimulator { config }
    }

    fn run(&self, source: &str, testbench: &str) -> Result<(ExecStatus, String), ExternalError> {
        let dir = tempfile::tempdir()?;
        std::fs::write(dir.path().join(DESIGN_FILE), source)?;
        std::fs::write(dir.path().join(TESTBENCH_FILE), testbench)?;
        let start = Instant::now();
        let mut log = String::new();
        if let Some(compile) = &self.config.compile_template {
            let raw = run_external(compile, dir.path(), self.config.timeout)?;
            log.push_str(&raw.output());
            if raw.timed_out {
                return Ok((ExecStatus::Timeout, log));
            }
            if raw.spawn_failed() {
                return Ok((ExecStatus::InfraError, log));
            }
            if raw.exit_code != Some(0) {
                return Ok((ExecStatus::CompileError, log));
            }
        }
        let remaining = self.config.timeout.saturating_sub(start.elapsed());
        let raw = if self.config.compile_template.is_some() {
            run_command(&self.config.run_template, dir.path(), remaining)?
        } else {
            run_external(&self.config.run_template, dir.path(), remaining)?
        };
        log.push_str(&raw.output());
        let status = if raw.timed_out {
            ExecStatus::Timeout
        } else if raw.spawn_failed() {
            ExecStatus::InfraError
        } else if raw.exit_code == Some(0) && !raw.output().lines().any(|l| self.config.failure_pattern.is_match(l)) {
            ExecStatus::Pass
        } else {
            ExecStatus::Fail
        };
        Ok((status, log))
    }
}

impl Executor for ExternalSimulator {
    fn backend_id(&self) -> &str {
        "external"
    }

    fn execute(&self, source: &str, testbench: &str) -> ExecutionResult {
        let start = Instant::now();
        let (status, output) = match self.run(source, testbench) {
            Ok(r) => r,
            Err(e) => (ExecStatus::InfraError, e.to_string()),
        };
        ExecutionResult::new(status, &output, start.elapsed().as_secs_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(template: &str, timeout: Duration) -> ExternalSimulator {
        ExternalSimulator::new(ExternalConfig {
            timeout,
            ..ExternalConfig::new(template)
        })
    }

    #[test]
    fn echo_success_passes() {
        let r = sim("cat {design} {testbench}; echo ALL TESTS PASSED", DEFAULT_TIMEOUT).execute("d", "t");
        assert_eq!(r.status, ExecStatus::Pass, "{}", r.stdout_excerpt);
        assert!(r.stdout_excerpt.starts_with("dt"));
    }

    #[test]
    fn failure_pattern_or_exit_code_fails() {
        let r = sim("echo 'test FAILED' # {design} {testbench}", DEFAULT_TIMEOUT).execute("", "");
        assert_eq!(r.status, ExecStatus::Fail);
        let r = sim("echo fine; exit 3 # {design} {testbench}", DEFAULT_TIMEOUT).execute("", "");
        assert_eq!(r.status, ExecStatus::Fail);
        // The pattern is anchored at a word start.
        let r = sim("echo 'no faults, no terrors' # {design} {testbench}", DEFAULT_TIMEOUT).execute("", "");
        assert_eq!(r.status, ExecStatus::Pass);
    }

    #[test]
    fn sleeping_command_times_out() {
        let timeout = Duration::from_secs(1);
        let r = sim("sleep 30 # {design} {testbench}", timeout).execute("", "");
        assert_eq!(r.status, ExecStatus::Timeout);
        assert!(r.wall_time < timeout.as_secs_f64() + 1.0, "{}", r.wall_time);
    }

    #[test]
    fn background_children_are_killed_with_the_group() {
        let dir = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let raw = run_command("sleep 30 & sleep 30", dir.path(), Duration::from_millis(300)).unwrap();
        assert!(raw.timed_out);
        assert!(start.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn missing_binary_is_infra_error() {
        let r = sim("definitely-not-a-simulator-xyz {design} {testbench}", DEFAULT_TIMEOUT).execute("", "");
        assert_eq!(r.status, ExecStatus::InfraError);
    }

    #[test]
    fn compile_step_failure_is_compile_error() {
        let cfg = ExternalConfig {
            compile_template: Some("grep -q module {design} # {testbench}".into()),
            ..ExternalConfig::new("echo ok")
        };
        let s = ExternalSimulator::new(cfg);
        assert_eq!(s.execute("wire", "").status, ExecStatus::CompileError);
        assert_eq!(s.execute("module m; endmodule", "").status, ExecStatus::Pass);
    }

    #[test]
    fn template_requires_placeholders() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            run_external("echo {design}", dir.path(), DEFAULT_TIMEOUT),
            Err(ExternalError::Template(_))
        ));
        assert_eq!(
            sim("echo", DEFAULT_TIMEOUT).execute("", "").status,
            ExecStatus::InfraError
        );
    }
}
