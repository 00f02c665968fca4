//! Sandboxed execution of snippets, calls, and assertions in an external
//! reference interpreter.
//!
//! Every request runs in a fresh interpreter process executing a fixed
//! harness script: the request record goes to the worker's stdin and the
//! reply comes back as one length-prefixed record, so snippet output can
//! never forge a result. A timed-out or crashing snippet only costs its
//! own process. The pool bounds how many interpreter processes run at
//! once; `CODECRASH_PYTHON` selects the interpreter binary.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

const HARNESS: &str = include_str!("harness.py");

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionLimits {
    pub wall_timeout: f64,
    pub stdout_cap: usize,
    pub memory_cap: Option<u64>,
}

impl Default for ExecutionLimits {
    fn default() -> Self {
        ExecutionLimits {
            wall_timeout: 5.0,
            stdout_cap: 64 * 1024,
            memory_cap: None,
        }
    }
}

impl ExecutionLimits {
    pub fn with_timeout(seconds: f64) -> Self {
        ExecutionLimits {
            wall_timeout: seconds,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionStatus {
    Ok,
    AssertFail,
    Exception,
    Timeout,
    SyntaxError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecutionStatus,
    pub value_repr: Option<String>,
    pub exception_type: Option<String>,
    pub stdout: String,
    /// Wall time of the run; excluded from serialized artifacts so that
    /// re-runs stay byte-identical.
    #[serde(default, skip_serializing)]
    pub duration: f64,
    pub executed_lines: Option<Vec<u32>>,
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("reference interpreter unavailable: {0}")]
    Unavailable(String),
    #[error("harness protocol error: {0}")]
    HarnessProtocol(String),
    #[error("oracle i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize)]
struct Request<'a> {
    code: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    expr: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    assertion: Option<&'a str>,
    mode: &'a str,
    trace: bool,
    stdout_cap: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    memory_cap: Option<u64>,
}

#[derive(Deserialize)]
struct Reply {
    status: String,
    value_repr: Option<String>,
    exception_type: Option<String>,
    stdout: String,
    executed_lines: Option<Vec<u32>>,
}

/// Bounded pool of one-shot interpreter processes.
pub struct OraclePool {
    interpreter: PathBuf,
    harness_path: PathBuf,
    _workdir: tempfile::TempDir,
    permits: Mutex<usize>,
    available: Condvar,
    jobs: usize,
}

impl OraclePool {
    /// Create a pool with `jobs` concurrent interpreter processes.
    pub fn new(jobs: usize) -> Result<Self, OracleError> {
        let jobs = jobs.max(1);
        let interpreter = std::env::var_os("CODECRASH_PYTHON")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("python3"));
        let workdir = tempfile::TempDir::new()?;
        let harness_path = workdir.path().join("harness.py");
        std::fs::write(&harness_path, HARNESS)?;
        let probe = Command::new(&interpreter)
            .arg("-c")
            .arg("print(41 + 1)")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .output()
            .map_err(|e| OracleError::Unavailable(format!("{}: {}", interpreter.display(), e)))?;
        if !probe.status.success() || !String::from_utf8_lossy(&probe.stdout).contains("42") {
            return Err(OracleError::Unavailable(format!(
                "{} failed the startup probe",
                interpreter.display()
            )));
        }
        Ok(OraclePool {
            interpreter,
            harness_path,
            _workdir: workdir,
            permits: Mutex::new(jobs),
            available: Condvar::new(),
            jobs,
        })
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    fn acquire(&self) {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
    }

    fn release(&self) {
        let mut permits = self.permits.lock().unwrap();
        *permits += 1;
        self.available.notify_one();
    }

    fn run(&self, req: &Request<'_>, limits: &ExecutionLimits) -> Result<ExecutionOutcome, OracleError> {
        self.acquire();
        let result = self.run_inner(req, limits);
        self.release();
        result
    }

    fn run_inner(
        &self,
        req: &Request<'_>,
        limits: &ExecutionLimits,
    ) -> Result<ExecutionOutcome, OracleError> {
        let jail = tempfile::TempDir::new()?;
        let start = Instant::now();
        let mut child = Command::new(&self.interpreter)
            .arg(&self.harness_path)
            .current_dir(jail.path())
            .env("PYTHONHASHSEED", "0")
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| OracleError::Unavailable(format!("{}: {}", self.interpreter.display(), e)))?;

        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            let mut line = serde_json::to_string(req).expect("request serializes");
            line.push('\n');
            // The child may exit before reading (syntax probe failures);
            // a broken pipe here is not an error.
            let _ = stdin.write_all(line.as_bytes());
        }

        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stdout.read_to_end(&mut buf);
            buf
        });

        let deadline = start + Duration::from_secs_f64(limits.wall_timeout);
        let mut timed_out = false;
        loop {
            match child.try_wait()? {
                Some(_) => break,
                None => {
                    if Instant::now() >= deadline {
                        timed_out = true;
                        let _ = child.kill();
                        let _ = child.wait();
                        break;
                    }
                    std::thread::sleep(Duration::from_millis(2));
                }
            }
        }
        let duration = start.elapsed().as_secs_f64();
        let output = reader.join().unwrap_or_default();

        if timed_out {
            return Ok(ExecutionOutcome {
                status: ExecutionStatus::Timeout,
                value_repr: None,
                exception_type: None,
                stdout: String::new(),
                duration,
                executed_lines: None,
            });
        }

        let reply = parse_frame(&output)?;
        let status = match reply.status.as_str() {
            "ok" => ExecutionStatus::Ok,
            "assert_fail" => ExecutionStatus::AssertFail,
            "exception" => ExecutionStatus::Exception,
            "syntax_error" => ExecutionStatus::SyntaxError,
            other => {
                return Err(OracleError::HarnessProtocol(format!(
                    "unknown status '{}'",
                    other
                )))
            }
        };
        Ok(ExecutionOutcome {
            status,
            value_repr: reply.value_repr,
            exception_type: reply.exception_type,
            stdout: reply.stdout,
            duration,
            executed_lines: reply.executed_lines,
        })
    }

    /// Execute `code`, then evaluate `call` and capture its repr.
    pub fn run_call(
        &self,
        code: &str,
        call: &str,
        limits: &ExecutionLimits,
    ) -> Result<ExecutionOutcome, OracleError> {
        self.run(
            &Request {
                code,
                expr: Some(call),
                assertion: None,
                mode: "call",
                trace: false,
                stdout_cap: limits.stdout_cap,
                memory_cap: limits.memory_cap,
            },
            limits,
        )
    }

    /// Execute `code`, then evaluate `call` under line tracing.
    pub fn run_call_traced(
        &self,
        code: &str,
        call: &str,
        limits: &ExecutionLimits,
    ) -> Result<ExecutionOutcome, OracleError> {
        self.run(
            &Request {
                code,
                expr: Some(call),
                assertion: None,
                mode: "call",
                trace: true,
                stdout_cap: limits.stdout_cap,
                memory_cap: limits.memory_cap,
            },
            limits,
        )
    }

    /// Execute `code`, then a single assert statement.
    pub fn assert_expr(
        &self,
        code: &str,
        assertion: &str,
        limits: &ExecutionLimits,
    ) -> Result<ExecutionOutcome, OracleError> {
        self.run(
            &Request {
                code,
                expr: None,
                assertion: Some(assertion),
                mode: "assert",
                trace: false,
                stdout_cap: limits.stdout_cap,
                memory_cap: limits.memory_cap,
            },
            limits,
        )
    }

    /// Evaluate a bare expression with no supporting code.
    pub fn eval_literal(
        &self,
        expr: &str,
        limits: &ExecutionLimits,
    ) -> Result<ExecutionOutcome, OracleError> {
        self.run_call("", expr, limits)
    }

    /// True iff both runs agree: OK with equal value reprs, or the same
    /// exception type. Stdout is ignored.
    pub fn check_equivalence(
        &self,
        vanilla: &str,
        perturbed: &str,
        call_a: &str,
        call_b: &str,
        limits: &ExecutionLimits,
    ) -> Result<bool, OracleError> {
        let a = self.run_call(vanilla, call_a, limits)?;
        let b = self.run_call(perturbed, call_b, limits)?;
        Ok(outcomes_equivalent(&a, &b))
    }

    /// True iff the traced run of `call` never enters a line strictly
    /// inside an injected statement body. Header lines (the first line of
    /// each injected span) may execute; anything past them must not.
    pub fn check_dead_injection(
        &self,
        perturbed: &str,
        call: &str,
        injected_spans: &[(u32, u32)],
        limits: &ExecutionLimits,
    ) -> Result<bool, OracleError> {
        let outcome = self.run_call_traced(perturbed, call, limits)?;
        let lines = outcome
            .executed_lines
            .as_ref()
            .ok_or_else(|| OracleError::HarnessProtocol("trace unsupported by harness".into()))?;
        for &line in lines {
            for &(start, end) in injected_spans {
                if line > start && line <= end {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// True iff two independent runs agree on (status, value_repr).
    pub fn double_run_determinism(
        &self,
        code: &str,
        call: &str,
        limits: &ExecutionLimits,
    ) -> Result<bool, OracleError> {
        let a = self.run_call(code, call, limits)?;
        let b = self.run_call(code, call, limits)?;
        Ok(a.status == b.status && a.value_repr == b.value_repr)
    }
}

/// Compare two outcomes the way equivalence checking does.
pub fn outcomes_equivalent(a: &ExecutionOutcome, b: &ExecutionOutcome) -> bool {
    match (a.status, b.status) {
        (ExecutionStatus::Ok, ExecutionStatus::Ok) => a.value_repr == b.value_repr,
        (ExecutionStatus::Exception, ExecutionStatus::Exception) => {
            a.exception_type == b.exception_type
        }
        _ => false,
    }
}

/// Locate the result frame. The genuine frame is the last thing the
/// harness writes, so it is the unique `CCRESULT <len>\n<payload>` whose
/// declared length consumes the output exactly; marker-shaped bytes that a
/// snippet smuggled onto the raw stream leave a remainder and are skipped.
fn parse_frame(output: &[u8]) -> Result<Reply, OracleError> {
    const MARKER: &[u8] = b"CCRESULT ";
    let mut found_marker = false;
    let mut search_from = 0usize;
    while search_from + MARKER.len() <= output.len() {
        let pos = match output[search_from..]
            .windows(MARKER.len())
            .position(|w| w == MARKER)
        {
            Some(p) => search_from + p,
            None => break,
        };
        found_marker = true;
        search_from = pos + 1;
        let rest = &output[pos + MARKER.len()..];
        let nl = match rest.iter().position(|&b| b == b'\n') {
            Some(n) => n,
            None => continue,
        };
        let len: usize = match std::str::from_utf8(&rest[..nl]).ok().and_then(|s| s.trim().parse().ok()) {
            Some(l) => l,
            None => continue,
        };
        let payload = &rest[nl + 1..];
        if payload.len() != len {
            continue;
        }
        return serde_json::from_slice(payload)
            .map_err(|e| OracleError::HarnessProtocol(format!("bad frame payload: {}", e)));
    }
    if found_marker {
        Err(OracleError::HarnessProtocol(
            "no frame with consistent length in output".into(),
        ))
    } else {
        Err(OracleError::HarnessProtocol("no result frame in output".into()))
    }
}
