//! The true-evaluation boundary.
//!
//! Evaluators receive native parameter values and return an
//! [`ObjectivePair`]. Two families are provided:
//!
//! * built-in analytic problems (`zdt1`, `schaffer_n1`, `mock_docking`) used
//!   for tests and demos;
//! * an external process speaking a one-shot JSON protocol, which is how a
//!   real docking tool is plugged in through a small adapter script.
//!
//! # External protocol
//!
//! The child receives exactly one line on stdin:
//!
//! ```text
//! {"params": {"seed": 4711, "sw_max_its": 300, ...}}\n
//! ```
//!
//! and must exit with status 0 after printing, as the last line of its
//! stdout, `{"objectives": [f1, f2]}`. Anything else is a failed evaluation.
//! The child runs in its own process group, which is killed on timeout.
//!
//! # mock_docking
//!
//! A smooth synthetic energy/RMSD trade-off over the unit-cube image
//! `u = normalize(x)` of the bound space (`m` coordinates):
//!
//! ```text
//! f1 = -18 + 8 (1 - u_1)^2 + 4 mean_{i>=2} (u_i - 0.3)^2     (energy, kcal/mol-like)
//! f2 = 0.1 + 6 u_1^2       + 4 mean_{i>=2} (u_i - 0.6)^2     (RMSD, Angstrom-like)
//! ```
//!
//! The means vanish for `m = 1`.

use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::pareto::ObjectivePair;
use crate::space::{ParamKind, SearchSpace};

pub const DEFAULT_TIMEOUT_SECS: f64 = 600.0;

/// Class of a recoverable evaluation failure. The run records it and moves on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    NonZeroExit,
    Malformed,
    NonFinite,
    Timeout,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureKind::NonZeroExit => "non_zero_exit",
            FailureKind::Malformed => "malformed",
            FailureKind::NonFinite => "non_finite",
            FailureKind::Timeout => "timeout",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    /// The point could not be scored; it still consumes budget.
    #[error("{kind}: {message}")]
    Failed { kind: FailureKind, message: String },
    /// The evaluator itself is unusable; the run aborts.
    #[error("fatal evaluator error: {0}")]
    Fatal(String),
}

impl EvalError {
    fn failed(kind: FailureKind, message: impl Into<String>) -> Self {
        EvalError::Failed {
            kind,
            message: message.into(),
        }
    }
}

pub trait Evaluator {
    fn evaluate(&mut self, native: &[f64]) -> Result<ObjectivePair, EvalError>;
}

impl<F> Evaluator for F
where
    F: FnMut(&[f64]) -> Result<ObjectivePair, EvalError>,
{
    fn evaluate(&mut self, native: &[f64]) -> Result<ObjectivePair, EvalError> {
        self(native)
    }
}

/// Checks finiteness at the boundary.
pub fn check_finite(pair: ObjectivePair) -> Result<ObjectivePair, EvalError> {
    if pair.is_finite() {
        Ok(pair)
    } else {
        Err(EvalError::failed(
            FailureKind::NonFinite,
            format!("objectives ({}, {}) are not finite", pair.f1, pair.f2),
        ))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{problem}: {reason}")]
pub struct DomainError {
    pub problem: Builtin,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Zdt1,
    SchafferN1,
    MockDocking,
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Builtin::Zdt1 => "zdt1",
            Builtin::SchafferN1 => "schaffer_n1",
            Builtin::MockDocking => "mock_docking",
        })
    }
}

/// ZDT1 on `[0, 1]^m`, `m >= 2`. Its Pareto front is `f2 = 1 - sqrt(f1)`.
pub fn zdt1(x: &[f64]) -> Result<ObjectivePair, DomainError> {
    let err = |reason: String| DomainError {
        problem: Builtin::Zdt1,
        reason,
    };
    if x.len() < 2 {
        return Err(err(format!("needs at least 2 variables, got {}", x.len())));
    }
    if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(err(format!("variable {v} outside [0, 1]")));
    }
    let f1 = x[0];
    let g = 1.0 + 9.0 * x[1..].iter().sum::<f64>() / (x.len() - 1) as f64;
    let f2 = g * (1.0 - (f1 / g).sqrt());
    Ok(ObjectivePair::new(f1, f2))
}

/// Schaffer N.1: `(x^2, (x - 2)^2)` on one finite variable.
pub fn schaffer_n1(x: &[f64]) -> Result<ObjectivePair, DomainError> {
    match x {
        [v] if v.is_finite() => Ok(ObjectivePair::new(v * v, (v - 2.0) * (v - 2.0))),
        _ => Err(DomainError {
            problem: Builtin::SchafferN1,
            reason: format!("expects one finite variable, got {x:?}"),
        }),
    }
}

/// Synthetic docking stand-in on unit coordinates (see module docs).
pub fn mock_docking(u: &[f64]) -> ObjectivePair {
    let lead = u[0];
    let rest = &u[1..];
    let mean_sq = |c: f64| {
        if rest.is_empty() {
            0.0
        } else {
            rest.iter().map(|v| (v - c) * (v - c)).sum::<f64>() / rest.len() as f64
        }
    };
    let f1 = -18.0 + 8.0 * (1.0 - lead) * (1.0 - lead) + 4.0 * mean_sq(0.3);
    let f2 = 0.1 + 6.0 * lead * lead + 4.0 * mean_sq(0.6);
    ObjectivePair::new(f1, f2)
}

/// A built-in problem bound to the space whose native values it receives.
#[derive(Debug, Clone)]
pub struct BuiltinEvaluator {
    problem: Builtin,
    space: SearchSpace,
}

impl BuiltinEvaluator {
    pub fn new(problem: Builtin, space: SearchSpace) -> Self {
        Self { problem, space }
    }

    pub fn evaluate_native(&self, native: &[f64]) -> Result<ObjectivePair, DomainError> {
        match self.problem {
            Builtin::Zdt1 => zdt1(native),
            Builtin::SchafferN1 => schaffer_n1(native),
            Builtin::MockDocking => {
                let u = self.space.normalize(native).map_err(|e| DomainError {
                    problem: Builtin::MockDocking,
                    reason: e.to_string(),
                })?;
                Ok(mock_docking(&u))
            }
        }
    }
}

impl Evaluator for BuiltinEvaluator {
    fn evaluate(&mut self, native: &[f64]) -> Result<ObjectivePair, EvalError> {
        let pair = self
            .evaluate_native(native)
            .map_err(|e| EvalError::Fatal(e.to_string()))?;
        check_finite(pair)
    }
}

/// Launches one child process per evaluation.
#[derive(Debug, Clone)]
pub struct ExternalEvaluator {
    command: Vec<String>,
    timeout: Duration,
    workdir: Option<PathBuf>,
    space: SearchSpace,
}

impl ExternalEvaluator {
    pub fn new(
        command: Vec<String>,
        timeout: Duration,
        workdir: Option<PathBuf>,
        space: SearchSpace,
    ) -> Result<Self, EvalError> {
        if command.is_empty() || command[0].is_empty() {
            return Err(EvalError::Fatal("external command is empty".into()));
        }
        if timeout.is_zero() {
            return Err(EvalError::Fatal("timeout must be positive".into()));
        }
        Ok(Self {
            command,
            timeout,
            workdir,
            space,
        })
    }

    /// The request line (without the trailing newline).
    pub fn request(&self, native: &[f64]) -> String {
        let mut params = Map::new();
        for (p, &v) in self.space.params().iter().zip(native) {
            let value = match p.kind {
                ParamKind::Integer | ParamKind::Binary => json!(v as i64),
                ParamKind::Continuous => json!(v),
            };
            params.insert(p.name.clone(), value);
        }
        json!({ "params": params }).to_string()
    }

    fn spawn(&self) -> Result<Child, EvalError> {
        let mut cmd = Command::new(&self.command[0]);
        cmd.args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(dir) = &self.workdir {
            cmd.current_dir(dir);
        }
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
        }
        cmd.spawn()
            .map_err(|e| EvalError::Fatal(format!("cannot launch `{}`: {e}", self.command[0])))
    }
}

fn kill_tree(child: &mut Child) {
    #[cfg(unix)]
    // SAFETY: plain syscall on the child's process group id
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
    let _ = child.kill();
}

fn drain<R: Read + Send + 'static>(src: Option<R>) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut s) = src {
            let _ = s.read_to_end(&mut buf);
        }
        buf
    })
}

fn wait_with_deadline(child: &mut Child, timeout: Duration) -> std::io::Result<Option<ExitStatus>> {
    let deadline = Instant::now() + timeout;
    let mut pause = Duration::from_millis(1);
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok(Some(status));
        }
        let now = Instant::now();
        if now >= deadline {
            return Ok(None);
        }
        thread::sleep(pause.min(deadline - now));
        pause = (pause * 2).min(Duration::from_millis(20));
    }
}

/// Parses the child's stdout according to the response contract.
pub fn parse_response(stdout: &str) -> Result<ObjectivePair, EvalError> {
    let Some(line) = stdout.lines().rev().map(str::trim).find(|l| !l.is_empty()) else {
        return Err(EvalError::failed(FailureKind::Malformed, "no output"));
    };
    let value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(first) => {
            // Python's json module emits bare NaN / Infinity
            let patched = line
                .replace("-Infinity", "null")
                .replace("Infinity", "null")
                .replace("NaN", "null");
            serde_json::from_str(&patched).map_err(|_| {
                EvalError::failed(FailureKind::Malformed, format!("invalid JSON ({first}): {line}"))
            })?
        }
    };
    let objectives = value
        .get("objectives")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 2)
        .ok_or_else(|| {
            EvalError::failed(
                FailureKind::Malformed,
                format!("expected {{\"objectives\": [f1, f2]}}, got {line}"),
            )
        })?;
    let mut out = [0.0; 2];
    for (slot, v) in out.iter_mut().zip(objectives) {
        *slot = match v {
            Value::Null => f64::NAN,
            Value::Number(n) => n.as_f64().unwrap_or(f64::NAN),
            _ => {
                return Err(EvalError::failed(
                    FailureKind::Malformed,
                    format!("objective {v} is not a number"),
                ))
            }
        };
    }
    check_finite(ObjectivePair::new(out[0], out[1]))
}

impl Evaluator for ExternalEvaluator {
    fn evaluate(&mut self, native: &[f64]) -> Result<ObjectivePair, EvalError> {
        if native.len() != self.space.dim() {
            return Err(EvalError::Fatal(format!(
                "expected {} parameters, got {}",
                self.space.dim(),
                native.len()
            )));
        }
        let request = self.request(native);
        let mut child = self.spawn()?;
        let stdout = drain(child.stdout.take());
        let stderr = drain(child.stderr.take());
        if let Some(mut stdin) = child.stdin.take() {
            // a child that ignores stdin may already be gone
            let _ = stdin.write_all(request.as_bytes());
            let _ = stdin.write_all(b"\n");
        }

        let status = match wait_with_deadline(&mut child, self.timeout) {
            Ok(Some(status)) => status,
            Ok(None) => {
                kill_tree(&mut child);
                let _ = child.wait();
                return Err(EvalError::failed(
                    FailureKind::Timeout,
                    format!("no result after {:.3} s", self.timeout.as_secs_f64()),
                ));
            }
            Err(e) => {
                kill_tree(&mut child);
                let _ = child.wait();
                return Err(EvalError::Fatal(format!("waiting for child: {e}")));
            }
        };
        // a leftover grandchild may still hold our pipes; its group is alive
        // so the id cannot have been recycled
        let settle = Instant::now() + Duration::from_millis(200);
        while !(stdout.is_finished() && stderr.is_finished()) && Instant::now() < settle {
            thread::sleep(Duration::from_millis(2));
        }
        if !(stdout.is_finished() && stderr.is_finished()) {
            kill_tree(&mut child);
        }
        let out = stdout.join().unwrap_or_default();
        let err = stderr.join().unwrap_or_default();

        if !status.success() {
            let tail = String::from_utf8_lossy(&err);
            let tail: String = {
                let chars: Vec<char> = tail.trim().chars().collect();
                chars[chars.len().saturating_sub(200)..].iter().collect()
            };
            return Err(EvalError::failed(
                FailureKind::NonZeroExit,
                format!("child exited with {status}: {tail}"),
            ));
        }
        parse_response(&String::from_utf8_lossy(&out))
    }
}

/// Declarative evaluator choice, as written in a run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EvaluatorSpec {
    Builtin {
        name: Builtin,
    },
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
        #[serde(default)]
        workdir: Option<PathBuf>,
    },
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_SECS
}

impl EvaluatorSpec {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            EvaluatorSpec::Builtin { .. } => Ok(()),
            EvaluatorSpec::External {
                command,
                timeout_secs,
                ..
            } => {
                if command.is_empty() || command[0].trim().is_empty() {
                    return Err("external evaluator needs a nonempty command".into());
                }
                if !(timeout_secs.is_finite() && *timeout_secs > 0.0) {
                    return Err(format!("timeout_secs must be positive, got {timeout_secs}"));
                }
                Ok(())
            }
        }
    }

    pub fn build(&self, space: &SearchSpace) -> Result<Box<dyn Evaluator>, EvalError> {
        self.validate().map_err(EvalError::Fatal)?;
        Ok(match self {
            EvaluatorSpec::Builtin { name } => {
                Box::new(BuiltinEvaluator::new(*name, space.clone()))
            }
            EvaluatorSpec::External {
                command,
                timeout_secs,
                workdir,
            } => Box::new(ExternalEvaluator::new(
                command.clone(),
                Duration::from_secs_f64(*timeout_secs),
                workdir.clone(),
                space.clone(),
            )?),
        })
    }
}
