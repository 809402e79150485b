// SPDX-License-Identifier: Apache-2.0

//! Subprocess adapter for external verifiers.
//!
//! Wire protocol, one exchange per process, UTF-8, newline-terminated
//! single-line JSON messages:
//!
//! ```text
//! stdin  <- {"model": <model object>, "spec": <spec object>, "timeout_ms": <int>}\n
//! stdout -> {"verdict": "holds"|"violated"|"unknown"|"timeout",
//!            "cex": [<number>, ...]?, "stats": {...}?}\n
//! ```
//!
//! The adapter must exit with status 0 after writing its response. A nonzero
//! exit, termination by signal, or unparsable output is reported as a crash.
//! The child runs in its own process group, and the whole group is killed
//! once the exchange ends, so helper processes cannot outlive it.

use std::io::{Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::spec::TestCase;

use super::Verdict;

/// Precondition slack when validating counterexamples from external tools.
pub const EXTERNAL_CEX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    /// Program followed by its arguments.
    pub command: Vec<String>,
}

impl ExternalConfig {
    pub fn preflight(&self) -> Result<()> {
        let program = self
            .command
            .first()
            .ok_or_else(|| Error::AdapterNotFound("empty adapter command".into()))?;
        if resolve_program(program) {
            Ok(())
        } else {
            Err(Error::AdapterNotFound(program.clone()))
        }
    }
}

fn resolve_program(program: &str) -> bool {
    if program.contains('/') {
        return Path::new(program).is_file();
    }
    std::env::var_os("PATH")
        .map(|paths| std::env::split_paths(&paths).any(|dir| dir.join(program).is_file()))
        .unwrap_or(false)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Request {
    pub model: serde_json::Value,
    pub spec: serde_json::Value,
    pub timeout_ms: u64,
}

impl Request {
    pub fn new(tc: &TestCase, timeout_ms: u64) -> Self {
        Request {
            model: serde_json::to_value(&tc.network).expect("network serializes"),
            spec: tc.spec.to_file_value(),
            timeout_ms,
        }
    }

    /// The exact bytes written to the adapter.
    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("request serializes");
        line.push('\n');
        line
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Response {
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cex: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<serde_json::Value>,
}

impl Response {
    /// Maps a response to a verdict; protocol violations are errors.
    pub fn into_verdict(self, input_dim: usize) -> std::result::Result<Verdict, String> {
        match self.verdict.as_str() {
            "holds" => Ok(Verdict::Holds),
            "unknown" => Ok(Verdict::unknown("reported by adapter")),
            "timeout" => Ok(Verdict::Timeout),
            "violated" => match self.cex {
                Some(cex) if cex.len() == input_dim => Ok(Verdict::Violated { cex }),
                Some(cex) => Err(format!(
                    "counterexample has length {}, expected {input_dim}",
                    cex.len()
                )),
                None => Err("violated verdict without counterexample".into()),
            },
            other => Err(format!("unknown verdict `{other}`")),
        }
    }
}

fn kill_group(pid: u32) {
    // SAFETY: signalling a process group we created; ESRCH is harmless.
    unsafe {
        libc::kill(-(pid as libc::pid_t), libc::SIGKILL);
    }
}

fn drain<R: Read + Send + 'static>(source: Option<R>) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut s) = source {
            let _ = s.read_to_end(&mut buf);
        }
        buf
    })
}

fn tail(bytes: &[u8], limit: usize) -> String {
    let text = String::from_utf8_lossy(bytes);
    let start = text.len().saturating_sub(limit);
    let start = (start..=text.len()).find(|&i| text.is_char_boundary(i)).unwrap_or(0);
    text[start..].to_string()
}

pub fn external_verify(cfg: &ExternalConfig, tc: &TestCase, timeout_ms: u64) -> Verdict {
    let Some((program, args)) = cfg.command.split_first() else {
        return Verdict::crash("empty adapter command");
    };
    let mut cmd = Command::new(program);
    cmd.args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return Verdict::crash(format!("failed to spawn `{program}`: {e}")),
    };
    let pid = child.id();

    let request = Request::new(tc, timeout_ms).to_line();
    let stdin = child.stdin.take();
    let writer = thread::spawn(move || {
        if let Some(mut s) = stdin {
            // the adapter may exit without reading; a broken pipe is its business
            let _ = s.write_all(request.as_bytes());
        }
    });
    let stdout = drain(child.stdout.take());
    let stderr = drain(child.stderr.take());

    let waited = child.wait_timeout(Duration::from_millis(timeout_ms));
    let status = match waited {
        Ok(Some(status)) => Some(status),
        Ok(None) => None,
        Err(e) => {
            kill_group(pid);
            let _ = child.wait();
            let _ = writer.join();
            let _ = stdout.join();
            let _ = stderr.join();
            return Verdict::crash(format!("waiting for adapter failed: {e}"));
        }
    };
    kill_group(pid);
    if status.is_none() {
        let _ = child.wait();
    }
    let _ = writer.join();
    let out = stdout.join().unwrap_or_default();
    let err = stderr.join().unwrap_or_default();

    let Some(status) = status else {
        return Verdict::Timeout;
    };
    if !status.success() {
        let exit_info = match (status.code(), status.signal()) {
            (Some(code), _) => format!("exit status {code}"),
            (None, Some(sig)) => format!("killed by signal {sig}"),
            _ => "abnormal exit".to_string(),
        };
        return Verdict::Crash {
            diagnostic: format!("stderr: {}\nstdout: {}", tail(&err, 2000), tail(&out, 2000)),
            exit_info: Some(exit_info),
        };
    }
    let text = String::from_utf8_lossy(&out);
    let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let parsed = serde_json::from_str::<Response>(line)
        .map_err(|e| e.to_string())
        .and_then(|r| r.into_verdict(tc.spec.input_dim()));
    match parsed {
        Ok(v) => v,
        Err(reason) => Verdict::Crash {
            diagnostic: format!("malformed adapter output ({reason}); raw output: {}", tail(&out, 2000)),
            exit_info: Some("exit status 0".into()),
        },
    }
}
