//! Backend invocation and verdict parsing.
//!
//! One process per configuration: the rewritten model embeds all its
//! queries, and the checker emits one verdict line per query in order.
//! A mock backend reads verdicts from a file instead, keeping tests and
//! demo runs hermetic. Every failure mode degrades to per-query Error
//! statuses; the result list always has one entry per query.

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

pub const DEFAULT_COMMAND_TEMPLATE: &str = "verifyta -q {model}";
pub const DEFAULT_PASS_PATTERN: &str = "Formula is satisfied";
pub const DEFAULT_FAIL_PATTERN: &str = "Formula is NOT satisfied";
pub const DEFAULT_TIMEOUT_S: u64 = 60;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendKind {
    External,
    Mock { result_file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendSpec {
    /// Whitespace-separated command; `{model}` expands to the absolute
    /// model path and `{timeout_s}` to the timeout, per token.
    pub command_template: String,
    /// pass_pattern and fail_pattern are substring matches, non-empty and
    /// distinct for external backends.
    pub pass_pattern: String,
    pub fail_pattern: String,
    pub timeout_s: u64,
    pub kind: BackendKind,
}

impl BackendSpec {
    pub fn external(command_template: impl Into<String>) -> BackendSpec {
        BackendSpec {
            command_template: command_template.into(),
            pass_pattern: DEFAULT_PASS_PATTERN.into(),
            fail_pattern: DEFAULT_FAIL_PATTERN.into(),
            timeout_s: DEFAULT_TIMEOUT_S,
            kind: BackendKind::External,
        }
    }

    pub fn mock(result_file: impl Into<PathBuf>) -> BackendSpec {
        BackendSpec {
            kind: BackendKind::Mock {
                result_file: result_file.into(),
            },
            ..BackendSpec::default()
        }
    }
}

impl Default for BackendSpec {
    fn default() -> BackendSpec {
        BackendSpec::external(DEFAULT_COMMAND_TEMPLATE)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryStatus {
    Passed,
    Failed,
    /// Reason is non-empty: "timeout", "backend unavailable",
    /// "missing verdict", "verdict count mismatch", "unmapped", …
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryResult {
    /// 1-based query position.
    pub index: usize,
    pub formula: String,
    pub comment: String,
    pub status: QueryStatus,
    /// Whole-invocation wall time; every query of one run shares it.
    pub duration_ms: u64,
}

pub fn run_verification(
    model_path: &Path,
    queries: &[(String, String)],
    spec: &BackendSpec,
) -> Vec<QueryResult> {
    if queries.is_empty() {
        return Vec::new();
    }
    let started = Instant::now();
    let statuses = match &spec.kind {
        BackendKind::Mock { result_file } => mock_statuses(result_file, queries),
        BackendKind::External => external_statuses(model_path, queries, spec),
    };
    let duration_ms = started.elapsed().as_millis() as u64;
    debug_assert_eq!(statuses.len(), queries.len());
    queries
        .iter()
        .zip(statuses)
        .enumerate()
        .map(|(i, ((formula, comment), status))| QueryResult {
            index: i + 1,
            formula: formula.clone(),
            comment: comment.clone(),
            status,
            duration_ms,
        })
        .collect()
}

fn all_errors(n: usize, reason: &str) -> Vec<QueryStatus> {
    vec![QueryStatus::Error(reason.to_string()); n]
}

fn mock_statuses(result_file: &Path, queries: &[(String, String)]) -> Vec<QueryStatus> {
    let text = match fs::read_to_string(result_file) {
        Ok(text) => text,
        Err(e) => return all_errors(queries.len(), &format!("mock results unreadable: {e}")),
    };
    let mut map: HashMap<&str, QueryStatus> = HashMap::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((formula, verdict)) = line.split_once('\t') else {
            continue;
        };
        let status = match verdict.trim() {
            "pass" => QueryStatus::Passed,
            "fail" => QueryStatus::Failed,
            v if v.starts_with("error:") => {
                let reason = v["error:".len()..].trim();
                QueryStatus::Error(if reason.is_empty() { "error".into() } else { reason.into() })
            }
            v => QueryStatus::Error(format!("invalid mock verdict '{v}'")),
        };
        map.insert(formula, status);
    }
    queries
        .iter()
        .map(|(formula, _)| {
            map.get(formula.as_str())
                .cloned()
                .unwrap_or(QueryStatus::Error("unmapped".into()))
        })
        .collect()
}

fn external_statuses(
    model_path: &Path,
    queries: &[(String, String)],
    spec: &BackendSpec,
) -> Vec<QueryStatus> {
    let n = queries.len();
    let abs_model = model_path
        .canonicalize()
        .unwrap_or_else(|_| model_path.to_path_buf());
    let model_str = abs_model.to_string_lossy();
    let timeout_str = spec.timeout_s.to_string();
    let tokens: Vec<String> = spec
        .command_template
        .split_whitespace()
        .map(|tok| {
            tok.replace("{model}", &model_str)
                .replace("{timeout_s}", &timeout_str)
        })
        .collect();
    let Some((program, args)) = tokens.split_first() else {
        return all_errors(n, "empty backend command");
    };
    let mut child = match Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(child) => child,
        Err(_) => return all_errors(n, "backend unavailable"),
    };

    // Drain both pipes on threads so a chatty backend cannot block on a
    // full pipe buffer while we poll for exit.
    let mut stdout_pipe = child.stdout.take().expect("stdout piped");
    let mut stderr_pipe = child.stderr.take().expect("stderr piped");
    let stdout_thread = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout_pipe.read_to_string(&mut buf);
        buf
    });
    let stderr_thread = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr_pipe.read_to_string(&mut buf);
        buf
    });

    enum Outcome {
        Exited(std::process::ExitStatus),
        TimedOut,
        WaitFailed,
    }
    let deadline = Instant::now() + Duration::from_secs(spec.timeout_s);
    let outcome = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Outcome::Exited(status),
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    break Outcome::TimedOut;
                }
                std::thread::sleep(Duration::from_millis(15));
            }
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                break Outcome::WaitFailed;
            }
        }
    };
    // Join the drains only after a real exit. A killed backend may leave
    // grandchildren holding the pipes open indefinitely; dropping the
    // handles detaches the threads instead of blocking on those pipes.
    match outcome {
        Outcome::TimedOut => all_errors(n, "timeout"),
        Outcome::WaitFailed => all_errors(n, "backend wait failed"),
        Outcome::Exited(status) => {
            let mut raw = stdout_thread.join().unwrap_or_default();
            raw.push_str(&stderr_thread.join().unwrap_or_default());
            let statuses = parse_backend_output(&raw, spec, n);
            let any_verdict = statuses
                .iter()
                .any(|s| matches!(s, QueryStatus::Passed | QueryStatus::Failed));
            if !status.success() && !any_verdict {
                all_errors(n, &format!("nonzero exit: {status}"))
            } else {
                statuses
            }
        }
    }
}

/// Ordinal verdict mapping: the k-th line matching either pattern is the
/// verdict of query k. A line matching both patterns counts as a failure,
/// so a fail pattern that extends the pass pattern still wins. Shortfalls
/// pad with Error("missing verdict"); surplus taints the whole list, since
/// ordinal alignment is gone.
pub fn parse_backend_output(raw: &str, spec: &BackendSpec, n_queries: usize) -> Vec<QueryStatus> {
    debug_assert!(!spec.pass_pattern.is_empty() && !spec.fail_pattern.is_empty());
    let mut verdicts = Vec::new();
    for line in raw.lines() {
        if line.contains(&spec.fail_pattern) {
            verdicts.push(QueryStatus::Failed);
        } else if line.contains(&spec.pass_pattern) {
            verdicts.push(QueryStatus::Passed);
        }
    }
    if verdicts.len() > n_queries {
        return all_errors(n_queries, "verdict count mismatch");
    }
    verdicts.resize(n_queries, QueryStatus::Error("missing verdict".into()));
    verdicts
}
