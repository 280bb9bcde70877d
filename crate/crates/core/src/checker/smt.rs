//! Textual SMT-LIB v2 session with an external solver process.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::CheckerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub path: PathBuf,
    pub args: Vec<String>,
    /// Per-query limit passed to the solver as `:timeout`.
    pub timeout: Duration,
}

impl Default for SolverConfig {
    fn default() -> SolverConfig {
        SolverConfig {
            path: PathBuf::from("z3"),
            args: vec!["-in".into(), "-smt2".into()],
            timeout: Duration::from_secs(60),
        }
    }
}

impl SolverConfig {
    pub fn with_path(path: impl Into<PathBuf>) -> SolverConfig {
        SolverConfig {
            path: path.into(),
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sat {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

impl SExpr {
    /// Raw bits of a Boolean, bitvector or integer value.
    pub fn bits(&self) -> Option<u64> {
        match self {
            SExpr::Atom(a) => match a.as_str() {
                "true" => Some(1),
                "false" => Some(0),
                _ => {
                    if let Some(b) = a.strip_prefix("#b") {
                        u64::from_str_radix(&b[b.len().saturating_sub(64)..], 2).ok()
                    } else if let Some(h) = a.strip_prefix("#x") {
                        u64::from_str_radix(&h[h.len().saturating_sub(16)..], 16).ok()
                    } else {
                        a.parse().ok()
                    }
                }
            },
            SExpr::List(xs) => match xs.as_slice() {
                [SExpr::Atom(m), x] if m == "-" => {
                    x.bits().map(|v| (v as i64).wrapping_neg() as u64)
                }
                [SExpr::Atom(u), SExpr::Atom(bv), _] if u == "_" => {
                    bv.strip_prefix("bv")?.parse().ok()
                }
                _ => None,
            },
        }
    }
}

/// Parses one s-expression; returns it with the unparsed rest.
pub fn parse_sexpr(text: &str) -> Option<(SExpr, &str)> {
    let s = text.trim_start();
    let mut chars = s.char_indices();
    let (_, c) = chars.next()?;
    match c {
        '(' => {
            let mut items = Vec::new();
            let mut rest = &s[1..];
            loop {
                let t = rest.trim_start();
                if let Some(r) = t.strip_prefix(')') {
                    return Some((SExpr::List(items), r));
                }
                let (x, r) = parse_sexpr(t)?;
                items.push(x);
                rest = r;
            }
        }
        ')' => None,
        '|' => {
            let end = s[1..].find('|')? + 1;
            Some((SExpr::Atom(s[..=end].to_string()), &s[end + 1..]))
        }
        '"' => {
            let mut i = 1;
            let b = s.as_bytes();
            while i < b.len() {
                if b[i] == b'"' {
                    if b.get(i + 1) == Some(&b'"') {
                        i += 2;
                        continue;
                    }
                    return Some((SExpr::Atom(s[..=i].to_string()), &s[i + 1..]));
                }
                i += 1;
            }
            None
        }
        _ => {
            let end = s
                .find(|c: char| c.is_whitespace() || c == '(' || c == ')')
                .unwrap_or(s.len());
            Some((SExpr::Atom(s[..end].to_string()), &s[end..]))
        }
    }
}

/// Paren depth change of one line, ignoring quoted text.
fn depth_delta(line: &str) -> i64 {
    let mut d = 0;
    let mut in_str = false;
    let mut in_sym = false;
    for c in line.chars() {
        match c {
            '"' if !in_sym => in_str = !in_str,
            '|' if !in_str => in_sym = !in_sym,
            '(' if !in_str && !in_sym => d += 1,
            ')' if !in_str && !in_sym => d -= 1,
            _ => {}
        }
    }
    d
}

pub struct Session {
    child: Child,
    input: BufWriter<ChildStdin>,
    output: BufReader<ChildStdout>,
    /// Every command sent, for debugging.
    transcript: Vec<String>,
}

impl Session {
    pub fn start(cfg: &SolverConfig) -> Result<Session, CheckerError> {
        let mut child = Command::new(&cfg.path)
            .args(&cfg.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| {
                CheckerError::Solver(format!("cannot start {}: {e}", cfg.path.display()))
            })?;
        let input = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let output = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut s = Session {
            child,
            input,
            output,
            transcript: Vec::new(),
        };
        s.send("(set-option :produce-models true)")?;
        s.send(&format!(
            "(set-option :timeout {})",
            cfg.timeout.as_millis()
        ))?;
        s.send("(set-logic ALL)")?;
        Ok(s)
    }

    pub fn send(&mut self, cmd: &str) -> Result<(), CheckerError> {
        self.transcript.push(cmd.to_string());
        writeln!(self.input, "{cmd}")
            .map_err(|e| CheckerError::Solver(format!("solver write failed: {e}")))
    }

    pub fn transcript(&self) -> &[String] {
        &self.transcript
    }

    fn read_response(&mut self) -> Result<String, CheckerError> {
        self.input
            .flush()
            .map_err(|e| CheckerError::Solver(format!("solver write failed: {e}")))?;
        let mut text = String::new();
        let mut depth = 0i64;
        loop {
            let mut line = String::new();
            let n = self
                .output
                .read_line(&mut line)
                .map_err(|e| CheckerError::Solver(e.to_string()))?;
            if n == 0 {
                return Err(CheckerError::Solver(format!(
                    "solver exited unexpectedly after: {}",
                    text.trim()
                )));
            }
            if line.trim().is_empty() && text.is_empty() {
                continue;
            }
            depth += depth_delta(&line);
            text.push_str(&line);
            if depth <= 0 {
                break;
            }
        }
        let t = text.trim().to_string();
        if t.starts_with("(error") {
            return Err(CheckerError::Solver(t));
        }
        Ok(t)
    }

    pub fn declare(&mut self, name: &str, sort: &str) -> Result<(), CheckerError> {
        self.send(&format!("(declare-const {name} {sort})"))
    }

    pub fn assert(&mut self, term: &str) -> Result<(), CheckerError> {
        self.send(&format!("(assert {term})"))
    }

    pub fn push(&mut self) -> Result<(), CheckerError> {
        self.send("(push 1)")
    }

    pub fn pop(&mut self) -> Result<(), CheckerError> {
        self.send("(pop 1)")
    }

    pub fn check(&mut self) -> Result<Sat, CheckerError> {
        self.send("(check-sat)")?;
        match self.read_response()?.as_str() {
            "sat" => Ok(Sat::Sat),
            "unsat" => Ok(Sat::Unsat),
            "unknown" => Ok(Sat::Unknown),
            other => Err(CheckerError::Solver(format!(
                "unexpected check-sat reply `{other}`"
            ))),
        }
    }

    /// Model values of `terms`, in order.
    pub fn values(&mut self, terms: &[String]) -> Result<Vec<SExpr>, CheckerError> {
        if terms.is_empty() {
            return Ok(Vec::new());
        }
        self.send(&format!("(get-value ({}))", terms.join(" ")))?;
        let reply = self.read_response()?;
        let bad = || CheckerError::Solver(format!("malformed get-value reply: {reply}"));
        let (SExpr::List(pairs), _) = parse_sexpr(&reply).ok_or_else(bad)? else {
            return Err(bad());
        };
        if pairs.len() != terms.len() {
            return Err(bad());
        }
        pairs
            .into_iter()
            .map(|p| match p {
                SExpr::List(mut kv) if kv.len() == 2 => Ok(kv.pop().expect("two items")),
                _ => Err(bad()),
            })
            .collect()
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = writeln!(self.input, "(exit)");
        let _ = self.input.flush();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
