//! CBMC and Kani adapters: emit a harness, run the tool as a subprocess,
//! and read the counterexample back from its structured output.

use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::{OracleError, ProcedureRef, UnknownReason, VerifResult, Verifier};
use crate::codegen::{emit_cbmc_harness, emit_kani_harness, HarnessSpec};
use crate::example::ExamplePair;
use crate::il::flat::{leaf_name, Layout};
use crate::il::{mask, Contract, SemType, VarContext};
use crate::model::Language;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub path: PathBuf,
    pub timeout: Duration,
    /// Extra command-line arguments, placed before the harness file.
    pub args: Vec<String>,
}

impl ToolConfig {
    pub fn new(path: impl Into<PathBuf>) -> ToolConfig {
        ToolConfig {
            path: path.into(),
            ..ToolConfig::default()
        }
    }
}

impl Default for ToolConfig {
    fn default() -> ToolConfig {
        ToolConfig {
            path: PathBuf::new(),
            timeout: Duration::from_secs(300),
            args: Vec::new(),
        }
    }
}

enum Run {
    Done {
        code: Option<i32>,
        stdout: String,
        stderr: String,
    },
    TimedOut,
}

fn run(cmd: &mut Command, timeout: Duration) -> std::io::Result<Run> {
    let mut child = cmd
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;
    let mut out_pipe = child.stdout.take().expect("piped stdout");
    let mut err_pipe = child.stderr.take().expect("piped stderr");
    let out_thread = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = out_pipe.read_to_string(&mut s);
        s
    });
    let err_thread = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = err_pipe.read_to_string(&mut s);
        s
    });
    let start = Instant::now();
    loop {
        if let Some(status) = child.try_wait()? {
            let stdout = out_thread.join().unwrap_or_default();
            let stderr = err_thread.join().unwrap_or_default();
            return Ok(Run::Done {
                code: status.code(),
                stdout,
                stderr,
            });
        }
        if start.elapsed() > timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(Run::TimedOut);
        }
        std::thread::sleep(Duration::from_millis(20));
    }
}

fn tool_error(e: impl std::fmt::Display) -> VerifResult {
    VerifResult::Unknown(UnknownReason::ToolError(e.to_string()))
}

fn unsupported(e: impl std::fmt::Display) -> VerifResult {
    VerifResult::Unknown(UnknownReason::Unsupported(e.to_string()))
}

fn c_ident(leaf: &str) -> String {
    leaf.replace('.', "_")
}

/// Bits of one trace value, read as `ty`.
fn json_bits(v: &Json, ty: &SemType) -> Option<u64> {
    let m = mask(ty.width().unwrap_or(1));
    if let Some(b) = v.get("binary").and_then(Json::as_str) {
        let tail = &b[b.len().saturating_sub(64)..];
        return u64::from_str_radix(tail, 2).ok().map(|x| x & m);
    }
    let data = v.get("data").unwrap_or(v);
    match data {
        Json::Bool(b) => Some(*b as u64),
        Json::Number(n) => n
            .as_u64()
            .or_else(|| n.as_i64().map(|i| i as u64))
            .map(|x| x & m),
        Json::String(s) => text_bits(s, m),
        _ => None,
    }
}

fn text_bits(s: &str, m: u64) -> Option<u64> {
    let s = s
        .trim()
        .trim_end_matches(|c: char| c.is_ascii_alphabetic() && c != 'E' && c != 'e');
    match s {
        "TRUE" | "true" => return Some(1),
        "FALSE" | "false" => return Some(0),
        _ => {}
    }
    if let Some(h) = s.strip_prefix("0x") {
        return u64::from_str_radix(h, 16).ok().map(|x| x & m);
    }
    s.parse::<u64>()
        .ok()
        .or_else(|| s.parse::<i64>().ok().map(|i| i as u64))
        .map(|x| x & m)
}

fn collect_assignments<'a>(v: &'a Json, out: &mut Vec<(&'a str, &'a Json)>) {
    match v {
        Json::Array(xs) => xs.iter().for_each(|x| collect_assignments(x, out)),
        Json::Object(o) => {
            if let (Some(Json::String(lhs)), Some(val)) = (o.get("lhs"), o.get("value")) {
                out.push((lhs.as_str(), val));
            }
            o.values().for_each(|x| collect_assignments(x, out));
        }
        _ => {}
    }
}

/// Reads the `__pv_pre_*` / `__pv_post_*` hooks from CBMC `--json-ui`
/// output. `None` when some leaf of `ctx` is missing or unreadable.
pub fn parse_cbmc_trace(json: &str, ctx: &VarContext) -> Option<ExamplePair> {
    let doc: Json = serde_json::from_str(json).ok()?;
    let mut steps = Vec::new();
    collect_assignments(&doc, &mut steps);
    let layout = Layout::new(ctx);
    let mut pre = Vec::new();
    let mut post = Vec::new();
    for slot in layout.slots() {
        let id = c_ident(&leaf_name(&slot.var, &slot.path));
        let find = |name: String| {
            steps
                .iter()
                .rev()
                .find(|(l, _)| *l == name)
                .and_then(|(_, v)| json_bits(v, &slot.ty))
        };
        pre.push(find(format!("__pv_pre_{id}"))?);
        post.push(find(format!("__pv_post_{id}"))?);
    }
    Some(ExamplePair::positive(
        layout.from_flat(&pre),
        layout.from_flat(&post),
    ))
}

/// Byte vectors of a Kani concrete-playback test, in `kani::any()` order.
fn playback_vectors(text: &str) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(i) = rest.find("vec![") {
        let body = &rest[i + 5..];
        match (body.find(']'), body.find('[')) {
            (Some(close), open) if open.is_none_or(|o| o > close) => {
                let bytes: Option<Vec<u8>> = body[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<u8>().ok())
                    .collect();
                if let Some(b) = bytes {
                    out.push(b);
                }
                rest = &body[close..];
            }
            _ => rest = body,
        }
    }
    out
}

/// Reads a Kani concrete-playback test. The harness draws one value per
/// variable before the call and one per variable after it, in declaration
/// order; every variable must be a scalar.
pub fn parse_kani_playback(text: &str, ctx: &VarContext) -> Option<ExamplePair> {
    let vecs = playback_vectors(text);
    let layout = Layout::new(ctx);
    let n = layout.len();
    if n != ctx.len() || vecs.len() < 2 * n {
        return None;
    }
    let vecs = &vecs[vecs.len() - 2 * n..];
    let decode = |bytes: &[u8], ty: &SemType| -> Option<u64> {
        if bytes.is_empty() || bytes.len() > 8 {
            return None;
        }
        let mut x = 0u64;
        for (k, b) in bytes.iter().enumerate() {
            x |= (*b as u64) << (8 * k);
        }
        Some(x & mask(ty.width().unwrap_or(1)))
    };
    let mut pre = Vec::new();
    let mut post = Vec::new();
    for (k, slot) in layout.slots().iter().enumerate() {
        pre.push(decode(&vecs[k], &slot.ty)?);
        post.push(decode(&vecs[n + k], &slot.ty)?);
    }
    Some(ExamplePair::positive(
        layout.from_flat(&pre),
        layout.from_flat(&post),
    ))
}

fn write_harness(dir: &Path, name: &str, text: &str) -> Result<PathBuf, VerifResult> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(tool_error)?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct CbmcVerifier {
    pub tool: ToolConfig,
}

impl CbmcVerifier {
    pub fn new(tool: ToolConfig) -> CbmcVerifier {
        CbmcVerifier { tool }
    }

    fn check(&self, c: &Contract, f: &ProcedureRef) -> Result<VerifResult, OracleError> {
        if f.language() != Language::C {
            return Err(OracleError::Unsupported(format!(
                "`{}` is not a C procedure",
                f.name()
            )));
        }
        let spec = HarnessSpec::from_procedure(&f.procedure, &f.ctx, c.clone());
        let text = emit_cbmc_harness(&spec)?;
        let dir = match tempfile::tempdir() {
            Ok(d) => d,
            Err(e) => return Ok(tool_error(e)),
        };
        let path = match write_harness(dir.path(), "harness.c", &text) {
            Ok(p) => p,
            Err(r) => return Ok(r),
        };
        let mut cmd = Command::new(&self.tool.path);
        cmd.args(&self.tool.args).arg(&path).arg("--json-ui");
        log::debug!("running {:?}", cmd);
        Ok(match run(&mut cmd, self.tool.timeout) {
            Err(e) => tool_error(format!("cannot run {}: {e}", self.tool.path.display())),
            Ok(Run::TimedOut) => VerifResult::Unknown(UnknownReason::Timeout),
            Ok(Run::Done { code: Some(0), .. }) => VerifResult::Pass,
            Ok(Run::Done {
                code: Some(10),
                stdout,
                ..
            }) => match parse_cbmc_trace(&stdout, &f.ctx) {
                Some(x) => VerifResult::Fail(x),
                None => unsupported("CBMC trace lacks values for the interface variables"),
            },
            Ok(Run::Done { code, stderr, .. }) => {
                tool_error(format!("cbmc exited with {code:?}: {}", stderr.trim()))
            }
        })
    }
}

impl Verifier for CbmcVerifier {
    fn name(&self) -> &str {
        "cbmc"
    }

    fn verify(&self, c: &Contract, f: &ProcedureRef) -> Result<VerifResult, OracleError> {
        self.check(c, f)
    }
}

#[derive(Debug, Clone)]
pub struct KaniVerifier {
    pub tool: ToolConfig,
}

impl KaniVerifier {
    pub fn new(tool: ToolConfig) -> KaniVerifier {
        KaniVerifier { tool }
    }

    fn check(&self, c: &Contract, f: &ProcedureRef) -> Result<VerifResult, OracleError> {
        if f.language() != Language::Rust {
            return Err(OracleError::Unsupported(format!(
                "`{}` is not a Rust procedure",
                f.name()
            )));
        }
        let spec = HarnessSpec::from_procedure(&f.procedure, &f.ctx, c.clone());
        let text = emit_kani_harness(&spec)?;
        let dir = match tempfile::tempdir() {
            Ok(d) => d,
            Err(e) => return Ok(tool_error(e)),
        };
        let path = match write_harness(dir.path(), "harness.rs", &text) {
            Ok(p) => p,
            Err(r) => return Ok(r),
        };
        let harness = format!("check_{}", spec.entry.replace("::", "_"));
        let mut cmd = Command::new(&self.tool.path);
        cmd.current_dir(dir.path())
            .args(&self.tool.args)
            .arg(&path)
            .args([
                "--harness",
                &harness,
                "-Z",
                "concrete-playback",
                "--concrete-playback=print",
            ]);
        log::debug!("running {:?}", cmd);
        Ok(match run(&mut cmd, self.tool.timeout) {
            Err(e) => tool_error(format!("cannot run {}: {e}", self.tool.path.display())),
            Ok(Run::TimedOut) => VerifResult::Unknown(UnknownReason::Timeout),
            Ok(Run::Done {
                code,
                stdout,
                stderr,
            }) => {
                if stdout.contains("VERIFICATION:- SUCCESSFUL") && code == Some(0) {
                    VerifResult::Pass
                } else if stdout.contains("VERIFICATION:- FAILED") {
                    match parse_kani_playback(&stdout, &f.ctx) {
                        Some(x) => VerifResult::Fail(x),
                        None => {
                            unsupported("Kani playback lacks values for the interface variables")
                        }
                    }
                } else {
                    tool_error(format!("kani exited with {code:?}: {}", stderr.trim()))
                }
            }
        })
    }
}

impl Verifier for KaniVerifier {
    fn name(&self) -> &str {
        "kani"
    }

    fn verify(&self, c: &Contract, f: &ProcedureRef) -> Result<VerifResult, OracleError> {
        self.check(c, f)
    }
}
