//! Backend agreement: compiled C, Rust and SMT-LIB forms of random
//! predicates against the interpreter.

use std::fmt::Write as _;
use std::io::Write as _;
use std::process::{Command, Stdio};

use contraglot::codegen::{compile_to_c, compile_to_rust, compile_to_smt, smt_literal, NameMap};
use contraglot::il::flat::Layout;
use contraglot::il::{eval_bool, Assignment, Expr, SemType, Value, VarContext};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{random_state, Gen};

fn run(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Every state of `ctx` in layout order, last slot varying fastest.
pub fn all_states(c: &VarContext) -> Vec<Assignment> {
    let layout = Layout::new(c);
    let mut out = Vec::new();
    layout.for_each_state(|s| {
        out.push(layout.from_flat(s));
        true
    });
    out
}

/// An 8-bit, two 3-bit and one Boolean variable.
pub fn small_ctx() -> VarContext {
    VarContext::new(vec![
        ("x".into(), SemType::UInt(8)),
        ("a".into(), SemType::UInt(3)),
        ("s".into(), SemType::SInt(3)),
        ("f".into(), SemType::Bool),
    ])
    .unwrap()
}

pub fn random_exprs(c: &VarContext, n: usize, seed: u64) -> Vec<Expr> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Gen::new(c, false);
    (0..n).map(|_| g.boolean(&mut rng, 4)).collect()
}

/// Expected output: one line per state, one digit per expression.
pub fn interpreter_table(c: &VarContext, exprs: &[Expr]) -> String {
    let mut out = String::new();
    for st in all_states(c) {
        for e in exprs {
            out.push(if eval_bool(e, &st, None).unwrap() {
                '1'
            } else {
                '0'
            });
        }
        out.push('\n');
    }
    out
}

/// The same table from a gcc-compiled program over 8-bit storage.
pub fn c_table(c: &VarContext, exprs: &[Expr]) -> String {
    let m = NameMap::identity(c);
    let mut prog = String::from(
        "#include <stdint.h>\n#include <stdbool.h>\n#include <stdio.h>\nint main(void) {\n",
    );
    let layout = Layout::new(c);
    for slot in layout.slots() {
        let w = slot.ty.width().unwrap_or(1);
        let _ = writeln!(
            prog,
            "for (uint64_t i_{0} = 0; i_{0} < {1}ULL; i_{0}++) {{",
            slot.name,
            1u64 << w
        );
    }
    for slot in layout.slots() {
        let n = &slot.name;
        let _ = match &slot.ty {
            SemType::Bool => writeln!(prog, "bool {n} = i_{n};"),
            SemType::UInt(_) => writeln!(prog, "uint8_t {n} = (uint8_t)i_{n};"),
            SemType::SInt(w) => writeln!(
                prog,
                "int8_t {n} = (int8_t)((int64_t)(i_{n} << (64 - {w})) >> (64 - {w}));"
            ),
            SemType::Record(_) => unreachable!(),
        };
    }
    for e in exprs {
        let _ = writeln!(
            prog,
            "putchar({} ? '1' : '0');",
            compile_to_c(e, &m).unwrap()
        );
    }
    prog.push_str("putchar('\\n');\n");
    prog.push_str(&"}".repeat(layout.len()));
    prog.push_str("\nreturn 0;\n}\n");

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("agree.c");
    std::fs::write(&src, &prog).unwrap();
    let exe = dir.path().join("agree");
    run(Command::new("gcc")
        .args(["-std=c11", "-O1", "-w", "-o"])
        .arg(&exe)
        .arg(&src));
    run(&mut Command::new(&exe))
}

/// The same table from a rustc-compiled program with overflow checks on.
pub fn rust_table(c: &VarContext, exprs: &[Expr]) -> String {
    let m = NameMap::identity(c);
    let layout = Layout::new(c);
    let mut head = String::new();
    let mut body = String::new();
    for slot in layout.slots() {
        let w = slot.ty.width().unwrap_or(1);
        let (name, i) = (&slot.name, format!("i_{}", slot.name));
        let _ = writeln!(head, "for {i} in 0..{}u64 {{", 1u64 << w);
        body.push_str(&match &slot.ty {
            SemType::Bool => format!("let {name}: bool = {i} == 1;\n"),
            SemType::UInt(_) => format!("let {name}: u8 = {i} as u8;\n"),
            SemType::SInt(w) => {
                format!("let {name}: i8 = (({i} << (64 - {w})) as i64 >> (64 - {w})) as i8;\n")
            }
            SemType::Record(_) => unreachable!(),
        });
    }
    let mut prog = String::from("#![allow(unused_parens, clippy::all)]\nuse std::io::Write;\nfn main() {\nlet mut out = String::new();\n");
    prog.push_str(&head);
    prog.push_str(&body);
    for e in exprs {
        let _ = writeln!(
            prog,
            "out.push(if {} {{ '1' }} else {{ '0' }});",
            compile_to_rust(e, &m).unwrap()
        );
    }
    prog.push_str("out.push('\\n');\n");
    prog.push_str(&"}".repeat(layout.len()));
    prog.push_str("\nstd::io::stdout().write_all(out.as_bytes()).unwrap();\n}\n");

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("agree.rs");
    std::fs::write(&src, &prog).unwrap();
    let exe = dir.path().join("agree_rs");
    run(Command::new("rustc")
        .args(["-C", "overflow-checks=on", "-C", "opt-level=1", "-o"])
        .arg(&exe)
        .arg(&src));
    run(&mut Command::new(&exe))
}

fn smt_value(v: &Value) -> String {
    smt_literal(&v.sem_type(), v.bits().unwrap())
}

/// `(sym value)` bindings for the post state `post` and pre state `pre`,
/// under identity names.
fn let_bindings(c: &VarContext, pre: &Assignment, post: &Assignment) -> String {
    let layout = Layout::new(c);
    let pre_flat = layout.to_flat(pre).unwrap();
    let post_flat = layout.to_flat(post).unwrap();
    let mut s = String::new();
    for (i, slot) in layout.slots().iter().enumerate() {
        let pv = Value::from_bits(&slot.ty, pre_flat[i]);
        let qv = Value::from_bits(&slot.ty, post_flat[i]);
        let _ = write!(
            s,
            "({} {}) (old_{} {}) ",
            slot.name,
            smt_value(&qv),
            slot.name,
            smt_value(&pv)
        );
    }
    s
}

/// Evaluates `n_exprs` random predicates on `n_states` random pre/post
/// pairs each, by interpreter and by z3 on the compiled term. Returns
/// `(disagreements, cases)`.
pub fn smt_disagreements(n_exprs: usize, n_states: usize, seed: u64) -> (usize, usize) {
    let port = SemType::record(vec![
        ("value".into(), SemType::UInt(5)),
        ("ok".into(), SemType::Bool),
    ])
    .unwrap();
    let c = VarContext::new(vec![
        ("x".into(), SemType::UInt(8)),
        ("y".into(), SemType::UInt(16)),
        ("s".into(), SemType::SInt(4)),
        ("t".into(), SemType::SInt(64)),
        ("f".into(), SemType::Bool),
        ("p".into(), port),
    ])
    .unwrap();
    let g = Gen::new(&c, true);
    let m = NameMap::identity(&c);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut script = String::new();
    let mut want = Vec::new();
    for _ in 0..n_exprs {
        let e = g.boolean(&mut rng, 4);
        let term = compile_to_smt(&e, &m).unwrap();
        for _ in 0..n_states {
            let pre = random_state(&mut rng, &c);
            let post = random_state(&mut rng, &c);
            want.push(eval_bool(&e, &pre, Some(&post)).unwrap());
            let _ = writeln!(
                script,
                "(simplify (let ({}) {term}))",
                let_bindings(&c, &pre, &post)
            );
        }
    }
    let mut child = Command::new("z3")
        .args(["-in", "-smt2"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let writer = std::thread::spawn(move || stdin.write_all(script.as_bytes()).unwrap());
    let out = child.wait_with_output().unwrap();
    writer.join().unwrap();
    let got: Vec<Option<bool>> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| match l.trim() {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        })
        .collect();
    let bad = (0..want.len())
        .filter(|&i| got.get(i).copied().flatten() != Some(want[i]))
        .count();
    (bad, want.len())
}
