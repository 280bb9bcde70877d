mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use contraglot::codegen::{
    compile_to_c, compile_to_rust, compile_to_smt, emit_cbmc_harness, emit_kani_harness,
    CodegenError, HarnessSpec, HarnessVar, NameMap, Role,
};
use contraglot::il::{
    eval, parse_contract, parse_expr, Assignment, Contract, Expr, Position, SemType, Value,
    VarContext,
};
use contraglot::model::{Access, Language, Procedure};

use common::backends::{
    c_table, interpreter_table, random_exprs, rust_table, small_ctx, smt_disagreements,
};
use common::have;

fn ctx(vars: &[(&str, SemType)]) -> VarContext {
    VarContext::new(
        vars.iter()
            .map(|(n, t)| (n.to_string(), t.clone()))
            .collect(),
    )
    .unwrap()
}

fn u(w: u32) -> SemType {
    SemType::UInt(w)
}

fn s(w: u32) -> SemType {
    SemType::SInt(w)
}

fn pq_ctx() -> VarContext {
    ctx(&[("req", u(32)), ("resp", SemType::Bool)])
}

fn pq_names() -> NameMap {
    NameMap::new(&pq_ctx())
        .with_post("req", "request", Access::Port)
        .with_post("resp", "response", Access::Port)
}

#[test]
fn c_examples() {
    let c = pq_ctx();
    let e = parse_expr("req <u 3", &c, Position::Pre).unwrap();
    assert_eq!(
        compile_to_c(&e, &pq_names()).unwrap(),
        "(request->value < 3U)"
    );
    let e = parse_expr("(req <u 3) || resp", &c, Position::Pre).unwrap();
    assert_eq!(
        compile_to_c(&e, &pq_names()).unwrap(),
        "((request->value < 3U) || response->value)"
    );
    assert_eq!(compile_to_c(&Expr::tt(), &pq_names()).unwrap(), "1");
    assert_eq!(compile_to_c(&Expr::ff(), &pq_names()).unwrap(), "0");
}

#[test]
fn rust_examples() {
    let c = ctx(&[("x", u(8)), ("y", u(8)), ("count", u(8))]);
    let m = NameMap::identity(&c)
        .with_pre("count", "old_count", Access::Direct)
        .with_post("count", "self_count", Access::Direct);
    let add = parse_expr("x + 1", &c, Position::Pre).unwrap();
    assert_eq!(compile_to_rust(&add, &m).unwrap(), "x.wrapping_add(1u8)");
    let eq = parse_expr("old(count) == count", &c, Position::Post).unwrap();
    assert_eq!(
        compile_to_rust(&eq, &m).unwrap(),
        "(old_count == self_count)"
    );
    let lt = parse_expr("x <u y", &c, Position::Pre).unwrap();
    assert_eq!(compile_to_rust(&lt, &m).unwrap(), "(x < y)");
}

#[test]
fn smt_examples() {
    let c = ctx(&[
        ("x", u(8)),
        ("y", u(8)),
        ("a", s(8)),
        ("b", s(8)),
        ("p", SemType::Bool),
        ("q", SemType::Bool),
    ]);
    let m = NameMap::identity(&c);
    let smt = |t: &str| compile_to_smt(&parse_expr(t, &c, Position::Post).unwrap(), &m).unwrap();
    assert_eq!(smt("x <u y"), "(bvult x y)");
    assert_eq!(smt("a <s b"), "(bvslt a b)");
    assert_eq!(smt("p && !q"), "(and p (not q))");
    assert_eq!(smt("x == old(x) + 1"), "(= x (bvadd old_x (_ bv1 8)))");
}

#[test]
fn records_flatten_per_backend() {
    let port = SemType::record(vec![
        ("value".into(), u(16)),
        ("is_present".into(), SemType::Bool),
    ])
    .unwrap();
    let c = ctx(&[("p", port)]);
    let e = parse_expr("p == old(p) && p.value >u 2", &c, Position::Post).unwrap();
    let smt = compile_to_smt(&e, &NameMap::identity(&c)).unwrap();
    assert_eq!(
        smt,
        "(and (and (= p.value old_p.value) (= p.is_present old_p.is_present)) (bvugt p.value (_ bv2 16)))"
    );
    let m = NameMap::new(&c)
        .with_post("p", "port", Access::Pointer)
        .with_pre("p", "old_p", Access::Direct);
    let c_text = compile_to_c(&e, &m).unwrap();
    assert!(
        c_text.contains("port->value") && c_text.contains("old_p.is_present"),
        "{c_text}"
    );
    assert!(matches!(
        compile_to_c(
            &e,
            &NameMap::new(&c)
                .with_post("p", "port", Access::Port)
                .with_pre("p", "o", Access::Direct)
        ),
        Err(CodegenError::UnsupportedAccess { .. })
    ));
}

#[test]
fn unmapped_and_non_injective_names() {
    let c = ctx(&[("x", u(8)), ("y", u(8))]);
    let e = parse_expr("x == old(y)", &c, Position::Post).unwrap();
    let only_post = NameMap::new(&c).with_post("x", "x", Access::Direct);
    assert_eq!(
        compile_to_c(&e, &only_post),
        Err(CodegenError::UnmappedVariable {
            var: "y".into(),
            old: true
        })
    );
    let clash = NameMap::identity(&c).with_post("y", "x", Access::Direct);
    assert_eq!(
        compile_to_smt(&e, &clash),
        Err(CodegenError::NonInjective("x".into()))
    );
}

fn scratch() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn run(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn c_backend_agrees_with_interpreter_exhaustively() {
    if !have("gcc") {
        eprintln!("skipped: gcc not available");
        return;
    }
    let c = small_ctx();
    let exprs = random_exprs(&c, 150, 11);
    assert!(
        c_table(&c, &exprs) == interpreter_table(&c, &exprs),
        "C backend disagrees with the interpreter"
    );
}

#[test]
fn rust_backend_agrees_with_interpreter_exhaustively() {
    if !have("rustc") {
        eprintln!("skipped: rustc not available");
        return;
    }
    let c = small_ctx();
    let exprs = random_exprs(&c, 150, 12);
    assert!(
        rust_table(&c, &exprs) == interpreter_table(&c, &exprs),
        "Rust backend disagrees with the interpreter"
    );
}

#[test]
fn smt_backend_agrees_with_interpreter_under_z3() {
    if !have("z3") {
        eprintln!("skipped: z3 not available");
        return;
    }
    let (bad, total) = smt_disagreements(500, 100, 2024);
    assert_eq!(total, 50_000);
    assert_eq!(bad, 0, "{bad} disagreements");
}

#[test]
fn saturating_ite_matches_interpreter_on_all_bytes() {
    let c = ctx(&[("x", u(8))]);
    let e = parse_expr("if (x <u 255) then (x + 1) else 255", &c, Position::Pre).unwrap();
    let text = compile_to_c(&e, &NameMap::identity(&c)).unwrap();
    assert_eq!(
        text,
        "((((uint32_t)(x)) < 255U) ? ((((uint32_t)(x)) + 1U) & 0xffU) : 255U)"
    );
    if !have("gcc") {
        return;
    }
    let prog = format!(
        "#include <stdint.h>\n#include <stdio.h>\nint main(void) {{ for (unsigned i = 0; i < 256; i++) {{ uint8_t x = i; printf(\"%u\\n\", (unsigned)({text})); }} return 0; }}\n"
    );
    let dir = scratch();
    std::fs::write(dir.path().join("sat.c"), prog).unwrap();
    let exe = dir.path().join("sat");
    run(Command::new("gcc")
        .arg("-o")
        .arg(&exe)
        .arg(dir.path().join("sat.c")));
    let got = run(&mut Command::new(&exe));
    for (i, line) in got.lines().enumerate() {
        let st = Assignment::from_pairs([("x", Value::uint(i as u64, 8))]);
        assert_eq!(
            Value::uint(line.parse().unwrap(), 8),
            eval(&e, &st, None).unwrap()
        );
    }
}

// Harnesses

const PQ_C: &str = "void ProcessQuery(request_t *request, response_t *response) {
    if (request->value < 3) {
        response->value = nondet_bool();
    } else {
        response->value = true;
    }
}
";

fn pq_harness(contract: &str) -> HarnessSpec {
    let c = pq_ctx();
    HarnessSpec {
        source: PQ_C.into(),
        entry: "ProcessQuery".into(),
        vars: vec![
            HarnessVar {
                name: "req".into(),
                ty: u(32),
                role: Role::Input,
                target: "request".into(),
                access: Access::Port,
            },
            HarnessVar {
                name: "resp".into(),
                ty: SemType::Bool,
                role: Role::Output,
                target: "response".into(),
                access: Access::Port,
            },
        ],
        contract: parse_contract(contract, &c).unwrap(),
        preamble: String::new(),
        nondet: vec!["req".into(), "resp".into()],
    }
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn check_golden(name: &str, text: &str) {
    let path = golden(name);
    if std::env::var_os("CONTRAGLOT_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, text).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert_eq!(
        text, want,
        "golden file {name} differs; rerun with CONTRAGLOT_BLESS=1 to update"
    );
}

#[test]
fn process_query_cbmc_harness_is_golden() {
    let text = emit_cbmc_harness(&pq_harness("requires true\nensures (req <u 3) || resp")).unwrap();
    assert!(text.contains("__CPROVER_assume(1);"));
    assert!(text.contains("assert(((request->value < 3U) || response->value));"));
    check_golden("process_query.cbmc.c", &text);
}

fn line_of(text: &str, needle: &str) -> usize {
    text.lines()
        .position(|l| l.contains(needle))
        .unwrap_or_else(|| panic!("`{needle}` not in harness:\n{text}"))
}

const WAITED_C: &str = "void Waited(void) {
    if (count < 255) {
        count = count + 1;
    }
    req = count;
}
";

fn waited_ctx() -> VarContext {
    ctx(&[("count", u(8)), ("req", u(8))])
}

fn waited_harness(contract: &str, source: &str) -> HarnessSpec {
    let p = Procedure {
        name: "Waited".into(),
        language: Language::C,
        source: source.into(),
        reads: ["count".to_string()].into(),
        writes: ["count".to_string(), "req".to_string()].into(),
        entry: None,
        bindings: Default::default(),
        preamble: String::new(),
    };
    HarnessSpec::from_procedure(
        &p,
        &waited_ctx(),
        parse_contract(contract, &waited_ctx()).unwrap(),
    )
}

const WAITED_OK: &str =
    "ensures count == (if (old(count) <u 255) then old(count) + 1 else 255) && req == count";

#[test]
fn harness_order_and_snapshots() {
    let h = waited_harness(WAITED_OK, WAITED_C);
    assert_eq!(
        h.vars.iter().map(|v| v.role).collect::<Vec<_>>(),
        vec![Role::State, Role::Output]
    );
    let text = emit_cbmc_harness(&h).unwrap();
    let nondet = line_of(&text, "count = nondet_uint8_t();");
    let snap = line_of(&text, "uint8_t old_count = count;");
    let assume = line_of(&text, "__CPROVER_assume(1);");
    let call = line_of(&text, "Waited();");
    let assert = line_of(&text, "assert(");
    assert!(
        nondet < snap && snap < assume && assume < call && call < assert,
        "{text}"
    );
    assert!(!text.contains("old_req"));
}

#[test]
fn unmapped_contract_variable_is_rejected() {
    let mut h = waited_harness("ensures true", WAITED_C);
    h.contract = Contract::new(Expr::tt(), Expr::eq(Expr::var("ghost"), Expr::uint(0, 8)));
    assert_eq!(
        emit_cbmc_harness(&h),
        Err(CodegenError::ContractVariableUnmapped("ghost".into()))
    );
    assert_eq!(
        emit_kani_harness(&h),
        Err(CodegenError::ContractVariableUnmapped("ghost".into()))
    );
    h.contract = Contract::trivial();
    h.entry = " ".into();
    assert_eq!(emit_cbmc_harness(&h), Err(CodegenError::MissingEntry));
}

const MOCK_C: &str = r#"#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>
static const char *cursor;
static uint64_t next(void) {
    if (!cursor) cursor = getenv("NONDET");
    if (!cursor || !*cursor) return 0;
    char *end;
    uint64_t v = strtoull(cursor, &end, 10);
    cursor = *end ? end + 1 : end;
    return v;
}
bool nondet_bool(void) { return next() & 1; }
uint8_t nondet_uint8_t(void) { return (uint8_t)next(); }
uint16_t nondet_uint16_t(void) { return (uint16_t)next(); }
uint32_t nondet_uint32_t(void) { return (uint32_t)next(); }
uint64_t nondet_uint64_t(void) { return next(); }
"#;

/// Builds `harness` against a nondet mock: failed assumptions exit 0,
/// failed assertions abort.
fn build_mocked(dir: &Path, harness: &str) -> PathBuf {
    std::fs::write(dir.join("mock.c"), MOCK_C).unwrap();
    std::fs::write(dir.join("harness.c"), harness).unwrap();
    let exe = dir.join("harness");
    run(Command::new("gcc")
        .args(["-std=c11", "-Wall", "-Werror=implicit-function-declaration"])
        .arg("-D__CPROVER_assume(c)=do { if (!(c)) exit(0); } while (0)")
        .arg("-o")
        .arg(&exe)
        .arg(dir.join("harness.c"))
        .arg(dir.join("mock.c")));
    exe
}

fn violations(exe: &Path, inputs: impl Iterator<Item = String>) -> Vec<String> {
    inputs
        .filter(|input| {
            !Command::new(exe)
                .env("NONDET", input)
                .output()
                .unwrap()
                .status
                .success()
        })
        .collect()
}

#[test]
fn mocked_cbmc_harness_checks_contracts_exhaustively() {
    if !have("gcc") {
        eprintln!("skipped: gcc not available");
        return;
    }
    let dir = scratch();
    let all = || (0..256).map(|c| format!("{c},7"));

    let ok = build_mocked(
        dir.path(),
        &emit_cbmc_harness(&waited_harness(WAITED_OK, WAITED_C)).unwrap(),
    );
    assert!(violations(&ok, all()).is_empty());

    let naive = waited_harness("ensures count == old(count) + 1", WAITED_C);
    let exe = build_mocked(dir.path(), &emit_cbmc_harness(&naive).unwrap());
    assert_eq!(violations(&exe, all()), vec!["255,7".to_string()]);

    let guarded = waited_harness(
        "requires count <u 255\nensures count == old(count) + 1",
        WAITED_C,
    );
    let exe = build_mocked(dir.path(), &emit_cbmc_harness(&guarded).unwrap());
    assert!(violations(&exe, all()).is_empty());

    let vacuous = waited_harness("requires false\nensures false", WAITED_C);
    let exe = build_mocked(dir.path(), &emit_cbmc_harness(&vacuous).unwrap());
    assert!(violations(&exe, all()).is_empty());

    let pq = build_mocked(
        dir.path(),
        &emit_cbmc_harness(&pq_harness("ensures (req <u 3) || resp")).unwrap(),
    );
    let pq_inputs = || {
        (0..6)
            .flat_map(|r| (0..2).flat_map(move |p| (0..2).map(move |n| format!("{r},{p},0,0,{n}"))))
    };
    assert!(violations(&pq, pq_inputs()).is_empty());
    let strict = build_mocked(
        dir.path(),
        &emit_cbmc_harness(&pq_harness("ensures resp")).unwrap(),
    );
    let bad = violations(&strict, pq_inputs());
    assert!(
        !bad.is_empty()
            && bad
                .iter()
                .all(|i| i.split(',').next().unwrap().parse::<u32>().unwrap() < 3)
    );
}

const WAITED_RS: &str = "pub fn waited(count: &mut u8, req: &mut u8) {
    *count = count.saturating_add(1);
    *req = *count;
}";

fn kani_waited(contract: &str) -> HarnessSpec {
    let mut h = waited_harness(contract, WAITED_RS);
    h.entry = "waited".into();
    h
}

#[test]
fn kani_harness_shape() {
    let text = emit_kani_harness(&kani_waited(WAITED_OK)).unwrap();
    let any = line_of(&text, "let mut count: u8 = kani::any();");
    let snap = line_of(&text, "let old_count = count;");
    let assume = line_of(&text, "kani::assume(true);");
    let call = line_of(&text, "waited(&mut count, &mut req);");
    let assert = line_of(&text, "assert!(");
    assert!(line_of(&text, "#[kani::proof]") < any);
    assert!(
        any < snap && snap < assume && assume < call && call < assert,
        "{text}"
    );
    assert!(text.contains("fn check_waited()"));
    assert!(text.contains("old_count.wrapping_add(1u8)"));

    let mut port = kani_waited("ensures true");
    port.vars[0].access = Access::Port;
    assert!(matches!(
        emit_kani_harness(&port),
        Err(CodegenError::UnsupportedAccess { .. })
    ));
}

const MOCK_KANI: &str = "mod kani {
    pub fn any<T: Default>() -> T { T::default() }
    pub fn assume(_cond: bool) {}
}
";

#[test]
fn kani_harness_typechecks_with_a_mock() {
    if !have("rustc") {
        eprintln!("skipped: rustc not available");
        return;
    }
    let odd = ctx(&[("count", u(3)), ("req", u(3))]);
    let mut h = kani_waited(WAITED_OK);
    let mut odd_h = kani_waited("ensures true");
    odd_h.source =
        "pub fn waited(count: &mut u8, req: &mut u8) { *count = (*count + 1) & 7; *req = *count; }"
            .into();
    odd_h.contract =
        parse_contract("ensures count == old(count) + 1 && req == count", &odd).unwrap();
    for v in &mut odd_h.vars {
        v.ty = u(3);
    }
    h.preamble = MOCK_KANI.into();
    odd_h.preamble = MOCK_KANI.into();
    let dir = scratch();
    for (i, h) in [h, odd_h].iter().enumerate() {
        let text = emit_kani_harness(h)
            .unwrap()
            .replace("#[kani::proof]\n", "");
        let src = dir.path().join(format!("k{i}.rs"));
        std::fs::write(&src, text).unwrap();
        run(Command::new("rustc")
            .args([
                "--cfg",
                "kani",
                "--crate-type",
                "lib",
                "--emit",
                "metadata",
                "-D",
                "warnings",
                "-A",
                "dead_code",
                "--out-dir",
            ])
            .arg(dir.path())
            .arg(&src));
    }
}
