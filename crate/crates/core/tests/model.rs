use std::path::PathBuf;

use contraglot::il::{parse_expr, Expr, Position, Value};
use contraglot::model::{
    holds, load_model, parse_model, simulate, validate_model, Diagnostic, PolyglotModel, Property,
    PropertyKind, ScriptedScheduler, SeededScheduler, SimError, Trace, Truth,
};

fn trainpass_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks/trainpass/model.toml")
}

fn trainpass() -> (PolyglotModel, Property) {
    let (m, p) = load_model(&trainpass_path()).unwrap();
    (m, p.unwrap())
}

fn passed(m: &PolyglotModel) -> Expr {
    parse_expr("passed", &m.property_context().unwrap(), Position::Pre).unwrap()
}

/// Choices are only consulted when there are at least two options; each
/// ProcessQuery call below req 3 offers {deny, grant} in that order.
fn denials_then_grant(denials: usize) -> ScriptedScheduler {
    let mut script = vec![0; denials];
    script.push(1);
    ScriptedScheduler::new(script)
}

#[test]
fn bundled_trainpass_is_well_formed() {
    let (m, p) = trainpass();
    assert_eq!(validate_model(&m), Vec::<Diagnostic>::new());
    assert_eq!(p.kind, PropertyKind::EventuallyWithin { time: 12 });
    assert_eq!(m.modes, vec!["requesting", "responded", "passed"]);
    let vars: Vec<&str> = m.vars.names().collect();
    assert_eq!(vars, vec!["count", "req", "resp", "passed"]);
    let pq = m.procedure("ProcessQuery").unwrap();
    assert_eq!(
        pq.context(&m.vars).names().collect::<Vec<_>>(),
        vec!["req", "resp"]
    );
}

#[test]
fn three_denials_then_grant_takes_sixteen() {
    let (m, p) = trainpass();
    let t = simulate(&m, 20, &mut denials_then_grant(3)).unwrap();
    t.check(&m).unwrap();
    let last = t.steps.last().unwrap();
    assert_eq!(last.mode, "passed");
    assert_eq!(last.time, 2 + 2 + 2 + 10);
    assert!(t.maximal);
    assert_eq!(last.state.get("passed"), Some(&Value::Bool(true)));
    assert_eq!(holds(&m, &p, &t).unwrap(), Truth::False);
    assert_eq!(
        holds(&m, &Property::eventually_within(16, passed(&m)), &t).unwrap(),
        Truth::True
    );
}

#[test]
fn immediate_grant_passes_at_ten() {
    let (m, p) = trainpass();
    let t = simulate(&m, 20, &mut denials_then_grant(0)).unwrap();
    t.check(&m).unwrap();
    assert_eq!(t.steps.last().unwrap().time, 10);
    assert_eq!(holds(&m, &p, &t).unwrap(), Truth::True);
}

#[test]
fn zero_steps_gives_initial_state() {
    let (m, p) = trainpass();
    let t = simulate(&m, 0, &mut SeededScheduler::new(7)).unwrap();
    assert_eq!(t.steps.len(), 1);
    assert_eq!(t.steps[0].mode, "requesting");
    assert_eq!(t.steps[0].time, 0);
    assert!(!t.maximal);
    assert_eq!(holds(&m, &p, &t).unwrap(), Truth::Inconclusive);
    assert_eq!(
        holds(&m, &Property::invariant(Expr::tt()), &t).unwrap(),
        Truth::True
    );
}

#[test]
fn simulation_is_deterministic_per_seed() {
    let (m, _) = trainpass();
    for seed in 0..20 {
        let a = simulate(&m, 12, &mut SeededScheduler::new(seed)).unwrap();
        let b = simulate(&m, 12, &mut SeededScheduler::new(seed)).unwrap();
        assert_eq!(a, b);
        a.check(&m).unwrap();
        let end = a.steps.last().unwrap();
        assert!(end.mode != "passed" || end.time <= 16);
    }
}

#[test]
fn some_seed_forces_three_denials() {
    let (m, _) = trainpass();
    let found = (0..500u64).any(|seed| {
        let t = simulate(&m, 20, &mut SeededScheduler::new(seed)).unwrap();
        t.steps.last().map(|s| (s.mode.as_str(), s.time)) == Some(("passed", 16))
    });
    assert!(found);
}

#[test]
fn mode_pseudo_variable_is_observable() {
    let (m, _) = trainpass();
    let ctx = m.property_context().unwrap();
    let in_passed = parse_expr("mode.passed ==> passed", &ctx, Position::Pre).unwrap();
    let t = simulate(&m, 20, &mut denials_then_grant(1)).unwrap();
    assert_eq!(
        holds(&m, &Property::invariant(in_passed), &t).unwrap(),
        Truth::True
    );
    let never = parse_expr("!mode.passed", &ctx, Position::Pre).unwrap();
    assert_eq!(
        holds(&m, &Property::invariant(never), &t).unwrap(),
        Truth::False
    );
}

const SMALL: &str = r#"
modes = ["a", "b"]
[vars]
x = "u3"
[init]
mode = "a"
predicate = "x == 0"
[procedures.Inc]
language = "mini"
source = "x := x + 1"
[[transitions]]
id = "go"
from = "a"
to = "b"
guard = "x <u 7"
update = ["Inc"]
"#;

#[test]
fn diagnostics_for_bad_models() {
    let (mut m, _) = parse_model(SMALL, None).unwrap();
    assert!(validate_model(&m).is_empty());

    let mut bad = m.clone();
    bad.transitions[0].update = vec!["Nope".into()];
    assert!(
        validate_model(&bad).contains(&Diagnostic::UnknownProcedure {
            transition: "go".into(),
            procedure: "Nope".into()
        })
    );

    let mut bad = m.clone();
    bad.transitions[0].guard = parse_expr("old(x) == x", &m.vars, Position::Post).unwrap();
    assert_eq!(
        validate_model(&bad),
        vec![Diagnostic::OldInGuard("go".into())]
    );

    let mut bad = m.clone();
    bad.transitions[0].to = "zzz".into();
    assert!(matches!(
        validate_model(&bad)[0],
        Diagnostic::UnknownMode { .. }
    ));

    m.vars = m.vars.with("mode", contraglot::il::SemType::Bool).unwrap();
    assert!(validate_model(&m).contains(&Diagnostic::ReservedName("mode".into())));
}

#[test]
fn guard_with_old_loads_and_is_flagged() {
    let text = SMALL.replace("guard = \"x <u 7\"", "guard = \"old(x) == x\"");
    let (m, _) = parse_model(&text, None).unwrap();
    assert_eq!(
        validate_model(&m),
        vec![Diagnostic::OldInGuard("go".into())]
    );
    assert!(matches!(
        simulate(&m, 3, &mut SeededScheduler::new(0)),
        Err(SimError::Invalid(_))
    ));
}

#[test]
fn stuck_state_truncates_trace() {
    let (m, _) = parse_model(SMALL, None).unwrap();
    let t = simulate(&m, 5, &mut SeededScheduler::new(0)).unwrap();
    assert_eq!(t.steps.len(), 2);
    assert!(t.maximal);
}

#[test]
fn c_procedures_are_not_simulated() {
    let text = SMALL.replace(
        "language = \"mini\"",
        "language = \"c\"\nreads = [\"x\"]\nwrites = [\"x\"]",
    );
    let (m, _) = parse_model(&text, None).unwrap();
    assert_eq!(
        simulate(&m, 3, &mut SeededScheduler::new(0)),
        Err(SimError::NotExecutable("Inc".into()))
    );
}

#[test]
fn records_load_in_declaration_order() {
    let text = SMALL.replace(
        "x = \"u3\"",
        "x = \"u3\"\nport = { value = \"u8\", is_present = \"bool\" }",
    );
    let (m, _) = parse_model(&text, None).unwrap();
    let ty = m.vars.get("port").unwrap();
    let names: Vec<String> = ty.leaves().into_iter().map(|(p, _)| p.join(".")).collect();
    assert_eq!(names, vec!["value", "is_present"]);
}

#[test]
fn holds_is_monotone_for_invariants() {
    let (m, _) = trainpass();
    let p = Property::invariant(parse_expr("count <u 2", &m.vars, Position::Pre).unwrap());
    let t = simulate(&m, 20, &mut denials_then_grant(3)).unwrap();
    let mut violated = false;
    for n in 1..=t.steps.len() {
        let prefix = Trace {
            steps: t.steps[..n].to_vec(),
            maximal: false,
        };
        let v = holds(&m, &p, &prefix).unwrap() == Truth::False;
        assert!(!violated || v);
        violated = v;
    }
    assert!(violated);
}
