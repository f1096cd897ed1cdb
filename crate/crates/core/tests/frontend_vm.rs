mod common;

use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::Config;

use jbc2ctrs::frontend::{parse_program, render};
use jbc2ctrs::pipeline::{concrete_run, PipelineError};
use jbc2ctrs::program::TypeRef;
use jbc2ctrs::verify::{check_wellformed, stack_heights};
use jbc2ctrs::vm::{run, state_size, step, FailureReason, StateError, StepResult};
use jbc2ctrs::Program;

use common::*;

const CORPUS: &[&str] = &["append.jbc", "dispatch.jbc", "flatten.jbc", "inits.jbc", "straight.jbc"];

fn types(p: &Program) -> Vec<TypeRef> {
    let mut out = vec![TypeRef::Bool, TypeRef::Int, TypeRef::Unit, TypeRef::NullT];
    out.extend(p.class_names().map(|c| TypeRef::Class(c.clone())));
    out
}

#[test]
fn subtyping_is_a_partial_order() {
    for f in CORPUS {
        let p = corpus(f);
        let ts = types(&p);
        for a in &ts {
            assert!(p.is_subtype(a, a));
            for b in &ts {
                if a != b && p.is_subtype(a, b) {
                    assert!(!p.is_subtype(b, a), "{f}: {a} and {b} are mutual subtypes");
                }
                for c in &ts {
                    if p.is_subtype(a, b) && p.is_subtype(b, c) {
                        assert!(p.is_subtype(a, c), "{f}: {a} <: {b} <: {c}");
                    }
                }
            }
        }
    }
}

#[test]
fn lub_is_least_upper_bound() {
    for f in CORPUS {
        let p = corpus(f);
        let names: Vec<_> = p.class_names().cloned().collect();
        let sub = |a: &str, b: &str| p.is_subclass(a, b);
        for a in &names {
            for b in &names {
                let l = p.lub_class(a, b);
                assert!(sub(a, &l) && sub(b, &l), "{f}: lub({a},{b}) = {l}");
                for u in &names {
                    if sub(a, u) && sub(b, u) {
                        assert!(sub(&l, u), "{f}: lub({a},{b}) = {l} not below {u}");
                    }
                }
            }
        }
    }
}

#[test]
fn render_then_parse_is_identity() {
    for f in CORPUS {
        let p = corpus(f);
        let text = render(&p);
        let q = parse_program(&text).unwrap();
        assert_eq!(render(&q), text, "{f}");
        assert!(p.declared_classes().eq(q.declared_classes()), "{f}");
    }
}

#[test]
fn stack_heights_are_unique_per_pc() {
    for f in CORPUS {
        let p = corpus(f);
        for c in p.declared_classes() {
            for m in &c.methods {
                let (heights, diags) = stack_heights(&c.name, m);
                assert!(diags.is_empty(), "{f}: {diags:?}");
                assert_eq!(heights.len(), m.body.len());
                assert!(heights.iter().any(Option::is_some));
            }
        }
    }
}

#[test]
fn append_runtime_matches_closed_form() {
    // Entry block and exit block take 15 steps; each further cell adds 11.
    let p = corpus("append.jbc");
    for n in 1..=8 {
        let out = concrete_run(&p, "List.append", &[list_literal(n), list_literal(1)], 10_000, true).unwrap();
        assert!(matches!(out.result, StepResult::Halted(_)));
        assert_eq!(out.steps, 15 + 11 * (n - 1), "n = {n}");
        assert_eq!(out.trace.len(), out.steps + 1);
    }
}

#[test]
fn null_this_is_refused_at_entry() {
    let p = corpus("append.jbc");
    let err = concrete_run(&p, "List.append", &["null".into(), "null".into()], 100, false).unwrap_err();
    assert!(matches!(err, PipelineError::State(StateError::NullThis)), "{err}");
}

#[test]
fn getfield_on_null_fails() {
    let src = "Class:\n Name: Box\n Classbody:\n  Superclass: Object\n  Fields:\n   Box next\n  Methods:\n   Method: Box get\n    Parameters:\n     Box b\n    Methodbody:\n     MaxStack: 1\n     MaxVars: 0\n     Bytecode:\n      00: Load 1\n      01: Getfield next Box\n      02: Return\n";
    let p = parse_program(src).unwrap();
    assert!(check_wellformed(&p).is_empty());
    let out = concrete_run(&p, "Box.get", &["Box{}".into(), "null".into()], 10, false).unwrap();
    assert_eq!(out.result, StepResult::Failure(FailureReason::NullDeref));
    assert_eq!(out.steps, 1);
}

#[test]
fn straight_line_arithmetic() {
    let p = corpus("straight.jbc");
    for (a, b, want) in [(1, 2, "true"), (0, 2, "false"), (-5, 8, "true"), (-5, 7, "false")] {
        let out = concrete_run(&p, "Calc.check", &["Calc{}".into(), a.to_string(), b.to_string()], 100, false).unwrap();
        match out.result {
            StepResult::Halted(v) => assert_eq!(v.to_string(), want, "{a} + {b} - 3 >= 0"),
            other => panic!("{other:?}"),
        }
    }
}

fn program_for(body: &[String], max_stack: usize) -> String {
    let mut code = String::new();
    for (i, ins) in body.iter().enumerate() {
        code.push_str(&format!("      {i:02}: {ins}\n"));
    }
    format!(
        "Class:\n Name: Main\n Classbody:\n  Superclass: Object\n  Fields:\n  Methods:\n   Method: int main\n    Parameters:\n     int a\n    Methodbody:\n     MaxStack: {max_stack}\n     MaxVars: 2\n     Bytecode:\n{code}"
    )
}

fn instruction(len: usize) -> impl Strategy<Value = String> {
    let off = len as i64;
    prop_oneof![
        (0usize..4).prop_map(|n| format!("Load {n}")),
        (1usize..4).prop_map(|n| format!("Store {n}")),
        (-3i64..4).prop_map(|z| format!("Push {z}")),
        Just("Push true".to_string()),
        Just("Pop".to_string()),
        Just("IAdd".to_string()),
        Just("ISub".to_string()),
        Just("CmpGeq".to_string()),
        Just("CmpEq".to_string()),
        Just("Not".to_string()),
        Just("And".to_string()),
        (-off..off).prop_map(|d| format!("Goto {d}")),
        (1usize..len.max(2)).prop_map(|d| format!("IfFalse {d}")),
        Just("Return".to_string()),
    ]
}

fn body() -> impl Strategy<Value = Vec<String>> {
    (2usize..10).prop_flat_map(|n| vec(instruction(n), n))
}

proptest! {
    #![proptest_config(Config { cases: 2000, failure_persistence: None, ..Config::default() })]

    /// Programs that pass the checker never underflow the stack, touch a
    /// register out of range or leave the method body. Operand types are
    /// not part of the check.
    #[test]
    fn verified_programs_do_not_get_stuck(code in body(), max_stack in 1usize..4, a in -3i64..4) {
        let Ok(p) = parse_program(&program_for(&code, max_stack)) else { return Ok(()) };
        if !check_wellformed(&p).is_empty() {
            return Ok(());
        }
        let out = concrete_run(&p, "Main.main", &["Main{}".into(), a.to_string()], 200, false).unwrap();
        if let StepResult::Failure(FailureReason::Stuck(why)) = &out.result {
            prop_assert!(why == "operand types", "{}\n{}", why, code.join("\n"));
        }
    }
}

proptest! {
    #![proptest_config(Config { cases: 256, failure_persistence: None, ..Config::default() })]

    #[test]
    fn step_is_deterministic_and_sizes_positive(bytes in vec(any::<u8>(), 16..160)) {
        let p = corpus("append.jbc");
        let mut t = Tape::new(&bytes);
        let n = 1 + t.pick(5);
        let args = vec![list_literal(n), if t.chance(50) { "null".into() } else { list_literal(1 + t.pick(3)) }];
        let out = concrete_run(&p, "List.append", &args, 10_000, true).unwrap();
        prop_assert!(matches!(out.result, StepResult::Halted(_)));
        prop_assert_eq!(out.trace.len(), out.steps + 1);
        for w in out.trace.windows(2) {
            prop_assert!(state_size(&w[0]) >= 1u32.into());
            prop_assert_eq!(step(&p, &w[0]), StepResult::Next(w[1].clone()));
            prop_assert_eq!(step(&p, &w[0]), step(&p, &w[0]));
        }
        let again = run(&p, &out.trace[0], 10_000, false);
        prop_assert_eq!(again.steps, out.steps);
        prop_assert_eq!(again.last, out.last);
    }
}
