use std::path::PathBuf;
use std::process::{Command, Output};

use jbc2ctrs::ctrs::parse_ctrs;

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name).to_string_lossy().into_owned()
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jbc2ctrs")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const APPEND: &[&str] = &["--entry", "List.append", "--this-nonnull", "--assume", "acyclic:this", "--assume", "unshared:this,ys"];

fn with<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(tail).copied().collect()
}

#[test]
fn parse_prints_canonical_form() {
    let f = corpus("append.jbc");
    let o = cli(&["parse", &f]);
    assert_eq!(o.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let again = dir.path().join("again.jbc");
    std::fs::write(&again, stdout(&o)).unwrap();
    let o2 = cli(&["parse", &again.to_string_lossy()]);
    assert_eq!(stdout(&o2), stdout(&o));
}

#[test]
fn missing_file_is_io_error() {
    let o = cli(&["parse", "/nonexistent/x.jbc"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn recursion_is_rejected_at_verification() {
    let src = "Class:\n Name: R\n Classbody:\n  Superclass: Object\n  Fields:\n  Methods:\n   Method: unit f\n    Parameters:\n    Methodbody:\n     MaxStack: 1\n     MaxVars: 0\n     Bytecode:\n      00: Load 0\n      01: Invoke f 0\n      02: Return\n";
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rec.jbc");
    std::fs::write(&path, src).unwrap();
    let o = cli(&["parse", &path.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn node_limit_exits_with_limit_code() {
    let f = corpus("append.jbc");
    let o = cli(&with(&["graph", &f], &with(APPEND, &["--max-nodes", "3"])));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn zero_fuel_is_rejected() {
    let f = corpus("straight.jbc");
    let o = cli(&["run", &f, "--entry", "Calc.check", "--arg", "Calc{}", "--arg", "1", "--arg", "2", "--fuel", "0"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn looping_program_runs_out_of_fuel() {
    let f = corpus("dispatch.jbc");
    let o = cli(&["run", &f, "--entry", "B.m", "--arg", "B{}", "--fuel", "50"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn run_reports_steps_and_result() {
    let f = corpus("append.jbc");
    let o = cli(&["run", &f, "--entry", "List.append", "--arg", "List{next:List{next:null}}", "--arg", "null"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("steps: 26"), "{out}");
    assert!(out.contains("result: unit"), "{out}");
}

#[test]
fn graph_reports_size_and_writes_dot() {
    let f = corpus("append.jbc");
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("g.dot");
    let o = cli(&with(&["graph", &f], &with(APPEND, &["--dot", &dot.to_string_lossy()])));
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("nodes: 35"), "{out}");
    assert!(out.contains("K: 3"), "{out}");
    assert!(std::fs::read_to_string(&dot).unwrap().starts_with("digraph"));
}

#[test]
fn ctrs_output_is_deterministic() {
    let f = corpus("flatten.jbc");
    let args = ["ctrs", f.as_str(), "--entry", "Flatten.flatten", "--this-nonnull", "--assume", "acyclic:list"];
    let a = cli(&args);
    let b = cli(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(parse_ctrs(&stdout(&a)).is_ok());
}

#[test]
fn inits_has_a_right_hand_side_only_variable() {
    let f = corpus("inits.jbc");
    let o = cli(&["ctrs", &f, "--entry", "Main.inits", "--this-nonnull", "--assume", "acyclic:ys"]);
    assert_eq!(o.status.code(), Some(0));
    let c = parse_ctrs(&stdout(&o)).unwrap();
    assert!(c.rules.iter().any(|r| !r.extra_vars().is_empty()));
}

#[test]
fn simulate_holds_on_append() {
    let f = corpus("append.jbc");
    let o = cli(&with(&["simulate", &f], &with(APPEND, &["--arg", "List{next:List{next:null}}", "--arg", "List{next:null}"])));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn violated_assumption_is_refused() {
    let f = corpus("append.jbc");
    let o = cli(&with(&["simulate", &f], &with(APPEND, &["--arg", "#1 List{next:@1}", "--arg", "null"])));
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn out_flag_writes_file() {
    let f = corpus("straight.jbc");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.ctrs");
    let o = cli(&["ctrs", &f, "--entry", "Calc.check", "-o", &out.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
    assert!(parse_ctrs(&std::fs::read_to_string(out).unwrap()).is_ok());
}

/// Regression guard: the append system is stable across changes.
#[test]
fn append_ctrs_matches_golden() {
    let f = corpus("append.jbc");
    let o = cli(&with(&["ctrs", &f], APPEND));
    let golden = std::fs::read_to_string(corpus("golden/append.ctrs")).unwrap();
    assert_eq!(stdout(&o), golden);
}
