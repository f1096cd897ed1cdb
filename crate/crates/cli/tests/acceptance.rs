//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any of them fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, VecDeque};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use jbc2ctrs::cgraph::{EdgeLabel, Limits, NodeId};
use jbc2ctrs::constraint::Sort;
use jbc2ctrs::ctrs::{
    corr_rule, parse_term, project_constructor, render_ctrs, rules_equivalent_modulo_renaming, Renaming, Rule, Term,
};
use jbc2ctrs::domain::{beta, equivalent, gamma_member, is_instance, join, reduce, AbstractState};
use jbc2ctrs::pipeline::{concrete_run, Analysis};
use jbc2ctrs::rewriter::compose;
use jbc2ctrs::shape::Assumptions;
use jbc2ctrs::vm::{state_size, JvmState, StepResult};
use jbc2ctrs::Program;

use common::*;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn analysis(file: &str, entry: &str, assume: &[&str], this_nonnull: bool) -> Result<Analysis, String> {
    let assumptions = Assumptions::parse(&assume.iter().map(|s| s.to_string()).collect::<Vec<_>>())
        .map_err(|e| e.to_string())?;
    Analysis::new(corpus(file), entry, assumptions, this_nonnull, Limits::default()).map_err(|e| e.to_string())
}

const APPEND_ASSUME: &[&str] = &["acyclic:this", "unshared:this,ys"];

fn append() -> Result<Analysis, String> {
    analysis("append.jbc", "List.append", APPEND_ASSUME, true)
}

fn crit1() -> Outcome {
    let p = corpus("append.jbc");
    let m = p.method("List", "append").ok_or("no List.append")?;
    check(m.body.len() == 22, || format!("{} instructions", m.body.len()))?;
    check(m.max_stack == 2 && m.max_locals == 1, || format!("max stack {} locals {}", m.max_stack, m.max_locals))?;
    let d = jbc2ctrs::verify::check_wellformed(&p);
    check(d.is_empty(), || format!("{} diagnostics", d.len()))?;
    Ok("22 instructions, stack 2, locals 1, well-formed".into())
}

const A: &str = "04 | ε | this=o1, ys=o2, cur=o1 | o1 = List(val=int, next=o3), o2 = list, o3 = list";
const B: &str = "04 | ε | this=o1, ys=o2, cur=o3 | o1 = List(next=o3), o2 = list, o4 = list, o3 = List(next=o4)";
const S: &str =
    "04 | ε | this=o1, ys=o2, cur=o4 | o1 = List(next=o3), o2 = list, o3 = list, o5 = list, o4 = List(next=o5)";

fn st(p: &Program, text: &str) -> AbstractState {
    AbstractState::State(tabular_state(p, "List", "append", text))
}

fn crit2() -> Outcome {
    let p = corpus("append.jbc");
    let (a, b, s) = (st(&p, A), st(&p, B), st(&p, S));
    check(is_instance(&p, &a, &s), || "A is not an instance of S".into())?;
    check(is_instance(&p, &b, &s), || "B is not an instance of S".into())?;
    check(!is_instance(&p, &s, &a), || "S is an instance of A".into())?;
    let j = join(&p, &a, &b);
    check(equivalent(&p, &j, &s), || format!("A ⊔ B = {j}"))?;
    Ok("A ⊑ S, B ⊑ S, S ⋢ A, A ⊔ B ≅ S".into())
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Path {
    Eval,
    Ins,
    Ref,
}

/// Edge indices of a shortest path from `x` to `y` using only edges of the
/// given kind.
fn find_path(an: &Analysis, x: NodeId, y: NodeId, kind: Path) -> Option<Vec<usize>> {
    let g = &an.graph;
    let ok = |l: &EdgeLabel| match kind {
        Path::Eval => matches!(l, EdgeLabel::Eval(_)),
        Path::Ins => matches!(l, EdgeLabel::Instance),
        Path::Ref => matches!(l, EdgeLabel::Refine(_)),
    };
    let mut prev: BTreeMap<NodeId, (NodeId, usize)> = BTreeMap::new();
    let mut q = VecDeque::from([x]);
    while let Some(n) = q.pop_front() {
        for (i, e) in g.out_edges(n) {
            if !ok(&e.label) || prev.contains_key(&e.to) {
                continue;
            }
            prev.insert(e.to, (n, i));
            if e.to == y {
                let mut path = vec![i];
                let mut cur = n;
                while cur != x {
                    let (pn, pi) = prev[&cur];
                    path.push(pi);
                    cur = pn;
                }
                path.reverse();
                return Some(path);
            }
            q.push_back(e.to);
        }
    }
    None
}

/// Reference nodes of the append graph, with `val` and annotations left out.
const NODES: &[(&str, &str)] = &[
    ("I", "00 | ε | this=o1, ys=o2, cur=unit | o1 = List(next=o3), o2 = list, o3 = list"),
    ("A", A),
    ("S", S),
    ("C", "07 | o5, null | this=o1, ys=o2, cur=o4 | o1 = List(next=o3), o2 = list, o3 = list, o5 = list, o4 = List(next=o5)"),
    ("C1", "07 | o5, null | this=o1, ys=o2, cur=o4 | o1 = List(next=o3), o2 = list, o3 = list, o6 = list, o4 = List(next=o5), o5 = List(next=o6)"),
    ("C2", "07 | null, null | this=o1, ys=o2, cur=o4 | o1 = List(next=o3), o2 = list, o3 = list, o4 = List(next=null)"),
    ("D", "04 | ε | this=o1, ys=o2, cur=o5 | o1 = List(next=o3), o2 = list, o3 = list, o6 = list, o5 = List(next=o6)"),
    ("E", "19 | o4, o2 | this=o1, ys=o2, cur=o4 | o1 = List(next=o3), o2 = list, o3 = list, o4 = List(next=null)"),
    ("E1", "19 | o1, o2 | this=o1, ys=o2, cur=o1 | o1 = List(next=null), o2 = list"),
    ("E2", "19 | o3, o2 | this=o1, ys=o2, cur=o3 | o1 = List(next=o3), o2 = list, o3 = List(next=null)"),
    ("E3", "19 | o4, o2 | this=o1, ys=o2, cur=o4 | o1 = List(next=o3), o2 = list, o3 = list, o4 = List(next=null)"),
    ("F1", "20 | ε | this=o1, ys=o2, cur=o1 | o1 = List(next=o2), o2 = list"),
    ("F2", "20 | ε | this=o1, ys=o2, cur=o3 | o1 = List(next=o3), o2 = list, o3 = List(next=o2)"),
    ("F3", "20 | ε | this=o1, ys=o2, cur=o4 | o1 = List(next=o3), o2 = list, o3 = list, o4 = List(next=o2)"),
];

/// Connections between reference nodes; each reference rule covers one.
const LINKS: &[(&str, &str, Path)] = &[
    ("I", "A", Path::Eval),
    ("A", "S", Path::Ins),
    ("S", "C", Path::Eval),
    ("C", "C1", Path::Ref),
    ("C", "C2", Path::Ref),
    ("C1", "D", Path::Eval),
    ("D", "S", Path::Ins),
    ("C2", "E", Path::Eval),
    ("E", "E1", Path::Ref),
    ("E1", "F1", Path::Eval),
    ("E", "E2", Path::Ref),
    ("E2", "F2", Path::Eval),
    ("E", "E3", Path::Ref),
    ("E3", "F3", Path::Eval),
];

/// Injective assignment of reference nodes to graph nodes respecting states and
/// connections.
fn locate(an: &Analysis) -> Option<BTreeMap<&'static str, NodeId>> {
    let p = &an.program;
    let cands: Vec<Vec<NodeId>> = NODES
        .iter()
        .map(|(_, text)| {
            let want = st(p, text);
            (0..an.graph.nodes.len())
                .filter(|&n| {
                    let got = AbstractState::State(strip_annotations(an.graph.nodes[n].state.as_state().unwrap()));
                    equivalent(p, &got, &want)
                })
                .collect()
        })
        .collect();
    fn go(
        an: &Analysis,
        k: usize,
        cands: &[Vec<NodeId>],
        asg: &mut BTreeMap<&'static str, NodeId>,
    ) -> bool {
        if k == NODES.len() {
            return true;
        }
        let name = NODES[k].0;
        for &n in &cands[k] {
            if asg.values().any(|&m| m == n) {
                continue;
            }
            asg.insert(name, n);
            let consistent = LINKS.iter().all(|(x, y, kind)| match (asg.get(x), asg.get(y)) {
                (Some(&a), Some(&b)) => find_path(an, a, b, *kind).is_some(),
                _ => true,
            });
            if consistent && go(an, k + 1, cands, asg) {
                return true;
            }
            asg.remove(name);
        }
        false
    }
    let mut asg = BTreeMap::new();
    go(an, 0, &cands, &mut asg).then_some(asg)
}

fn crit3() -> Outcome {
    let an = append()?;
    let asg = locate(&an).ok_or("reference nodes not found in the graph")?;
    let names: Vec<String> = asg.iter().map(|(k, v)| format!("{k}=f_{v}")).collect();
    Ok(format!("{} nodes; {}", an.graph.nodes.len(), names.join(" ")))
}

const REFERENCE_RULES: &[(&str, &str)] = &[
    ("f_I(List(l3), l2, null)", "f_A(List(l3), l2, List(l3))"),
    ("f_A(List(l3), l2, List(l3))", "f_S(List(l3), l2, List(l3))"),
    ("f_S(List(l3), l2, List(l5))", "f_C(l5, null, List(l3), l2, List(l5))"),
    ("f_C(List(l6), null, List(l3), l2, List(List(l6)))", "f_C1(List(l6), null, List(l3), l2, List(List(l6)))"),
    ("f_C(null, null, List(l3), l2, List(null))", "f_C2(null, null, List(l3), l2, List(null))"),
    ("f_C1(List(l6), null, List(l3), l2, List(List(l6)))", "f_D(List(l3), l2, List(l6))"),
    ("f_D(List(l3), l2, List(l6))", "f_S(List(l3), l2, List(l6))"),
    ("f_C2(null, null, List(l3), l2, List(null))", "f_E(List(null), l2, List(l3), l2, List(null))"),
    ("f_E(List(null), l2, List(null), l2, List(null))", "f_E1(List(null), l2, List(null), l2, List(null))"),
    ("f_E1(List(null), l2, List(null), l2, List(null))", "f_F1(List(l2), l2, List(l2))"),
    ("f_E(List(null), l2, List(List(null)), l2, List(null))", "f_E2(List(null), l2, List(List(null)), l2, List(null))"),
    ("f_E2(List(null), l2, List(List(null)), l2, List(null))", "f_F2(List(List(l2)), l2, List(l2))"),
    ("f_E(List(null), l2, List(l3), l2, List(null))", "f_E3(List(null), l2, List(l3), l2, List(null))"),
    ("f_E3(List(null), l2, List(l3), l2, List(null))", "f_F3(List(l4), l2, List(l2))"),
];

fn crit4() -> Outcome {
    // The reference rules write `ys` as one shared variable, which the translation
    // only produces when `ys` is known to be acyclic.
    let an = analysis("append.jbc", "List.append", &["acyclic:this", "acyclic:ys", "unshared:this,ys"], true)?;
    let base = append()?;
    check(an.graph.nodes.len() == base.graph.nodes.len() && an.graph.edges.len() == base.graph.edges.len(), || {
        "assuming acyclic ys changes the graph".into()
    })?;
    let p = &an.program;
    let asg = locate(&an).ok_or("reference nodes not found in the graph")?;
    let next = p.field_table_domain("List").iter().position(|(k, _)| &*k.name == "next").ok_or("no next field")?;
    let vars: BTreeMap<String, Sort> = (1..10).map(|i| (format!("l{i}"), Sort::Univ)).collect();
    let defined = |f: &str| f.starts_with("f_");
    let mut ren = Renaming::default();
    let mut fresh_rhs = false;
    for ((x, y, kind), (l, r)) in LINKS.iter().zip(REFERENCE_RULES) {
        let path = find_path(&an, asg[x], asg[y], *kind).ok_or_else(|| format!("no path {x} -> {y}"))?;
        let mut rule: Option<Rule> = None;
        for &e in &path {
            let r = corr_rule(p, &an.graph, e).map_err(|e| e.to_string())?;
            rule = Some(match rule {
                None => r,
                Some(acc) => compose(&acc, &r).ok_or_else(|| format!("{x} -> {y}: chain does not compose"))?,
            });
        }
        let rule = rule.ok_or("empty path")?;
        let ours = Rule {
            lhs: project_constructor(&rule.lhs, "List", &[next]),
            rhs: project_constructor(&rule.rhs, "List", &[next]),
            constraint: rule.constraint.clone(),
        };
        let theirs = Rule {
            lhs: parse_term(l, &vars).map_err(|e| e.to_string())?,
            rhs: parse_term(r, &vars).map_err(|e| e.to_string())?,
            constraint: jbc2ctrs::constraint::Formula::True,
        };
        if !rules_equivalent_modulo_renaming(&theirs, &ours, &mut ren, &defined) {
            return Err(format!("{x} -> {y}: expected {l} -> {r}, got {} -> {} [{}]", ours.lhs, ours.rhs, ours.constraint));
        }
        if *x == "E3" {
            fresh_rhs = !ours.extra_vars().is_empty();
        }
    }
    check(fresh_rhs, || "E3 -> F3 has no fresh right-hand side variable".into())?;
    Ok(format!("14 rules matched, {} emitted in total", an.ctrs.rules.len()))
}

fn append_runtime(cells: usize) -> usize {
    15 + 11 * (cells - 1)
}

fn crit5() -> Outcome {
    let an = append()?;
    let mut ks = Vec::new();
    let mut rows = Vec::new();
    for n in 1..=4 {
        let args = vec![list_literal(n), "List{}".to_string()];
        let (out, rep) = an.simulate(&args, 10_000, None).map_err(|e| e.to_string())?;
        check(out.steps == append_runtime(n), || format!("n={n}: {} steps", out.steps))?;
        check(rep.steps.iter().all(|s| !s.rules.is_empty()), || format!("n={n}: a step has no rewrite"))?;
        check(rep.holds(), || format!("n={n}: m={} L={} K={}", rep.m, rep.l, rep.k))?;
        ks.push(rep.k);
        rows.push(format!("{}:{}/{}", n, rep.m, rep.l));
    }
    check(ks.windows(2).all(|w| w[0] == w[1]), || format!("K varies: {ks:?}"))?;
    Ok(format!("K={} m/L {}", ks[0], rows.join(" ")))
}

fn term_size_of(p: &Program, s: &JvmState) -> Result<BigInt, String> {
    let AbstractState::State(b) = beta(s) else { unreachable!() };
    let args = jbc2ctrs::ctrs::tst(p, &b).map_err(|e| e.to_string())?;
    Ok(Term::App("f".into(), args).size())
}

fn runner(cases: u32) -> TestRunner {
    // Fixed seed so the acceptance report is reproducible.
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn tape() -> impl Strategy<Value = Vec<u8>> {
    vec(any::<u8>(), 16..160)
}

fn crit6() -> Outcome {
    let p = shapes();
    let mut r = runner(1000);
    r.run(&tape(), |bytes| {
        let s = gen_concrete(&p, &mut Tape::new(&bytes), 6, true);
        let (t, z) = (term_size_of(&p, &s).map_err(TestCaseError::fail)?, BigInt::from(state_size(&s)));
        prop_assert_eq!(t, z);
        Ok(())
    })
    .map_err(|e| format!("acyclic: {e}"))?;
    let mut r = runner(1000);
    r.run(&tape(), |bytes| {
        let s = gen_concrete(&p, &mut Tape::new(&bytes), 6, false);
        let (t, z) = (term_size_of(&p, &s).map_err(TestCaseError::fail)?, BigInt::from(state_size(&s)));
        prop_assert!(t <= z, "{} > {}", t, z);
        Ok(())
    })
    .map_err(|e| format!("cyclic: {e}"))?;
    Ok("1000 acyclic (=), 1000 unrestricted (≤)".into())
}

const CORPUS: &[(&str, &str, &[&str], bool)] = &[
    ("append.jbc", "List.append", APPEND_ASSUME, true),
    ("inits.jbc", "Main.inits", &["acyclic:ys"], true),
    ("flatten.jbc", "Flatten.flatten", &["acyclic:list"], true),
    ("dispatch.jbc", "B.m", &[], true),
    ("dispatch.jbc", "C.call", &[], true),
    ("dispatch.jbc", "C.main", &[], true),
    ("straight.jbc", "Calc.check", &[], true),
];

fn crit7() -> Outcome {
    let mut sizes = Vec::new();
    for (f, e, a, t) in CORPUS {
        let an = analysis(f, e, a, *t).map_err(|err| format!("{e}: {err}"))?;
        sizes.push(format!("{e}:{}", an.graph.nodes.len()));
    }
    Ok(sizes.join(" "))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_jbc2ctrs")
}

fn crit8() -> Outcome {
    let an = analysis("dispatch.jbc", "B.m", &[], true)?;
    let fuel = 300;
    let d = an.probe(&["B{}".into()], fuel, 1_000_000).map_err(|e| e.to_string())?;
    check(d.fuel_exhausted && d.len() == fuel, || {
        format!("derivation of length {} (fuel exhausted: {})", d.len(), d.fuel_exhausted)
    })?;
    let run = concrete_run(&an.program, "B.m", &["B{}".into()], 1000, false).map_err(|e| e.to_string())?;
    check(run.result == StepResult::Failure(jbc2ctrs::vm::FailureReason::FuelExhausted), || "B.m halted".into())?;

    // Negative control: break the first rule of append and replay.
    let ap = append()?;
    let mut bad = ap.ctrs.clone();
    let r0 = &mut bad.rules[0];
    if let Term::App(_, args) = &mut r0.rhs {
        args[0] = Term::Null;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("bad.ctrs");
    std::fs::write(&path, render_ctrs(&bad)).map_err(|e| e.to_string())?;
    let mut cmd = Command::new(bin());
    cmd.args(["simulate", &common::corpus_path("append.jbc").to_string_lossy(), "--entry", "List.append"]);
    cmd.args(["--this-nonnull", "--assume", "acyclic:this", "--assume", "unshared:this,ys"]);
    cmd.args(["--arg", &list_literal(2), "--arg", "List{}", "--ctrs", &path.to_string_lossy()]);
    let out = cmd.output().map_err(|e| e.to_string())?;
    check(out.status.code() == Some(4), || format!("corrupted system exit code {:?}", out.status.code()))?;
    Ok(format!("B.m derivation hit fuel {fuel}; corrupted system rejected with exit 4"))
}

fn crit9() -> Outcome {
    let an = analysis("inits.jbc", "Main.inits", &["acyclic:ys"], true)?;
    let args = vec!["Main{}".to_string(), list_literal(3)];
    let run = concrete_run(&an.program, "Main.inits", &args, 10_000, false).map_err(|e| e.to_string())?;
    check(matches!(run.result, StepResult::Halted(_)), || "inits did not halt".into())?;
    let m = run.steps;
    let d = an.probe(&args, 4 * m, 2_000_000).map_err(|e| e.to_string())?;
    check(d.len() > m, || format!("longest derivation {} vs m = {m}", d.len()))?;
    Ok(format!("m = {m}, derivation of length {}{}", d.len(), if d.fuel_exhausted { " (fuel bound hit)" } else { "" }))
}

fn tree_list(n: usize) -> String {
    let mut s = "null".to_string();
    for i in 0..n {
        s = format!("TreeList{{next:{s}, value:Tree{{value:{i}}}}}");
    }
    s
}

fn crit10() -> Outcome {
    let an = analysis("flatten.jbc", "Flatten.flatten", &["acyclic:list"], true)?;
    let mut ms = Vec::new();
    let mut ls = Vec::new();
    let mut k = None;
    for n in 1..=6 {
        let (_, rep) = an
            .simulate(&["Flatten{}".to_string(), tree_list(n)], 100_000, None)
            .map_err(|e| format!("n={n}: {e}"))?;
        check(rep.holds(), || format!("n={n}: m={} L={} K={}", rep.m, rep.l, rep.k))?;
        check(*k.get_or_insert(rep.k) == rep.k, || "K varies".into())?;
        ms.push(rep.m);
        ls.push(rep.l);
    }
    let diffs: Vec<usize> = ms.windows(2).map(|w| w[1] - w[0]).collect();
    check(diffs.windows(2).all(|w| w[0] == w[1]), || format!("m differences {diffs:?}"))?;
    Ok(format!("K={} m={ms:?} L={ls:?}", k.unwrap_or(0)))
}

type Prop<'a> = Box<dyn Fn(&[u8]) -> Result<(), TestCaseError> + 'a>;

fn crit11() -> Outcome {
    let p = shapes();
    let cases = 500;
    let props: Vec<(&str, Prop)> = vec![
        (
            "reflexive",
            Box::new(|b: &[u8]| {
                let s = AbstractState::State(gen_abstract(&p, &mut Tape::new(b)));
                prop_assert!(is_instance(&p, &s, &s));
                Ok(())
            }),
        ),
        (
            "transitive",
            Box::new(|b: &[u8]| {
                let mut t = Tape::new(b);
                let s = gen_abstract(&p, &mut t);
                let u = generalize(&s, &mut t);
                let v = generalize(&u, &mut t);
                let (s, u, v) = (AbstractState::State(s), AbstractState::State(u), AbstractState::State(v));
                prop_assert!(is_instance(&p, &s, &u) && is_instance(&p, &u, &v));
                prop_assert!(is_instance(&p, &s, &v));
                Ok(())
            }),
        ),
        (
            "join upper bound",
            Box::new(|b: &[u8]| {
                let mut t = Tape::new(b);
                let s = AbstractState::State(gen_abstract(&p, &mut t));
                let u = AbstractState::State(gen_abstract(&p, &mut t));
                let j = join(&p, &s, &u);
                prop_assert!(is_instance(&p, &s, &j), "s ⋢ s ⊔ u: s = {}, u = {}, j = {}", s, u, j);
                prop_assert!(is_instance(&p, &u, &j), "u ⋢ s ⊔ u: s = {}, u = {}, j = {}", s, u, j);
                Ok(())
            }),
        ),
        (
            "join least",
            Box::new(|b: &[u8]| {
                let mut t = Tape::new(b);
                let top = gen_abstract(&p, &mut t);
                let s = specialize(&p, &top, &mut t);
                let u = specialize(&p, &top, &mut t);
                let top = AbstractState::State(top);
                prop_assert!(is_instance(&p, &s, &top) && is_instance(&p, &u, &top));
                prop_assert!(is_instance(&p, &join(&p, &s, &u), &top));
                Ok(())
            }),
        ),
        (
            "chain stabilises",
            Box::new(|b: &[u8]| {
                let mut t = Tape::new(b);
                let pool: Vec<AbstractState> =
                    (0..4).map(|_| AbstractState::State(gen_abstract(&p, &mut t))).collect();
                let mut cur = pool[0].clone();
                let mut quiet_round = None;
                for round in 0..8 {
                    let mut changed = false;
                    for x in &pool {
                        let next = join(&p, &cur, x);
                        prop_assert!(is_instance(&p, &cur, &next), "{} ⋢ {} ⊔ {} = {}", cur, cur, x, next);
                        changed |= !equivalent(&p, &cur, &next);
                        cur = next;
                    }
                    if !changed {
                        quiet_round = Some(round);
                        break;
                    }
                }
                prop_assert!(quiet_round.is_some(), "still rising after 8 rounds: {}", cur);
                Ok(())
            }),
        ),
        (
            "reduce idempotent",
            Box::new(|b: &[u8]| {
                let s = AbstractState::State(gen_abstract(&p, &mut Tape::new(b)));
                let r = reduce(&p, &s);
                prop_assert_eq!(reduce(&p, &r), r);
                Ok(())
            }),
        ),
        (
            "reduce keeps γ",
            Box::new(|b: &[u8]| {
                let mut t = Tape::new(b);
                let acyclic = t.chance(50);
                let c = gen_concrete(&p, &mut t, 5, acyclic);
                let AbstractState::State(bc) = beta(&c) else { unreachable!() };
                let s = AbstractState::State(generalize(&bc, &mut t));
                let other = gen_concrete(&p, &mut t, 5, false);
                let r = reduce(&p, &s);
                prop_assert!(gamma_member(&p, &c, &s) && gamma_member(&p, &c, &r));
                prop_assert_eq!(gamma_member(&p, &other, &s), gamma_member(&p, &other, &r));
                Ok(())
            }),
        ),
    ];
    let mut done = Vec::new();
    for (name, f) in &props {
        runner(cases).run(&tape(), |b| f(&b)).map_err(|e| format!("{name}: {e}"))?;
        done.push(*name);
    }
    Ok(format!("{cases} cases each: {}", done.join(", ")))
}

/// Name, check and time limit in seconds.
type Criterion = (&'static str, fn() -> Outcome, u64);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("append bytecode parses", crit1, 1),
        ("lattice on A, B, S", crit2, 1),
        ("append computation graph", crit3, 5),
        ("append rewrite rules", crit4, 5),
        ("simulation bounds on append", crit5, 10),
        ("term size equals state size", crit6, 30),
        ("finite graphs on the corpus", crit7, 60),
        ("non-termination probe and negative control", crit8, 10),
        ("inits derivation outruns the program", crit9, 30),
        ("flatten scaling", crit10, 30),
        ("lattice properties", crit11, 60),
    ];
    let mut failed = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let res = f();
        let dt = t0.elapsed();
        let res = match res {
            Ok(d) if dt > Duration::from_secs(*limit) => Err(format!("{d}; took longer than {limit} s")),
            r => r,
        };
        match res {
            Ok(detail) => println!("criterion {:>2} PASS  {name} [{:.2}s]: {detail}", i + 1, dt.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} [{:.2}s]: {why}", i + 1, dt.as_secs_f64());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
