//! Ground rewriting with constrained rules: matching, constraint
//! evaluation, step checking, run simulation and a bounded derivation
//! search.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use thiserror::Error;

use crate::cgraph::{trace_concrete, CGraph, TraceError};
use crate::constraint::{CTerm, Formula, Sort};
use crate::ctrs::{tst, Ctrs, Rule, Term, TranslateError};
use crate::domain::{beta, AbstractState};
use crate::program::{Program, TypeRef};
use crate::vm::JvmState;

pub type Binding = BTreeMap<String, Term>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("ill-sorted constraint term `{0}`")]
    IllSorted(String),
}

fn sort_ok(sort: Sort, t: &Term) -> bool {
    match sort {
        Sort::Int => matches!(t, Term::Int(_)),
        Sort::Bool => matches!(t, Term::Bool(_)),
        Sort::Univ => matches!(t, Term::Null | Term::App(..) | Term::Var(_, Sort::Univ)),
    }
}

/// Non-linear, sort-respecting matching of `pat` against `subj`, extending
/// `b`. On failure `b` may hold partial bindings.
pub fn match_into(pat: &Term, subj: &Term, b: &mut Binding) -> bool {
    match pat {
        Term::Var(n, s) => {
            if let Some(v) = b.get(n) {
                return v == subj;
            }
            if !sort_ok(*s, subj) {
                return false;
            }
            b.insert(n.clone(), subj.clone());
            true
        }
        Term::App(f, xs) => match subj {
            Term::App(g, ys) if f == g && xs.len() == ys.len() => {
                xs.iter().zip(ys).all(|(x, y)| match_into(x, y, b))
            }
            _ => false,
        },
        other => other == subj,
    }
}

pub fn match_term(pat: &Term, subj: &Term) -> Option<Binding> {
    let mut b = Binding::new();
    match_into(pat, subj, &mut b).then_some(b)
}

pub fn apply(t: &Term, b: &Binding) -> Term {
    match t {
        Term::Var(n, _) => b.get(n).cloned().unwrap_or_else(|| t.clone()),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| apply(a, b)).collect()),
        other => other.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum CVal {
    Int(BigInt),
    Bool(bool),
}

fn eval_cterm(t: &CTerm, b: &Binding) -> Result<CVal, EvalError> {
    Ok(match t {
        CTerm::Int(z) => CVal::Int(z.clone()),
        CTerm::Bool(x) => CVal::Bool(*x),
        CTerm::Var(n, _) => match b.get(n) {
            Some(Term::Int(z)) => CVal::Int(z.clone()),
            Some(Term::Bool(x)) => CVal::Bool(*x),
            Some(other) => return Err(EvalError::IllSorted(other.to_string())),
            None => return Err(EvalError::Unbound(n.clone())),
        },
        CTerm::Add(x, y) | CTerm::Sub(x, y) => {
            let (CVal::Int(x), CVal::Int(y)) = (eval_cterm(x, b)?, eval_cterm(y, b)?) else {
                return Err(EvalError::IllSorted(t.to_string()));
            };
            CVal::Int(if matches!(t, CTerm::Add(..)) { x + y } else { x - y })
        }
    })
}

/// Evaluates a constraint under a ground binding of its variables.
pub fn eval_constraint(c: &Formula, b: &Binding) -> Result<bool, EvalError> {
    Ok(match c {
        Formula::True => true,
        Formula::False => false,
        Formula::Holds(t) => match eval_cterm(t, b)? {
            CVal::Bool(x) => x,
            CVal::Int(_) => return Err(EvalError::IllSorted(t.to_string())),
        },
        Formula::Eq(x, y) => eval_cterm(x, b)? == eval_cterm(y, b)?,
        Formula::Neq(x, y) => eval_cterm(x, b)? != eval_cterm(y, b)?,
        Formula::Geq(x, y) => match (eval_cterm(x, b)?, eval_cterm(y, b)?) {
            (CVal::Int(x), CVal::Int(y)) => x >= y,
            _ => return Err(EvalError::IllSorted(c.to_string())),
        },
        Formula::Not(x) => !eval_constraint(x, b)?,
        Formula::And(x, y) => eval_constraint(x, b)? && eval_constraint(y, b)?,
        Formula::Or(x, y) => eval_constraint(x, b)? || eval_constraint(y, b)?,
    })
}

fn has_defined(t: &Term, ctrs: &Ctrs) -> bool {
    match t {
        Term::App(f, args) => ctrs.is_defined(f) || args.iter().any(|a| has_defined(a, ctrs)),
        _ => false,
    }
}

/// Index of a rule that rewrites `from` to `to` at the root. Extra
/// variables are read off `to` and must be bound to normal forms.
pub fn verify_step(ctrs: &Ctrs, from: &Term, to: &Term) -> Option<usize> {
    for (i, r) in ctrs.rules.iter().enumerate() {
        let mut b = Binding::new();
        if !match_into(&r.lhs, from, &mut b) {
            continue;
        }
        let lhs_vars: BTreeSet<String> = b.keys().cloned().collect();
        if !match_into(&r.rhs, to, &mut b) {
            continue;
        }
        if b.iter().any(|(n, v)| !lhs_vars.contains(n) && (has_defined(v, ctrs) || !v.is_ground())) {
            continue;
        }
        if eval_constraint(&r.constraint, &b) != Ok(true) {
            continue;
        }
        // Independent re-check by substitution.
        if &apply(&r.lhs, &b) == from && &apply(&r.rhs, &b) == to {
            return Some(i);
        }
    }
    None
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error("step {step}: translated term is not ground (cyclic heap)")]
    NonGround { step: usize },
    #[error("step {step}: no rule rewrites {from} to {to} (edge {edge})")]
    Rejected { step: usize, edge: usize, from: String, to: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepSim {
    pub location: String,
    pub edges: Vec<usize>,
    pub rules: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimReport {
    /// Concrete steps.
    pub m: usize,
    /// Total rewrite steps.
    pub l: usize,
    /// Static bound of the graph.
    pub k: usize,
    /// Largest number of rewrite steps for one concrete step.
    pub k_observed: usize,
    pub steps: Vec<StepSim>,
}

impl SimReport {
    pub fn holds(&self) -> bool {
        self.steps.iter().all(|s| !s.rules.is_empty()) && self.m <= self.l && self.l <= self.k * self.m
    }

    pub fn render(&self) -> String {
        let mut out = String::from("step  location                  rewrites  edges\n");
        for (i, s) in self.steps.iter().enumerate() {
            let edges: Vec<String> = s.edges.iter().map(|e| e.to_string()).collect();
            let _ = writeln!(out, "{i:>4}  {:<24}  {:>8}  {}", s.location, s.rules.len(), edges.join(","));
        }
        let _ = writeln!(out, "m = {}  L = {}  K = {}  max per step = {}", self.m, self.l, self.k, self.k_observed);
        out
    }
}

/// `f_node(tst(β s))` for a concrete state.
pub fn concrete_term(p: &Program, node: usize, s: &JvmState) -> Result<Term, TranslateError> {
    let AbstractState::State(b) = beta(s) else { unreachable!("β of a concrete state is proper") };
    Ok(Term::App(CGraph::symbol(node), tst(p, &b)?))
}

fn node_term(p: &Program, node: usize, s: &JvmState, step: usize) -> Result<Term, SimError> {
    let t = concrete_term(p, node, s)?;
    if !t.is_ground() {
        return Err(SimError::NonGround { step });
    }
    Ok(t)
}

/// Replays a concrete run through the graph and checks every rewrite
/// step against `ctrs`.
pub fn simulate_run(p: &Program, g: &CGraph, ctrs: &Ctrs, trace: &[JvmState]) -> Result<SimReport, SimError> {
    let paths = trace_concrete(p, g, trace)?;
    let mut steps = Vec::new();
    let mut l = 0;
    for (i, path) in paths.iter().enumerate() {
        let (here, there) = (&trace[i], &trace[i + 1]);
        let mut rules = Vec::new();
        for (j, &ei) in path.iter().enumerate() {
            let e = &g.edges[ei];
            let from = node_term(p, e.from, here, i)?;
            let to = node_term(p, e.to, if j + 1 == path.len() { there } else { here }, i)?;
            match verify_step(ctrs, &from, &to) {
                Some(r) => rules.push(r),
                None => {
                    return Err(SimError::Rejected { step: i, edge: ei, from: from.to_string(), to: to.to_string() })
                }
            }
        }
        l += rules.len();
        let f = here.top();
        steps.push(StepSim { location: format!("{}.{}@{:02}", f.class, f.method, f.pc), edges: path.clone(), rules });
    }
    let k_observed = steps.iter().map(|s| s.rules.len()).max().unwrap_or(0);
    Ok(SimReport { m: paths.len(), l, k: g.static_k(), k_observed, steps })
}

/// Values tried for extra variables during `derive`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pool {
    pub ints: Vec<BigInt>,
    /// Object terms, largest first.
    pub objects: Vec<Term>,
}

impl Pool {
    /// Integers in -2..=2, `null` and constructor terms of depth at most
    /// `depth`, capped at `cap` per class and level.
    pub fn for_program(p: &Program, depth: usize, cap: usize) -> Pool {
        let ints: Vec<BigInt> = (-2..=2).rev().map(BigInt::from).collect();
        let mut levels: Vec<Vec<Term>> = vec![vec![Term::Null]];
        for _ in 0..depth {
            let below: Vec<Term> = levels.iter().flatten().cloned().collect();
            let mut next = Vec::new();
            for c in p.class_names() {
                let fields = p.field_table_domain(c);
                let mut combos: Vec<Vec<Term>> = vec![vec![]];
                for (_, t) in fields {
                    let choices: Vec<Term> = match t {
                        TypeRef::Int => ints.iter().cloned().map(Term::Int).collect(),
                        TypeRef::Bool => vec![Term::Bool(true), Term::Bool(false)],
                        _ => below.clone(),
                    };
                    let mut grown = Vec::new();
                    'outer: for pre in &combos {
                        for ch in &choices {
                            if grown.len() >= cap {
                                break 'outer;
                            }
                            let mut v = pre.clone();
                            v.push(ch.clone());
                            grown.push(v);
                        }
                    }
                    combos = grown;
                }
                next.extend(combos.into_iter().map(|args| Term::App(c.to_string(), args)));
            }
            levels.push(next);
        }
        let mut objects: Vec<Term> = levels.into_iter().flatten().collect::<BTreeSet<_>>().into_iter().collect();
        objects.sort_by(|a, b| b.size().cmp(&a.size()).then(a.cmp(b)));
        Pool { ints, objects }
    }

    fn choices(&self, s: Sort) -> Vec<Term> {
        match s {
            Sort::Int => self.ints.iter().cloned().map(Term::Int).collect(),
            Sort::Bool => vec![Term::Bool(true), Term::Bool(false)],
            Sort::Univ => self.objects.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    /// Rule indices along the longest derivation found.
    pub rules: Vec<usize>,
    /// Some branch reached the depth bound and could still rewrite.
    pub fuel_exhausted: bool,
    /// The search visited its node budget before finishing.
    pub budget_exhausted: bool,
}

impl Derivation {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Successors of a ground term, one per rule and choice of extra
/// variables that satisfies the constraint.
pub fn successors(ctrs: &Ctrs, t: &Term, pool: &Pool, max_per_rule: usize) -> Vec<(usize, Term)> {
    let mut out = Vec::new();
    for (i, r) in ctrs.rules.iter().enumerate() {
        let Some(b) = match_term(&r.lhs, t) else { continue };
        let extra: Vec<(String, Sort)> = r.vars().into_iter().filter(|(n, _)| !b.contains_key(n)).collect();
        let mut count = 0;
        let mut assign = b.clone();
        enumerate(&extra, 0, pool, &mut assign, &mut |bd| {
            if count >= max_per_rule {
                return false;
            }
            if eval_constraint(&r.constraint, bd) == Ok(true) {
                out.push((i, apply(&r.rhs, bd)));
                count += 1;
            }
            true
        });
    }
    out
}

fn enumerate(
    extra: &[(String, Sort)],
    k: usize,
    pool: &Pool,
    b: &mut Binding,
    f: &mut dyn FnMut(&Binding) -> bool,
) -> bool {
    if k == extra.len() {
        return f(b);
    }
    let (n, s) = &extra[k];
    for v in pool.choices(*s) {
        b.insert(n.clone(), v);
        if !enumerate(extra, k + 1, pool, b, f) {
            return false;
        }
    }
    b.remove(n);
    true
}

/// Depth-first search for a long derivation from `start`, up to `fuel`
/// steps and `budget` visited terms.
pub fn derive(ctrs: &Ctrs, start: &Term, fuel: usize, pool: &Pool, budget: usize) -> Derivation {
    struct Search<'a> {
        ctrs: &'a Ctrs,
        pool: &'a Pool,
        fuel: usize,
        budget: usize,
        visited: usize,
        best: Vec<usize>,
        fuel_exhausted: bool,
        budget_exhausted: bool,
        // Fuel left when a term was fully explored.
        seen: BTreeMap<Term, usize>,
    }
    impl Search<'_> {
        fn go(&mut self, t: &Term, path: &mut Vec<usize>) {
            if path.len() > self.best.len() {
                self.best = path.clone();
            }
            if self.budget_exhausted || self.fuel_exhausted {
                return;
            }
            if self.visited >= self.budget {
                self.budget_exhausted = true;
                return;
            }
            self.visited += 1;
            // A term fully explored with at least as much fuel left cannot
            // produce a longer derivation.
            let left = self.fuel - path.len();
            if self.seen.get(t).is_some_and(|l| *l >= left) {
                return;
            }
            let succ = successors(self.ctrs, t, self.pool, 64);
            if succ.is_empty() {
                return;
            }
            if path.len() == self.fuel {
                self.fuel_exhausted = true;
                return;
            }
            for (r, u) in succ {
                path.push(r);
                self.go(&u, path);
                path.pop();
                if self.fuel_exhausted || self.budget_exhausted {
                    return;
                }
            }
            self.seen.insert(t.clone(), left);
        }
    }
    let mut s = Search {
        ctrs,
        pool,
        fuel,
        budget,
        visited: 0,
        best: Vec::new(),
        fuel_exhausted: false,
        budget_exhausted: false,
        seen: BTreeMap::new(),
    };
    s.go(start, &mut Vec::new());
    Derivation { rules: s.best, fuel_exhausted: s.fuel_exhausted, budget_exhausted: s.budget_exhausted }
}

/// Most general syntactic unifier, with occurs check.
pub fn unify_terms(a: &Term, b: &Term) -> Option<Binding> {
    fn resolve(t: &Term, s: &Binding) -> Term {
        match t {
            Term::Var(n, _) => match s.get(n) {
                Some(u) => resolve(u, s),
                None => t.clone(),
            },
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|x| resolve(x, s)).collect()),
            other => other.clone(),
        }
    }
    fn occurs(n: &str, t: &Term) -> bool {
        match t {
            Term::Var(m, _) => m == n,
            Term::App(_, args) => args.iter().any(|a| occurs(n, a)),
            _ => false,
        }
    }
    let mut s = Binding::new();
    let mut work = vec![(a.clone(), b.clone())];
    while let Some((x, y)) = work.pop() {
        let (x, y) = (resolve(&x, &s), resolve(&y, &s));
        match (&x, &y) {
            _ if x == y => {}
            (Term::Var(n, srt), other) | (other, Term::Var(n, srt)) => {
                if occurs(n, other) || !(sort_ok(*srt, other) || other.sort() == *srt) {
                    return None;
                }
                s.insert(n.clone(), other.clone());
            }
            (Term::App(f, xs), Term::App(g, ys)) if f == g && xs.len() == ys.len() => {
                work.extend(xs.iter().cloned().zip(ys.iter().cloned()));
            }
            _ => return None,
        }
    }
    let keys: Vec<String> = s.keys().cloned().collect();
    for k in keys {
        let v = resolve(&s[&k], &s);
        s.insert(k, v);
    }
    Some(s)
}

fn subst_formula(c: &Formula, s: &Binding) -> Option<Formula> {
    let ok = c.vars().iter().all(|(n, _)| {
        matches!(s.get(n), None | Some(Term::Int(_) | Term::Bool(_) | Term::Var(_, Sort::Int | Sort::Bool)))
    });
    ok.then(|| {
        c.map_vars(&|n, srt| match s.get(n) {
            Some(Term::Int(z)) => CTerm::Int(z.clone()),
            Some(Term::Bool(x)) => CTerm::Bool(*x),
            Some(Term::Var(m, ms)) => CTerm::Var(m.clone(), *ms),
            _ => CTerm::Var(n.to_string(), srt),
        })
    })
}

fn conj(a: Formula, b: Formula) -> Formula {
    match (a, b) {
        (Formula::True, x) | (x, Formula::True) => x,
        (x, y) => Formula::and(x, y),
    }
}

/// Rule for applying `r1` and then `r2`, or `None` if they do not chain.
pub fn compose(r1: &Rule, r2: &Rule) -> Option<Rule> {
    let used: BTreeSet<String> = r1.vars().into_iter().map(|(n, _)| n).collect();
    let mut ren = Binding::new();
    for (n, s) in r2.vars() {
        let mut k = 1;
        let mut m = format!("{n}_{k}");
        while used.contains(&m) {
            k += 1;
            m = format!("{n}_{k}");
        }
        ren.insert(n, Term::Var(m, s));
    }
    let r2 = Rule {
        lhs: apply(&r2.lhs, &ren),
        rhs: apply(&r2.rhs, &ren),
        constraint: subst_formula(&r2.constraint, &ren)?,
    };
    let s = unify_terms(&r1.rhs, &r2.lhs)?;
    Some(Rule {
        lhs: apply(&r1.lhs, &s),
        rhs: apply(&r2.rhs, &s),
        constraint: conj(subst_formula(&r1.constraint, &s)?, subst_formula(&r2.constraint, &s)?),
    })
}
