//! Rules generated from computation-graph edges.

use std::collections::{BTreeMap, BTreeSet};

use crate::cgraph::{CGraph, EdgeLabel};
use crate::constraint::{CTerm, Formula, Sort};
use crate::domain::{AbsObject, AbstractState};
use crate::program::{Instruction, Program};
use crate::shape::may_reach;

use super::term::Term;
use super::translate::{tst_arity, Fresh, TranslateError, Translator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymKind {
    Defined,
    Constructor,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolDecl {
    pub name: String,
    pub arity: usize,
    pub kind: SymKind,
    /// Free-form note, e.g. the program location of a node symbol.
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub lhs: Term,
    pub rhs: Term,
    pub constraint: Formula,
}

impl Rule {
    pub fn vars(&self) -> BTreeSet<(String, Sort)> {
        let mut out = BTreeSet::new();
        self.lhs.vars(&mut out);
        self.rhs.vars(&mut out);
        out.extend(self.constraint.vars());
        out
    }

    /// Variables of the right-hand side that do not occur on the left.
    pub fn extra_vars(&self) -> BTreeSet<(String, Sort)> {
        let mut l = BTreeSet::new();
        self.lhs.vars(&mut l);
        let mut r = BTreeSet::new();
        self.rhs.vars(&mut r);
        r.difference(&l).cloned().collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ctrs {
    pub signature: Vec<SymbolDecl>,
    pub rules: Vec<Rule>,
}

impl Ctrs {
    pub fn symbol(&self, name: &str) -> Option<&SymbolDecl> {
        self.signature.iter().find(|d| d.name == name)
    }

    pub fn is_defined(&self, name: &str) -> bool {
        self.symbol(name).is_some_and(|d| d.kind == SymKind::Defined)
    }
}

/// The rule for edge `idx` of `g`.
pub fn corr_rule(p: &Program, g: &CGraph, idx: usize) -> Result<Rule, TranslateError> {
    let e = &g.edges[idx];
    let (AbstractState::State(s), AbstractState::State(t)) = (&g.nodes[e.from].state, &g.nodes[e.to].state) else {
        unreachable!("graph nodes hold proper states")
    };
    let fs = CGraph::symbol(e.from);
    let ft = CGraph::symbol(e.to);
    let mut fresh = Fresh::new();
    let rule = match &e.label {
        EdgeLabel::Instance => {
            let args = Translator::new(p, s).tst(&mut fresh)?;
            Rule { lhs: Term::App(fs, args.clone()), rhs: Term::App(ft, args), constraint: Formula::True }
        }
        EdgeLabel::Refine(_) => {
            let args = Translator::new(p, t).tst(&mut fresh)?;
            Rule { lhs: Term::App(fs, args.clone()), rhs: Term::App(ft, args), constraint: Formula::True }
        }
        EdgeLabel::Eval(c) => {
            let lhs = Translator::new(p, s).tst(&mut fresh)?;
            let renamed = putfield_renamed(p, s, t)?;
            let rhs = Translator::new(p, t).with_renamed(renamed).tst(&mut fresh)?;
            Rule { lhs: Term::App(fs, lhs), rhs: Term::App(ft, rhs), constraint: c.clone().unwrap_or(Formula::True) }
        }
    };
    Ok(rule)
}

/// Abstract objects of `t` that may reach the object written by a
/// `Putfield` in `s`.
fn putfield_renamed(
    p: &Program,
    s: &crate::domain::AbsHeapState,
    t: &crate::domain::AbsHeapState,
) -> Result<BTreeSet<crate::vm::Addr>, TranslateError> {
    let mut out = BTreeSet::new();
    let f = &s.frames[0];
    let is_put = p
        .method(&f.class, &f.method)
        .and_then(|m| m.body.get(f.pc))
        .is_some_and(|i| matches!(i, Instruction::Putfield(..)));
    if !is_put || f.stack.len() < 2 {
        return Ok(out);
    }
    let Some(target) = f.stack[f.stack.len() - 2].as_addr() else { return Ok(out) };
    for (q, o) in &t.heap {
        if !matches!(o, AbsObject::ClassVar { .. }) {
            continue;
        }
        let reaches = if s.heap.contains_key(q) && s.heap.contains_key(&target) {
            may_reach(p, s, *q, target)?
        } else if t.heap.contains_key(&target) {
            may_reach(p, t, *q, target)?
        } else {
            false
        };
        if reaches {
            out.insert(*q);
        }
    }
    Ok(out)
}

/// One rule per edge; node symbols `f_i` and one constructor per class.
pub fn emit_ctrs(p: &Program, g: &CGraph) -> Result<Ctrs, TranslateError> {
    let mut signature = Vec::new();
    for (i, n) in g.nodes.iter().enumerate() {
        let st = n.state.as_state().expect("graph nodes hold proper states");
        let loc: Vec<String> = st.frames.iter().map(|f| format!("{}.{}@{:02}", f.class, f.method, f.pc)).collect();
        signature.push(SymbolDecl {
            name: CGraph::symbol(i),
            arity: tst_arity(st),
            kind: SymKind::Defined,
            note: Some(loc.join(" ")),
        });
    }
    for c in p.class_names() {
        signature.push(SymbolDecl {
            name: c.to_string(),
            arity: p.field_table_domain(c).len(),
            kind: SymKind::Constructor,
            note: None,
        });
    }
    signature.push(SymbolDecl { name: "null".into(), arity: 0, kind: SymKind::Constructor, note: None });
    let rules = (0..g.edges.len()).map(|i| corr_rule(p, g, i)).collect::<Result<_, _>>()?;
    Ok(Ctrs { signature, rules })
}

/// Sort-respecting bijection between the variables of two rules plus a
/// consistent mapping of defined symbols.
#[derive(Clone, Debug, Default)]
pub struct Renaming {
    pub vars: BTreeMap<String, String>,
    back: BTreeMap<String, String>,
    pub symbols: BTreeMap<String, String>,
    sym_back: BTreeMap<String, String>,
}

impl Renaming {
    fn var(&mut self, a: &str, b: &str) -> bool {
        match (self.vars.get(a), self.back.get(b)) {
            (Some(x), _) => x == b,
            (None, Some(_)) => false,
            (None, None) => {
                self.vars.insert(a.into(), b.into());
                self.back.insert(b.into(), a.into());
                true
            }
        }
    }

    fn symbol(&mut self, a: &str, b: &str) -> bool {
        match (self.symbols.get(a), self.sym_back.get(b)) {
            (Some(x), _) => x == b,
            (None, Some(_)) => false,
            (None, None) => {
                self.symbols.insert(a.into(), b.into());
                self.sym_back.insert(b.into(), a.into());
                true
            }
        }
    }

    fn term(&mut self, a: &Term, b: &Term, defined: &dyn Fn(&str) -> bool) -> bool {
        match (a, b) {
            (Term::Var(x, s1), Term::Var(y, s2)) => s1 == s2 && self.var(x, y),
            (Term::App(f, xs), Term::App(g, ys)) => {
                let head = if defined(f) { self.symbol(f, g) } else { f == g };
                head && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.term(x, y, defined))
            }
            _ => a == b,
        }
    }

    fn cterm(&mut self, a: &CTerm, b: &CTerm) -> bool {
        match (a, b) {
            (CTerm::Var(x, s1), CTerm::Var(y, s2)) => s1 == s2 && self.var(x, y),
            (CTerm::Add(a1, a2), CTerm::Add(b1, b2)) | (CTerm::Sub(a1, a2), CTerm::Sub(b1, b2)) => {
                self.cterm(a1, b1) && self.cterm(a2, b2)
            }
            _ => a == b,
        }
    }

    fn formula(&mut self, a: &Formula, b: &Formula) -> bool {
        match (a, b) {
            (Formula::Holds(x), Formula::Holds(y)) => self.cterm(x, y),
            (Formula::Eq(a1, a2), Formula::Eq(b1, b2))
            | (Formula::Neq(a1, a2), Formula::Neq(b1, b2))
            | (Formula::Geq(a1, a2), Formula::Geq(b1, b2)) => self.cterm(a1, b1) && self.cterm(a2, b2),
            (Formula::Not(x), Formula::Not(y)) => self.formula(x, y),
            (Formula::And(a1, a2), Formula::And(b1, b2)) | (Formula::Or(a1, a2), Formula::Or(b1, b2)) => {
                self.formula(a1, b1) && self.formula(a2, b2)
            }
            _ => a == b,
        }
    }
}

/// Whether `a` and `b` agree up to variable renaming and a renaming of
/// defined symbols consistent with `ren`. Symbols for which `defined`
/// returns false must match literally.
pub fn rules_equivalent_modulo_renaming(
    a: &Rule,
    b: &Rule,
    ren: &mut Renaming,
    defined: &dyn Fn(&str) -> bool,
) -> bool {
    let mut trial = Renaming { vars: BTreeMap::new(), back: BTreeMap::new(), ..ren.clone() };
    let ok = trial.term(&a.lhs, &b.lhs, defined)
        && trial.term(&a.rhs, &b.rhs, defined)
        && trial.formula(&a.constraint, &b.constraint);
    if ok {
        ren.symbols = trial.symbols;
        ren.sym_back = trial.sym_back;
    }
    ok
}

/// Removes argument positions from applications of constructor `class`,
/// e.g. to forget a field.
pub fn project_constructor(t: &Term, class: &str, keep: &[usize]) -> Term {
    match t {
        Term::App(f, args) => {
            let args: Vec<Term> = args.iter().map(|a| project_constructor(a, class, keep)).collect();
            if f == class {
                Term::App(f.clone(), keep.iter().map(|&i| args[i].clone()).collect())
            } else {
                Term::App(f.clone(), args)
            }
        }
        other => other.clone(),
    }
}
