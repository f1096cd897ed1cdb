//! Symbolic execution of one instruction on an abstract state, and the
//! refinements that make it possible.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::constraint::{bool_var_name, int_var_name, CTerm, Formula, Sort};
use crate::domain::{reduce_state, unify, AbsFrame, AbsHeapState, AbsObject, AbsValue, AbstractState, ShapeTag, VarId};
use crate::program::{FieldKey, Ident, Instruction, MethodDecl, Program};
use crate::shape::{may_alias, putfield_tags, ShapeError};
use crate::vm::{Addr, FailureReason, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RefinementRequest {
    ClassInstance(Addr),
    Unshare(Addr, Addr),
    Boolean(VarId),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RefineKind {
    /// `class: None` is the null case.
    ClassInstance { addr: Addr, class: Option<Ident> },
    Unshare { p: Addr, q: Addr, merged: bool },
    Boolean { var: VarId, value: bool },
}

impl fmt::Display for RefineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefineKind::ClassInstance { addr, class: Some(c) } => write!(f, "{addr}:{c}"),
            RefineKind::ClassInstance { addr, class: None } => write!(f, "{addr}:null"),
            RefineKind::Unshare { p, q, merged: false } => write!(f, "{p}!={q}"),
            RefineKind::Unshare { p, q, merged: true } => write!(f, "{p}={q}"),
            RefineKind::Boolean { var, value } => write!(f, "b{var}={value}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymexError {
    #[error("no frame")]
    NoFrame,
    #[error("pc {pc} outside method {class}.{method}")]
    BadPc { class: Ident, method: Ident, pc: usize },
    #[error("ill-typed state at {0}")]
    IllTyped(String),
    #[error("refinement required before stepping: {0:?}")]
    RefinementRequired(RefinementRequest),
    #[error("shape query failed: {0}")]
    Shape(#[from] ShapeError),
}

#[derive(Clone, Debug)]
pub enum SymStep {
    /// Successor with the constraint of the step (`None` for true).
    Eval(AbsHeapState, Option<Formula>),
    Terminal(AbsValue),
    Failed(FailureReason),
}

fn current<'p>(p: &'p Program, s: &AbsHeapState) -> Result<(&'p MethodDecl, &'p Instruction), SymexError> {
    let f = s.frames.first().ok_or(SymexError::NoFrame)?;
    let m = p
        .method(&f.class, &f.method)
        .ok_or_else(|| SymexError::BadPc { class: f.class.clone(), method: f.method.clone(), pc: f.pc })?;
    let ins = m
        .body
        .get(f.pc)
        .ok_or_else(|| SymexError::BadPc { class: f.class.clone(), method: f.method.clone(), pc: f.pc })?;
    Ok((m, ins))
}

fn ill(s: &AbsHeapState) -> SymexError {
    let f = &s.frames[0];
    SymexError::IllTyped(format!("{}.{} @{:02}", f.class, f.method, f.pc))
}

fn classvar_at(s: &AbsHeapState, v: &AbsValue) -> Option<Addr> {
    let a = v.as_addr()?;
    matches!(s.heap.get(&a), Some(AbsObject::ClassVar { .. })).then_some(a)
}

fn stack_from_top(s: &AbsHeapState, k: usize) -> Option<&AbsValue> {
    let st = &s.frames[0].stack;
    st.len().checked_sub(k + 1).map(|i| &st[i])
}

/// First alias candidate for a write through `target`.
fn unshare_candidate(p: &Program, s: &AbsHeapState, target: Addr) -> Result<Option<Addr>, SymexError> {
    for &q in s.heap.keys() {
        if q == target || s.is_annotated(target, q) {
            continue;
        }
        if may_alias(p, s, target, q)? {
            return Ok(Some(q));
        }
    }
    Ok(None)
}

/// What must be refined before the next instruction can be executed.
pub fn needs_refinement(p: &Program, s: &AbsHeapState) -> Result<Option<RefinementRequest>, SymexError> {
    let (_, ins) = current(p, s)?;
    use Instruction::*;
    let req = match ins {
        IfFalse(_) => match stack_from_top(s, 0) {
            Some(AbsValue::BoolVar(b)) => Some(RefinementRequest::Boolean(*b)),
            _ => None,
        },
        Getfield(..) | Checkcast(_) => {
            stack_from_top(s, 0).and_then(|v| classvar_at(s, v)).map(RefinementRequest::ClassInstance)
        }
        Invoke(_, n) => stack_from_top(s, *n).and_then(|v| classvar_at(s, v)).map(RefinementRequest::ClassInstance),
        Putfield(..) => {
            let recv = stack_from_top(s, 1).cloned();
            match recv.as_ref().and_then(|v| classvar_at(s, v)) {
                Some(a) => Some(RefinementRequest::ClassInstance(a)),
                None => match recv.and_then(|v| v.as_addr()) {
                    Some(target) => unshare_candidate(p, s, target)?.map(|q| RefinementRequest::Unshare(target, q)),
                    None => None,
                },
            }
        }
        CmpEq | CmpNeq => {
            let v1 = stack_from_top(s, 0).cloned();
            let v2 = stack_from_top(s, 1).cloned();
            let c2 = v2.as_ref().and_then(|v| classvar_at(s, v));
            let c1 = v1.as_ref().and_then(|v| classvar_at(s, v));
            match (c2, c1) {
                (Some(a), _) | (None, Some(a)) => Some(RefinementRequest::ClassInstance(a)),
                (None, None) => match (v2.and_then(|v| v.as_addr()), v1.and_then(|v| v.as_addr())) {
                    (Some(a), Some(b)) if a != b && !s.is_annotated(a, b) && may_alias(p, s, a, b)? => {
                        Some(RefinementRequest::Unshare(a, b))
                    }
                    _ => None,
                },
            }
        }
        _ => None,
    };
    Ok(req)
}

/// One successor per subclass of the `ClassVar` type, then the null case.
pub fn refine_class_instance(p: &Program, s: &AbsHeapState, a: Addr) -> Vec<(RefineKind, AbsHeapState)> {
    let Some(AbsObject::ClassVar { ty, .. }) = s.heap.get(&a) else { return vec![] };
    let tag = s.tag(a);
    let mut out = Vec::new();
    for cn in p.subclasses(ty) {
        let mut t = s.clone();
        let mut fields = Vec::new();
        for (k, fty) in p.field_table_domain(&cn) {
            let v = t.fresh_value(fty, tag);
            fields.push((k.clone(), v));
        }
        t.heap.insert(a, AbsObject::Instance { class: cn.clone(), fields });
        out.push((RefineKind::ClassInstance { addr: a, class: Some(cn) }, t));
    }
    let mut t = s.clone();
    t.substitute(&BTreeMap::from([(a, AbsValue::null())]), &BTreeMap::new());
    t.gc();
    out.push((RefineKind::ClassInstance { addr: a, class: None }, t));
    out
}

/// The `p != q` case (annotated) and the `p == q` case (merged), the
/// latter `Bot` when the two cannot be unified.
pub fn refine_unshare(p: &Program, s: &AbsHeapState, a: Addr, b: Addr) -> (AbstractState, AbstractState) {
    let mut ann = s.clone();
    ann.annotate(a, b);
    let ann = reduce_state(p, &ann);
    let merged = match unify(p, s, &[(AbsValue::addr(a), AbsValue::addr(b))], true) {
        Some(m) => AbstractState::State(reduce_state(p, &m)),
        None => AbstractState::Bot,
    };
    (AbstractState::State(ann), merged)
}

pub fn refine_boolean(s: &AbsHeapState, b: VarId) -> Vec<(RefineKind, AbsHeapState)> {
    [true, false]
        .into_iter()
        .map(|value| {
            let mut t = s.clone();
            t.substitute(&BTreeMap::new(), &BTreeMap::from([(b, AbsValue::Val(Value::Bool(value)))]));
            (RefineKind::Boolean { var: b, value }, t)
        })
        .collect()
}

/// Applies a refinement request; `Bot` successors are dropped.
pub fn refine(p: &Program, s: &AbsHeapState, req: &RefinementRequest) -> Vec<(RefineKind, AbsHeapState)> {
    match req {
        RefinementRequest::ClassInstance(a) => refine_class_instance(p, s, *a),
        RefinementRequest::Boolean(b) => refine_boolean(s, *b),
        RefinementRequest::Unshare(a, b) => {
            let (ann, merged) = refine_unshare(p, s, *a, *b);
            let mut out = Vec::new();
            if let AbstractState::State(x) = ann {
                out.push((RefineKind::Unshare { p: *a, q: *b, merged: false }, x));
            }
            if let AbstractState::State(x) = merged {
                out.push((RefineKind::Unshare { p: *a, q: *b, merged: true }, x));
            }
            out
        }
    }
}

/// Constraint-level term for a non-address value.
pub fn cterm(v: &AbsValue) -> Option<CTerm> {
    match v {
        AbsValue::IntVar(i) => Some(CTerm::Var(int_var_name(*i), Sort::Int)),
        AbsValue::BoolVar(b) => Some(CTerm::Var(bool_var_name(*b), Sort::Bool)),
        AbsValue::Val(Value::Int(z)) => Some(CTerm::Int(z.clone())),
        AbsValue::Val(Value::Bool(b)) => Some(CTerm::Bool(*b)),
        _ => None,
    }
}

fn bool_formula(v: &AbsValue) -> Option<Formula> {
    match v {
        AbsValue::Val(Value::Bool(true)) => Some(Formula::True),
        AbsValue::Val(Value::Bool(false)) => Some(Formula::False),
        AbsValue::BoolVar(_) => Some(Formula::Holds(cterm(v)?)),
        _ => None,
    }
}

enum Cmp {
    Known(bool),
    Symbolic(Formula),
}

/// Equality of `v2` (deeper) and `v1` (top) once refinement is done.
fn compare_eq(s: &AbsHeapState, v2: &AbsValue, v1: &AbsValue) -> Result<Cmp, SymexError> {
    if v1 == v2 {
        return Ok(Cmp::Known(true));
    }
    match (v2, v1) {
        (AbsValue::Val(x), AbsValue::Val(y)) => {
            if classvar_at(s, v1).is_some() || classvar_at(s, v2).is_some() {
                return Err(ill(s));
            }
            Ok(Cmp::Known(x == y))
        }
        _ => match (cterm(v2), cterm(v1)) {
            (Some(a), Some(b)) if s.type_of(v1) == s.type_of(v2) => Ok(Cmp::Symbolic(Formula::Eq(a, b))),
            _ => Ok(Cmp::Known(false)),
        },
    }
}

/// Executes the current instruction. Fails with `RefinementRequired` when
/// `needs_refinement` would return a request.
pub fn symbolic_step(p: &Program, s: &AbsHeapState) -> Result<SymStep, SymexError> {
    if let Some(req) = needs_refinement(p, s)? {
        return Err(SymexError::RefinementRequired(req));
    }
    let (_, ins) = current(p, s)?;
    let mut t = s.clone();
    let mut constraint = None;
    macro_rules! pop {
        () => {
            match t.frames[0].stack.pop() {
                Some(v) => v,
                None => return Err(ill(s)),
            }
        };
    }
    use Instruction::*;
    match ins {
        Load(n) => {
            let v = t.frames[0].regs.get(*n).cloned().ok_or_else(|| ill(s))?;
            t.frames[0].stack.push(v);
            t.frames[0].pc += 1;
        }
        Store(n) => {
            let v = pop!();
            *t.frames[0].regs.get_mut(*n).ok_or_else(|| ill(s))? = v;
            t.frames[0].pc += 1;
        }
        Push(l) => {
            t.frames[0].stack.push(AbsValue::Val(Value::from_literal(l)));
            t.frames[0].pc += 1;
        }
        Pop => {
            pop!();
            t.frames[0].pc += 1;
        }
        IAdd | ISub => {
            let v1 = pop!();
            let v2 = pop!();
            let r = match (&v2, &v1) {
                (AbsValue::Val(Value::Int(a)), AbsValue::Val(Value::Int(b))) => {
                    AbsValue::Val(Value::Int(if matches!(ins, IAdd) { a + b } else { a - b }))
                }
                _ => {
                    let (a, b) = (cterm(&v2).ok_or_else(|| ill(s))?, cterm(&v1).ok_or_else(|| ill(s))?);
                    let id = t.fresh_var();
                    let rhs = if matches!(ins, IAdd) {
                        CTerm::Add(Box::new(a), Box::new(b))
                    } else {
                        CTerm::Sub(Box::new(a), Box::new(b))
                    };
                    constraint = Some(Formula::Eq(rhs, CTerm::Var(int_var_name(id), Sort::Int)));
                    AbsValue::IntVar(id)
                }
            };
            t.frames[0].stack.push(r);
            t.frames[0].pc += 1;
        }
        CmpGeq => {
            let v1 = pop!();
            let v2 = pop!();
            let r = match (&v2, &v1) {
                (AbsValue::Val(Value::Int(a)), AbsValue::Val(Value::Int(b))) => AbsValue::Val(Value::Bool(a >= b)),
                _ => {
                    let phi = Formula::Geq(cterm(&v2).ok_or_else(|| ill(s))?, cterm(&v1).ok_or_else(|| ill(s))?);
                    let id = t.fresh_var();
                    constraint = Some(Formula::iff_var(CTerm::Var(bool_var_name(id), Sort::Bool), phi));
                    AbsValue::BoolVar(id)
                }
            };
            t.frames[0].stack.push(r);
            t.frames[0].pc += 1;
        }
        CmpEq | CmpNeq => {
            let v1 = pop!();
            let v2 = pop!();
            let neg = matches!(ins, CmpNeq);
            let r = match compare_eq(s, &v2, &v1)? {
                Cmp::Known(b) => AbsValue::Val(Value::Bool(b != neg)),
                Cmp::Symbolic(phi) => {
                    let phi = if neg {
                        match phi {
                            Formula::Eq(a, b) => Formula::Neq(a, b),
                            other => Formula::negate(other),
                        }
                    } else {
                        phi
                    };
                    let id = t.fresh_var();
                    constraint = Some(Formula::iff_var(CTerm::Var(bool_var_name(id), Sort::Bool), phi));
                    AbsValue::BoolVar(id)
                }
            };
            t.frames[0].stack.push(r);
            t.frames[0].pc += 1;
        }
        And | Or | Not => {
            let v1 = pop!();
            let r = if matches!(ins, Not) {
                match &v1 {
                    AbsValue::Val(Value::Bool(b)) => AbsValue::Val(Value::Bool(!b)),
                    _ => {
                        let phi = Formula::negate(bool_formula(&v1).ok_or_else(|| ill(s))?);
                        let id = t.fresh_var();
                        constraint = Some(Formula::iff_var(CTerm::Var(bool_var_name(id), Sort::Bool), phi));
                        AbsValue::BoolVar(id)
                    }
                }
            } else {
                let v2 = pop!();
                match (&v2, &v1) {
                    (AbsValue::Val(Value::Bool(a)), AbsValue::Val(Value::Bool(b))) => {
                        AbsValue::Val(Value::Bool(if matches!(ins, And) { *a && *b } else { *a || *b }))
                    }
                    _ => {
                        let a = bool_formula(&v2).ok_or_else(|| ill(s))?;
                        let b = bool_formula(&v1).ok_or_else(|| ill(s))?;
                        let phi = if matches!(ins, And) { Formula::and(a, b) } else { Formula::or(a, b) };
                        let id = t.fresh_var();
                        constraint = Some(Formula::iff_var(CTerm::Var(bool_var_name(id), Sort::Bool), phi));
                        AbsValue::BoolVar(id)
                    }
                }
            };
            t.frames[0].stack.push(r);
            t.frames[0].pc += 1;
        }
        Goto(i) => {
            let tgt = t.frames[0].pc as i64 + i;
            if tgt < 0 {
                return Err(ill(s));
            }
            t.frames[0].pc = tgt as usize;
        }
        IfFalse(n) => match pop!() {
            AbsValue::Val(Value::Bool(false)) => t.frames[0].pc += n,
            AbsValue::Val(Value::Bool(true)) => t.frames[0].pc += 1,
            _ => return Err(ill(s)),
        },
        New(cn) => {
            let a = t.fresh_addr();
            let existing: Vec<Addr> = t.heap.keys().copied().collect();
            let fields = p
                .field_table_domain(cn)
                .iter()
                .map(|(k, ty)| (k.clone(), AbsValue::Val(Value::default_for(ty))))
                .collect();
            t.heap.insert(a, AbsObject::Instance { class: cn.clone(), fields });
            for q in existing {
                t.annotate(a, q);
            }
            t.set_tag(a, ShapeTag { region: None, closed: false, acyclic: true });
            t.frames[0].stack.push(AbsValue::addr(a));
            t.frames[0].pc += 1;
        }
        Getfield(fname, cn) => {
            let key = FieldKey { class: cn.clone(), name: fname.clone() };
            match pop!() {
                AbsValue::Val(Value::Null) => return Ok(SymStep::Failed(FailureReason::NullDeref)),
                AbsValue::Val(Value::Addr(a)) => {
                    let v = s.heap.get(&a).and_then(|o| o.field(&key)).cloned().ok_or_else(|| ill(s))?;
                    t.frames[0].stack.push(v);
                    t.frames[0].pc += 1;
                }
                _ => return Err(ill(s)),
            }
        }
        Putfield(fname, cn) => {
            let key = FieldKey { class: cn.clone(), name: fname.clone() };
            let v = pop!();
            match pop!() {
                AbsValue::Val(Value::Null) => return Ok(SymStep::Failed(FailureReason::NullDeref)),
                AbsValue::Val(Value::Addr(a)) => {
                    let tags = putfield_tags(p, s, a, &v);
                    match t.heap.get_mut(&a) {
                        Some(AbsObject::Instance { fields, .. }) => {
                            let slot = fields.iter_mut().find(|(k, _)| *k == key).ok_or_else(|| ill(s))?;
                            slot.1 = v;
                        }
                        _ => return Err(ill(s)),
                    }
                    for (x, tg) in tags {
                        t.set_tag(x, tg);
                    }
                    t.frames[0].pc += 1;
                }
                _ => return Err(ill(s)),
            }
        }
        Checkcast(cn) => match stack_from_top(s, 0) {
            Some(AbsValue::Val(Value::Null)) => t.frames[0].pc += 1,
            Some(AbsValue::Val(Value::Addr(a))) => {
                let c = s.heap[a].class_name();
                if p.is_subclass(c, cn) {
                    t.frames[0].pc += 1;
                } else {
                    return Ok(SymStep::Failed(FailureReason::CastError));
                }
            }
            _ => return Err(ill(s)),
        },
        Invoke(mn, n) => {
            let st = &t.frames[0].stack;
            if st.len() < n + 1 {
                return Err(ill(s));
            }
            let pos = st.len() - 1 - n;
            let recv = match &st[pos] {
                AbsValue::Val(Value::Null) => return Ok(SymStep::Failed(FailureReason::NullDeref)),
                AbsValue::Val(Value::Addr(a)) => *a,
                _ => return Err(ill(s)),
            };
            let cls = s.heap[&recv].class_name().clone();
            let (def, callee) = p.resolve_method(&cls, mn).ok_or_else(|| ill(s))?;
            let mut regs: Vec<AbsValue> = st[pos..].to_vec();
            regs.extend(std::iter::repeat_n(AbsValue::unit(), callee.max_locals));
            let f = AbsFrame { stack: vec![], regs, class: def, method: callee.name.clone(), pc: 0 };
            t.frames.insert(0, f);
        }
        Return => {
            let v = pop!();
            if t.frames.len() == 1 {
                return Ok(SymStep::Terminal(v));
            }
            t.frames.remove(0);
            let (_, call) = current(p, &t)?;
            let Invoke(_, n) = call else { return Err(ill(s)) };
            let caller = &mut t.frames[0];
            let keep = caller.stack.len().checked_sub(n + 1).ok_or_else(|| ill(s))?;
            caller.stack.truncate(keep);
            caller.stack.push(v);
            caller.pc += 1;
        }
    }
    t.gc();
    Ok(SymStep::Eval(t, constraint))
}

/// Either the refinement successors or the evaluation successor.
#[derive(Clone, Debug)]
pub enum Expansion {
    Refine(Vec<(RefineKind, AbsHeapState)>),
    Step(SymStep),
}

pub fn expand(p: &Program, s: &AbsHeapState) -> Result<Expansion, SymexError> {
    match needs_refinement(p, s)? {
        Some(req) => Ok(Expansion::Refine(refine(p, s, &req))),
        None => Ok(Expansion::Step(symbolic_step(p, s)?)),
    }
}
