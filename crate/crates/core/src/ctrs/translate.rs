//! Abstract states to terms.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::constraint::{bool_var_name, int_var_name, Sort};
use crate::domain::{AbsHeapState, AbsObject, AbsValue};
use crate::program::Program;
use crate::shape::{maybe_cyclic, ShapeError};
use crate::vm::{Addr, Value};

use super::term::Term;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranslateError {
    #[error("address {0} is not in the heap")]
    Dangling(Addr),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Fresh-variable supply shared by both sides of one rule.
#[derive(Clone, Debug, Default)]
pub struct Fresh {
    next: usize,
    renamed: BTreeMap<Addr, String>,
}

impl Fresh {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(&mut self) -> Term {
        self.next += 1;
        Term::Var(format!("x_{}", self.next), Sort::Univ)
    }

    /// One fresh variable per address, reused on repeated occurrences.
    fn renamed(&mut self, a: Addr) -> Term {
        if let Some(n) = self.renamed.get(&a) {
            return Term::Var(n.clone(), Sort::Univ);
        }
        let Term::Var(n, s) = self.var() else { unreachable!() };
        self.renamed.insert(a, n.clone());
        Term::Var(n, s)
    }
}

/// Translation of one state; caches which addresses may be cyclic.
pub struct Translator<'a> {
    p: &'a Program,
    s: &'a AbsHeapState,
    cyclic: BTreeMap<Addr, bool>,
    /// Addresses replaced by fresh variables (the starred translation).
    renamed: BTreeSet<Addr>,
}

impl<'a> Translator<'a> {
    pub fn new(p: &'a Program, s: &'a AbsHeapState) -> Self {
        Translator { p, s, cyclic: BTreeMap::new(), renamed: BTreeSet::new() }
    }

    pub fn with_renamed(mut self, addrs: BTreeSet<Addr>) -> Self {
        self.renamed = addrs;
        self
    }

    fn is_cyclic(&mut self, a: Addr) -> Result<bool, TranslateError> {
        if let Some(c) = self.cyclic.get(&a) {
            return Ok(*c);
        }
        let c = maybe_cyclic(self.p, self.s, a)?;
        self.cyclic.insert(a, c);
        Ok(c)
    }

    pub fn tval(&mut self, v: &AbsValue, fresh: &mut Fresh) -> Result<Term, TranslateError> {
        let mut path = Vec::new();
        self.value(v, fresh, &mut path)
    }

    pub fn tobj(&mut self, a: Addr, fresh: &mut Fresh) -> Result<Term, TranslateError> {
        let mut path = Vec::new();
        self.obj(a, fresh, &mut path)
    }

    fn value(&mut self, v: &AbsValue, fresh: &mut Fresh, path: &mut Vec<Addr>) -> Result<Term, TranslateError> {
        Ok(match v {
            AbsValue::Val(Value::Unit | Value::Null) => Term::Null,
            AbsValue::Val(Value::Int(z)) => Term::Int(z.clone()),
            AbsValue::Val(Value::Bool(b)) => Term::Bool(*b),
            AbsValue::Val(Value::Addr(a)) => return self.obj(*a, fresh, path),
            AbsValue::IntVar(i) => Term::Var(int_var_name(*i), Sort::Int),
            AbsValue::BoolVar(b) => Term::Var(bool_var_name(*b), Sort::Bool),
        })
    }

    fn obj(&mut self, a: Addr, fresh: &mut Fresh, path: &mut Vec<Addr>) -> Result<Term, TranslateError> {
        let o = self.s.heap.get(&a).ok_or(TranslateError::Dangling(a))?;
        if self.renamed.contains(&a) {
            return Ok(fresh.renamed(a));
        }
        if self.is_cyclic(a)? || path.contains(&a) {
            return Ok(fresh.var());
        }
        match o {
            AbsObject::ClassVar { id, ty } => Ok(Term::Var(AbsHeapState::classvar_name(ty, *id), Sort::Univ)),
            AbsObject::Instance { class, fields } => {
                path.push(a);
                let mut args = Vec::with_capacity(fields.len());
                for (_, v) in fields {
                    args.push(self.value(v, fresh, path)?);
                }
                path.pop();
                Ok(Term::App(class.to_string(), args))
            }
        }
    }

    /// Stack entries of every frame (bottom first), then every register.
    pub fn tst(&mut self, fresh: &mut Fresh) -> Result<Vec<Term>, TranslateError> {
        let s = self.s;
        let mut out = Vec::new();
        for f in &s.frames {
            for v in &f.stack {
                out.push(self.tval(v, fresh)?);
            }
        }
        for f in &s.frames {
            for v in &f.regs {
                out.push(self.tval(v, fresh)?);
            }
        }
        Ok(out)
    }
}

/// Number of arguments of the node symbol for `s`.
pub fn tst_arity(s: &AbsHeapState) -> usize {
    s.frames.iter().map(|f| f.stack.len() + f.regs.len()).sum()
}

pub fn tst(p: &Program, s: &AbsHeapState) -> Result<Vec<Term>, TranslateError> {
    Translator::new(p, s).tst(&mut Fresh::new())
}

pub fn tval(p: &Program, s: &AbsHeapState, v: &AbsValue) -> Result<Term, TranslateError> {
    Translator::new(p, s).tval(v, &mut Fresh::new())
}
