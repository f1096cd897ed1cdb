use std::collections::BTreeMap;

use crate::program::{Program, TypeRef};
use crate::vm::{Addr, JvmState, Value};

use super::unify::unify;
use super::state::{beta, AbsHeapState, AbsObject, AbsValue, AbstractState, VarId};

/// Witness for `s ⊑ t`: maps every address and variable of `t` to the
/// value it stands for in `s`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Morphism {
    pub addrs: BTreeMap<Addr, AbsValue>,
    pub vars: BTreeMap<VarId, AbsValue>,
}

struct Matcher<'a> {
    p: &'a Program,
    s: &'a AbsHeapState,
    t: &'a AbsHeapState,
    m: Morphism,
    work: Vec<(AbsValue, AbsValue)>,
}

impl Matcher<'_> {
    fn bind_var(&mut self, x: VarId, v: &AbsValue) -> bool {
        match self.m.vars.get(&x) {
            Some(prev) => prev == v,
            None => {
                self.m.vars.insert(x, v.clone());
                true
            }
        }
    }

    /// `w` from the abstraction, `v` from the instance.
    fn step(&mut self, w: &AbsValue, v: &AbsValue) -> bool {
        match w {
            AbsValue::IntVar(x) => {
                matches!(v, AbsValue::IntVar(_) | AbsValue::Val(Value::Int(_)) | AbsValue::Val(Value::Unit))
                    && self.bind_var(*x, v)
            }
            AbsValue::BoolVar(x) => {
                matches!(v, AbsValue::BoolVar(_) | AbsValue::Val(Value::Bool(_)) | AbsValue::Val(Value::Unit))
                    && self.bind_var(*x, v)
            }
            AbsValue::Val(Value::Addr(a)) => {
                if let Some(prev) = self.m.addrs.get(a) {
                    return prev == v;
                }
                let Some(wo) = self.t.heap.get(a) else { return false };
                match wo {
                    AbsObject::ClassVar { ty, .. } => {
                        let ok = match v {
                            AbsValue::Val(Value::Null) | AbsValue::Val(Value::Unit) => true,
                            AbsValue::Val(Value::Addr(b)) => match self.s.heap.get(b) {
                                Some(o) => self.p.is_subtype(&TypeRef::Class(o.class_name().clone()), &TypeRef::Class(ty.clone())),
                                None => false,
                            },
                            _ => false,
                        };
                        if !ok {
                            return false;
                        }
                    }
                    AbsObject::Instance { class, fields } => {
                        let Some(b) = v.as_addr() else { return false };
                        match self.s.heap.get(&b) {
                            Some(AbsObject::Instance { class: c2, fields: f2 }) if c2 == class && f2.len() == fields.len() => {
                                for ((k1, x), (k2, y)) in fields.iter().zip(f2.iter()) {
                                    if k1 != k2 {
                                        return false;
                                    }
                                    self.work.push((x.clone(), y.clone()));
                                }
                            }
                            _ => return false,
                        }
                    }
                }
                self.m.addrs.insert(*a, v.clone());
                true
            }
            AbsValue::Val(c) => matches!(v, AbsValue::Val(d) if d == c),
        }
    }

    fn run(&mut self) -> bool {
        while let Some((w, v)) = self.work.pop() {
            if !self.step(&w, &v) {
                return false;
            }
        }
        true
    }
}

pub fn same_shape(s: &AbsHeapState, t: &AbsHeapState) -> bool {
    s.frames.len() == t.frames.len()
        && s.frames.iter().zip(t.frames.iter()).all(|(a, b)| {
            a.class == b.class
                && a.method == b.method
                && a.pc == b.pc
                && a.stack.len() == b.stack.len()
                && a.regs.len() == b.regs.len()
        })
}

/// Morphism witnessing `s ⊑ t` between proper states.
pub fn state_morphism(p: &Program, s: &AbsHeapState, t: &AbsHeapState) -> Option<Morphism> {
    if !same_shape(s, t) {
        return None;
    }
    let mut mt = Matcher { p, s, t, m: Morphism::default(), work: Vec::new() };
    let pairs: Vec<(AbsValue, AbsValue)> = t.root_values().cloned().zip(s.root_values().cloned()).collect();
    // Process in reverse so that the first root is matched first.
    mt.work.extend(pairs.into_iter().rev());
    if !mt.run() {
        return None;
    }
    for (x, y) in &t.annotations {
        let (Some(ix), Some(iy)) = (mt.m.addrs.get(x), mt.m.addrs.get(y)) else { continue };
        if let (Some(a), Some(b)) = (ix.as_addr(), iy.as_addr()) {
            // A pair that cannot alias anyway is implicitly annotated.
            if a == b || (!s.is_annotated(a, b) && unify(p, s, &[(AbsValue::addr(a), AbsValue::addr(b))], false).is_some()) {
                return None;
            }
        }
    }
    Some(mt.m)
}

/// `s ⊑ t`, returning the witness.
pub fn instance_of(p: &Program, s: &AbstractState, t: &AbstractState) -> Option<Morphism> {
    match (s, t) {
        (AbstractState::Bot, _) => Some(Morphism::default()),
        (_, AbstractState::Top) => Some(Morphism::default()),
        (AbstractState::State(a), AbstractState::State(b)) => state_morphism(p, a, b),
        _ => None,
    }
}

pub fn is_instance(p: &Program, s: &AbstractState, t: &AbstractState) -> bool {
    instance_of(p, s, t).is_some()
}

/// Mutual instances.
pub fn equivalent(p: &Program, s: &AbstractState, t: &AbstractState) -> bool {
    is_instance(p, s, t) && is_instance(p, t, s)
}

/// Concrete membership in the concretisation of `t`.
pub fn gamma_member(p: &Program, s: &JvmState, t: &AbstractState) -> bool {
    is_instance(p, &beta(s), t)
}
