//! Least upper bound by a product construction over node pairs.

use std::collections::{BTreeMap, HashMap};

use crate::program::{ident, Program, OBJECT};
use crate::vm::{Addr, Value};

use super::morphism::same_shape;
use super::state::{AbsFrame, AbsHeapState, AbsObject, AbsValue, AbstractState, ShapeTag};
use super::unify::reduce_state;

struct Clash;

struct Joiner<'a> {
    p: &'a Program,
    s: &'a AbsHeapState,
    t: &'a AbsHeapState,
    out: AbsHeapState,
    memo: HashMap<(AbsValue, AbsValue), AbsValue>,
    origin: BTreeMap<Addr, (AbsValue, AbsValue)>,
}

enum Kind {
    Int,
    Bool,
    Unit,
    Null,
    Other,
}

fn kind(v: &AbsValue) -> Kind {
    match v {
        AbsValue::IntVar(_) | AbsValue::Val(Value::Int(_)) => Kind::Int,
        AbsValue::BoolVar(_) | AbsValue::Val(Value::Bool(_)) => Kind::Bool,
        AbsValue::Val(Value::Unit) => Kind::Unit,
        AbsValue::Val(Value::Null) => Kind::Null,
        AbsValue::Val(Value::Addr(_)) => Kind::Other,
    }
}

impl Joiner<'_> {
    fn classvar(&mut self, ty: &str, tag: ShapeTag, key: (AbsValue, AbsValue)) -> AbsValue {
        let r = self.out.new_classvar(&ident(ty), tag);
        let v = AbsValue::addr(r);
        self.memo.insert(key.clone(), v.clone());
        self.origin.insert(r, key);
        v
    }

    fn jv(&mut self, v: &AbsValue, w: &AbsValue) -> Result<AbsValue, Clash> {
        let key = (v.clone(), w.clone());
        if let Some(r) = self.memo.get(&key) {
            return Ok(r.clone());
        }
        let res = match (v, w) {
            (AbsValue::Val(Value::Addr(a)), AbsValue::Val(Value::Addr(b))) => {
                let oa = self.s.heap[a].clone();
                let ob = self.t.heap[b].clone();
                let tag = ShapeTag::merge(self.s.tag(*a), self.t.tag(*b));
                match (&oa, &ob) {
                    (AbsObject::Instance { class: c1, fields: f1 }, AbsObject::Instance { class: c2, fields: f2 })
                        if c1 == c2 && f1.len() == f2.len() =>
                    {
                        let r = self.out.fresh_addr();
                        let rv = AbsValue::addr(r);
                        self.memo.insert(key.clone(), rv.clone());
                        self.origin.insert(r, key.clone());
                        self.out.heap.insert(r, AbsObject::Instance { class: c1.clone(), fields: vec![] });
                        self.out.set_tag(r, tag);
                        let mut fields = Vec::with_capacity(f1.len());
                        let mut clash = false;
                        for ((k, x), (_, y)) in f1.iter().zip(f2.iter()) {
                            match self.jv(x, y) {
                                Ok(z) => fields.push((k.clone(), z)),
                                Err(Clash) => {
                                    clash = true;
                                    break;
                                }
                            }
                        }
                        let obj = if clash {
                            let id = self.out.fresh_var();
                            AbsObject::ClassVar { id, ty: c1.clone() }
                        } else {
                            AbsObject::Instance { class: c1.clone(), fields }
                        };
                        self.out.heap.insert(r, obj);
                        return Ok(rv);
                    }
                    _ => {
                        let ty = self.p.lub_class(oa.class_name(), ob.class_name());
                        return Ok(self.classvar(&ty, tag, key));
                    }
                }
            }
            (AbsValue::Val(Value::Addr(a)), AbsValue::Val(Value::Null | Value::Unit)) => {
                let ty = self.s.heap[a].class_name().clone();
                return Ok(self.classvar(&ty, self.s.tag(*a), key));
            }
            (AbsValue::Val(Value::Null | Value::Unit), AbsValue::Val(Value::Addr(b))) => {
                let ty = self.t.heap[b].class_name().clone();
                return Ok(self.classvar(&ty, self.t.tag(*b), key));
            }
            (AbsValue::Val(x), AbsValue::Val(y)) if x == y => v.clone(),
            _ => match (kind(v), kind(w)) {
                (Kind::Int | Kind::Unit, Kind::Int) | (Kind::Int, Kind::Unit) => AbsValue::IntVar(self.out.fresh_var()),
                (Kind::Bool | Kind::Unit, Kind::Bool) | (Kind::Bool, Kind::Unit) => AbsValue::BoolVar(self.out.fresh_var()),
                (Kind::Unit, Kind::Null) | (Kind::Null, Kind::Unit) => {
                    return Ok(self.classvar(OBJECT, ShapeTag::default(), key));
                }
                _ => return Err(Clash),
            },
        };
        self.memo.insert(key, res.clone());
        Ok(res)
    }
}

fn side_distinct(st: &AbsHeapState, x: &AbsValue, y: &AbsValue) -> bool {
    match (x.as_addr(), y.as_addr()) {
        (Some(a), Some(b)) => a != b && st.is_annotated(a, b),
        _ => true,
    }
}

/// The raw product construction, before reduction. `None` means `Top`.
pub fn join_states_raw(p: &Program, s: &AbsHeapState, t: &AbsHeapState) -> Option<AbsHeapState> {
    if !same_shape(s, t) {
        return None;
    }
    let mut out = AbsHeapState::new(Vec::new());
    out.regions = s.regions.clone();
    let mut j = Joiner { p, s, t, out, memo: HashMap::new(), origin: BTreeMap::new() };
    let mut frames = Vec::with_capacity(s.frames.len());
    for (fs, ft) in s.frames.iter().zip(t.frames.iter()) {
        let mut stack = Vec::with_capacity(fs.stack.len());
        for (x, y) in fs.stack.iter().zip(ft.stack.iter()) {
            stack.push(j.jv(x, y).ok()?);
        }
        let mut regs = Vec::with_capacity(fs.regs.len());
        for (x, y) in fs.regs.iter().zip(ft.regs.iter()) {
            regs.push(j.jv(x, y).ok()?);
        }
        frames.push(AbsFrame { stack, regs, class: fs.class.clone(), method: fs.method.clone(), pc: fs.pc });
    }
    let mut out = j.out;
    out.frames = frames;
    let addrs: Vec<Addr> = j.origin.keys().copied().collect();
    for (i, &r1) in addrs.iter().enumerate() {
        for &r2 in &addrs[i + 1..] {
            let (a1, b1) = &j.origin[&r1];
            let (a2, b2) = &j.origin[&r2];
            if side_distinct(s, a1, a2) && side_distinct(t, b1, b2) {
                out.annotate(r1, r2);
            }
        }
    }
    out.gc();
    Some(out)
}

/// Least upper bound followed by reduction.
pub fn join(p: &Program, s: &AbstractState, t: &AbstractState) -> AbstractState {
    match (s, t) {
        (AbstractState::Bot, x) | (x, AbstractState::Bot) => x.clone(),
        (AbstractState::Top, _) | (_, AbstractState::Top) => AbstractState::Top,
        (AbstractState::State(a), AbstractState::State(b)) => match join_states_raw(p, a, b) {
            Some(st) => AbstractState::State(reduce_state(p, &st)),
            None => AbstractState::Top,
        },
    }
}
