//! Unification of abstract values inside one state, and the reduce
//! operator built on it.

use std::collections::{BTreeMap, BTreeSet};

use crate::program::{Program, TypeRef};
use crate::vm::{Addr, Value};

use super::state::{AbsHeapState, AbsObject, AbsValue, AbstractState, ShapeTag, VarId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    A(Addr),
    V(VarId),
}

struct Unifier<'a> {
    p: &'a Program,
    s: &'a AbsHeapState,
    parent: BTreeMap<Key, Key>,
    bound: BTreeMap<Key, AbsValue>,
    objs: BTreeMap<Addr, AbsObject>,
    tags: BTreeMap<Addr, ShapeTag>,
    acyclic: BTreeSet<Addr>,
    work: Vec<(AbsValue, AbsValue)>,
}

impl<'a> Unifier<'a> {
    fn new(p: &'a Program, s: &'a AbsHeapState) -> Self {
        Unifier {
            p,
            s,
            parent: BTreeMap::new(),
            bound: BTreeMap::new(),
            objs: BTreeMap::new(),
            tags: BTreeMap::new(),
            acyclic: BTreeSet::new(),
            work: Vec::new(),
        }
    }

    fn find(&mut self, k: Key) -> Key {
        let mut r = k;
        while let Some(&n) = self.parent.get(&r) {
            r = n;
        }
        let mut c = k;
        while let Some(&n) = self.parent.get(&c) {
            if n == r {
                break;
            }
            self.parent.insert(c, r);
            c = n;
        }
        r
    }

    fn obj(&self, a: Addr) -> Option<AbsObject> {
        self.objs.get(&a).cloned().or_else(|| self.s.heap.get(&a).cloned())
    }

    fn tag(&self, a: Addr) -> ShapeTag {
        self.tags.get(&a).copied().unwrap_or_else(|| self.s.tag(a))
    }

    fn resolve(&mut self, v: &AbsValue) -> AbsValue {
        match v {
            AbsValue::Val(Value::Addr(a)) => {
                let r = self.find(Key::A(*a));
                if let Some(b) = self.bound.get(&r) {
                    return b.clone();
                }
                match r {
                    Key::A(x) => AbsValue::addr(x),
                    Key::V(_) => unreachable!(),
                }
            }
            AbsValue::IntVar(x) | AbsValue::BoolVar(x) => {
                let r = self.find(Key::V(*x));
                if let Some(b) = self.bound.get(&r) {
                    return b.clone();
                }
                match (v, r) {
                    (AbsValue::IntVar(_), Key::V(y)) => AbsValue::IntVar(y),
                    (AbsValue::BoolVar(_), Key::V(y)) => AbsValue::BoolVar(y),
                    _ => unreachable!(),
                }
            }
            other => other.clone(),
        }
    }

    fn sub(&self, a: &str, b: &str) -> bool {
        self.p.is_subtype(&TypeRef::Class(a.into()), &TypeRef::Class(b.into()))
    }

    fn unify_one(&mut self, x: &AbsValue, y: &AbsValue) -> bool {
        let x = self.resolve(x);
        let y = self.resolve(y);
        if x == y {
            return true;
        }
        match (&x, &y) {
            (AbsValue::Val(Value::Addr(a)), AbsValue::Val(Value::Addr(b))) => {
                let (Some(oa), Some(ob)) = (self.obj(*a), self.obj(*b)) else { return false };
                let merged = match (&oa, &ob) {
                    (AbsObject::Instance { class: c1, fields: f1 }, AbsObject::Instance { class: c2, fields: f2 }) => {
                        if c1 != c2 || f1.len() != f2.len() {
                            return false;
                        }
                        for ((_, u), (_, v)) in f1.iter().zip(f2.iter()) {
                            self.work.push((u.clone(), v.clone()));
                        }
                        oa.clone()
                    }
                    (AbsObject::ClassVar { ty, .. }, inst @ AbsObject::Instance { class, .. })
                    | (inst @ AbsObject::Instance { class, .. }, AbsObject::ClassVar { ty, .. }) => {
                        if !self.sub(class, ty) {
                            return false;
                        }
                        inst.clone()
                    }
                    (AbsObject::ClassVar { ty: t1, .. }, AbsObject::ClassVar { ty: t2, .. }) => {
                        if self.sub(t1, t2) {
                            oa.clone()
                        } else if self.sub(t2, t1) {
                            ob.clone()
                        } else {
                            return false;
                        }
                    }
                };
                let ta = self.tag(*a);
                let tb = self.tag(*b);
                if ta.acyclic || tb.acyclic || self.acyclic.contains(b) {
                    self.acyclic.insert(*a);
                }
                self.parent.insert(Key::A(*b), Key::A(*a));
                self.objs.insert(*a, merged);
                self.tags.insert(*a, ShapeTag::merge(ta, tb));
                true
            }
            (AbsValue::Val(Value::Addr(a)), c @ AbsValue::Val(Value::Null | Value::Unit))
            | (c @ AbsValue::Val(Value::Null | Value::Unit), AbsValue::Val(Value::Addr(a))) => {
                match self.obj(*a) {
                    Some(AbsObject::ClassVar { .. }) => {
                        self.bound.insert(Key::A(*a), c.clone());
                        true
                    }
                    _ => false,
                }
            }
            (AbsValue::IntVar(v), c @ AbsValue::Val(Value::Int(_) | Value::Unit))
            | (c @ AbsValue::Val(Value::Int(_) | Value::Unit), AbsValue::IntVar(v))
            | (AbsValue::BoolVar(v), c @ AbsValue::Val(Value::Bool(_) | Value::Unit))
            | (c @ AbsValue::Val(Value::Bool(_) | Value::Unit), AbsValue::BoolVar(v)) => {
                self.bound.insert(Key::V(*v), c.clone());
                true
            }
            (AbsValue::IntVar(v), AbsValue::IntVar(w)) | (AbsValue::BoolVar(v), AbsValue::BoolVar(w)) => {
                self.parent.insert(Key::V(*w), Key::V(*v));
                true
            }
            _ => false,
        }
    }

    fn solve(&mut self) -> bool {
        while let Some((x, y)) = self.work.pop() {
            if !self.unify_one(&x, &y) {
                return false;
            }
        }
        let anns: Vec<(Addr, Addr)> = self.s.annotations.iter().copied().collect();
        for (x, y) in anns {
            let rx = self.resolve(&AbsValue::addr(x));
            let ry = self.resolve(&AbsValue::addr(y));
            let Some(r) = rx.as_addr() else { continue };
            if rx == ry {
                // An annotated pair may still coincide as null.
                match self.obj(r) {
                    Some(AbsObject::ClassVar { .. }) => {
                        self.bound.insert(Key::A(r), AbsValue::null());
                    }
                    _ => return false,
                }
            }
        }
        true
    }

    fn build(mut self) -> AbsHeapState {
        let mut out = self.s.clone();
        let addrs: Vec<Addr> = self.s.heap.keys().copied().collect();
        let mut amap = BTreeMap::new();
        for a in addrs {
            let r = self.resolve(&AbsValue::addr(a));
            if r != AbsValue::addr(a) {
                amap.insert(a, r);
            } else {
                if let Some(o) = self.objs.get(&a) {
                    out.heap.insert(a, o.clone());
                }
                if let Some(t) = self.tags.get(&a) {
                    out.set_tag(a, *t);
                }
            }
        }
        let mut vars = BTreeSet::new();
        for v in out.root_values().chain(out.heap.values().flat_map(|o| o.field_values())) {
            if v.is_var() {
                vars.insert(v.clone());
            }
        }
        let mut fixed = BTreeMap::new();
        for probe in vars {
            let r = self.resolve(&probe);
            if let (AbsValue::IntVar(x) | AbsValue::BoolVar(x), true) = (&probe, r != probe) {
                fixed.insert(*x, r);
            }
        }
        out.substitute(&amap, &fixed);
        out.gc();
        out
    }
}

fn on_cycle_from(s: &AbsHeapState, starts: &BTreeSet<Addr>) -> bool {
    for &a in starts {
        if !s.heap.contains_key(&a) {
            continue;
        }
        for x in s.reach(a) {
            if s.reach_plus(x).contains(&x) {
                return true;
            }
        }
    }
    false
}

/// Unifies the given value pairs. Fails on label conflicts, on collapsing
/// an annotated pair, and, with `respect_acyclic`, when the merge puts a
/// cycle below an object tagged acyclic.
pub fn unify(p: &Program, s: &AbsHeapState, eqs: &[(AbsValue, AbsValue)], respect_acyclic: bool) -> Option<AbsHeapState> {
    let mut u = Unifier::new(p, s);
    u.work.extend(eqs.iter().rev().cloned());
    if !u.solve() {
        return None;
    }
    let acyc: BTreeSet<Addr> = if respect_acyclic {
        let mut set: BTreeSet<Addr> = s.tags.iter().filter(|(_, t)| t.acyclic).map(|(a, _)| *a).collect();
        set.extend(u.acyclic.iter().copied());
        set.into_iter()
            .filter_map(|a| u.resolve(&AbsValue::addr(a)).as_addr())
            .collect()
    } else {
        BTreeSet::new()
    };
    let out = u.build();
    if respect_acyclic && on_cycle_from(&out, &acyc) {
        return None;
    }
    Some(out)
}

/// Annotates every unannotated address pair whose unification fails, until
/// nothing changes.
pub fn reduce_state(p: &Program, s: &AbsHeapState) -> AbsHeapState {
    let mut cur = s.clone();
    loop {
        let addrs: Vec<Addr> = cur.heap.keys().copied().collect();
        let mut changed = false;
        for (i, &a) in addrs.iter().enumerate() {
            for &b in &addrs[i + 1..] {
                if cur.is_annotated(a, b) {
                    continue;
                }
                if unify(p, &cur, &[(AbsValue::addr(a), AbsValue::addr(b))], false).is_none() {
                    cur.annotate(a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            return cur;
        }
    }
}

pub fn reduce(p: &Program, s: &AbstractState) -> AbstractState {
    match s {
        AbstractState::State(st) => AbstractState::State(reduce_state(p, st)),
        other => other.clone(),
    }
}
