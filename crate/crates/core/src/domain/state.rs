use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::program::{FieldKey, Ident, Program, TypeRef};
use crate::vm::{Addr, JvmState, Value};

pub type VarId = u32;

/// Non-address values, abstract variables and addresses.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AbsValue {
    Val(Value),
    IntVar(VarId),
    BoolVar(VarId),
}

impl AbsValue {
    pub fn addr(a: Addr) -> AbsValue {
        AbsValue::Val(Value::Addr(a))
    }

    pub fn null() -> AbsValue {
        AbsValue::Val(Value::Null)
    }

    pub fn unit() -> AbsValue {
        AbsValue::Val(Value::Unit)
    }

    pub fn int(z: i64) -> AbsValue {
        AbsValue::Val(Value::int(z))
    }

    pub fn as_addr(&self) -> Option<Addr> {
        match self {
            AbsValue::Val(Value::Addr(a)) => Some(*a),
            _ => None,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, AbsValue::IntVar(_) | AbsValue::BoolVar(_))
    }
}

impl From<Value> for AbsValue {
    fn from(v: Value) -> Self {
        AbsValue::Val(v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AbsObject {
    Instance { class: Ident, fields: Vec<(FieldKey, AbsValue)> },
    ClassVar { id: VarId, ty: Ident },
}

impl AbsObject {
    pub fn class_name(&self) -> &Ident {
        match self {
            AbsObject::Instance { class, .. } => class,
            AbsObject::ClassVar { ty, .. } => ty,
        }
    }

    pub fn is_classvar(&self) -> bool {
        matches!(self, AbsObject::ClassVar { .. })
    }

    pub fn field(&self, key: &FieldKey) -> Option<&AbsValue> {
        match self {
            AbsObject::Instance { fields, .. } => fields.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            AbsObject::ClassVar { .. } => None,
        }
    }

    pub fn field_values(&self) -> impl Iterator<Item = &AbsValue> {
        let fs: &[(FieldKey, AbsValue)] = match self {
            AbsObject::Instance { fields, .. } => fields,
            AbsObject::ClassVar { .. } => &[],
        };
        fs.iter().map(|(_, v)| v)
    }
}

/// Shape facts attached to an address; ignored by the lattice order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct ShapeTag {
    /// Region of the entry root this object came from.
    pub region: Option<u8>,
    /// Everything reachable stays inside `region`.
    pub closed: bool,
    /// Nothing reachable lies on a cycle.
    pub acyclic: bool,
}

impl ShapeTag {
    pub fn merge(a: ShapeTag, b: ShapeTag) -> ShapeTag {
        ShapeTag {
            region: if a.region == b.region { a.region } else { None },
            closed: a.closed && b.closed && a.region == b.region,
            acyclic: a.acyclic && b.acyclic,
        }
    }

    /// `self` carries at least the facts of `other`.
    pub fn implies(&self, other: &ShapeTag) -> bool {
        (other.region.is_none() || self.region == other.region)
            && (!other.closed || self.closed)
            && (!other.acyclic || self.acyclic)
    }
}

/// Entry-root regions and which of them are assumed not to share.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Regions {
    pub names: Vec<String>,
    pub disjoint: BTreeSet<(u8, u8)>,
}

impl Regions {
    pub fn are_disjoint(&self, a: Option<u8>, b: Option<u8>) -> bool {
        match (a, b) {
            (Some(x), Some(y)) if x != y => self.disjoint.contains(&(x.min(y), x.max(y))),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AbsFrame {
    /// Bottom first.
    pub stack: Vec<AbsValue>,
    pub regs: Vec<AbsValue>,
    pub class: Ident,
    pub method: Ident,
    pub pc: usize,
}

pub type Location = Vec<(Ident, Ident, usize)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbsHeapState {
    pub heap: BTreeMap<Addr, AbsObject>,
    /// `frames[0]` is the active frame.
    pub frames: Vec<AbsFrame>,
    /// Unordered pairs stored as `(min, max)`.
    pub annotations: BTreeSet<(Addr, Addr)>,
    pub tags: BTreeMap<Addr, ShapeTag>,
    pub regions: Arc<Regions>,
    pub next_var: VarId,
    pub next_addr: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AbstractState {
    Bot,
    Top,
    State(AbsHeapState),
}

impl AbstractState {
    pub fn as_state(&self) -> Option<&AbsHeapState> {
        match self {
            AbstractState::State(s) => Some(s),
            _ => None,
        }
    }

    pub fn location(&self) -> Option<Location> {
        self.as_state().map(|s| s.location())
    }
}

pub fn pair(a: Addr, b: Addr) -> (Addr, Addr) {
    (a.min(b), a.max(b))
}

impl AbsHeapState {
    pub fn new(frames: Vec<AbsFrame>) -> Self {
        AbsHeapState {
            heap: BTreeMap::new(),
            frames,
            annotations: BTreeSet::new(),
            tags: BTreeMap::new(),
            regions: Arc::new(Regions::default()),
            next_var: 1,
            next_addr: 1,
        }
    }

    pub fn location(&self) -> Location {
        self.frames.iter().map(|f| (f.class.clone(), f.method.clone(), f.pc)).collect()
    }

    pub fn fresh_var(&mut self) -> VarId {
        let v = self.next_var;
        self.next_var += 1;
        v
    }

    pub fn fresh_addr(&mut self) -> Addr {
        let a = Addr(self.next_addr);
        self.next_addr += 1;
        a
    }

    /// Adds a `ClassVar` object at a fresh address.
    pub fn new_classvar(&mut self, ty: &Ident, tag: ShapeTag) -> Addr {
        let a = self.fresh_addr();
        let id = self.fresh_var();
        self.heap.insert(a, AbsObject::ClassVar { id, ty: ty.clone() });
        self.set_tag(a, tag);
        a
    }

    /// A value of the given type with nothing known about it.
    pub fn fresh_value(&mut self, t: &TypeRef, tag: ShapeTag) -> AbsValue {
        match t {
            TypeRef::Int => AbsValue::IntVar(self.fresh_var()),
            TypeRef::Bool => AbsValue::BoolVar(self.fresh_var()),
            TypeRef::Unit => AbsValue::unit(),
            TypeRef::NullT => AbsValue::null(),
            TypeRef::Class(c) => AbsValue::addr(self.new_classvar(c, tag)),
        }
    }

    pub fn tag(&self, a: Addr) -> ShapeTag {
        self.tags.get(&a).copied().unwrap_or_default()
    }

    pub fn set_tag(&mut self, a: Addr, t: ShapeTag) {
        if t == ShapeTag::default() {
            self.tags.remove(&a);
        } else {
            self.tags.insert(a, t);
        }
    }

    pub fn is_annotated(&self, a: Addr, b: Addr) -> bool {
        self.annotations.contains(&pair(a, b))
    }

    pub fn annotate(&mut self, a: Addr, b: Addr) {
        if a != b {
            self.annotations.insert(pair(a, b));
        }
    }

    pub fn root_values(&self) -> impl Iterator<Item = &AbsValue> {
        self.frames.iter().flat_map(|f| f.stack.iter().chain(f.regs.iter()))
    }

    pub fn root_values_mut(&mut self) -> impl Iterator<Item = &mut AbsValue> {
        self.frames.iter_mut().flat_map(|f| f.stack.iter_mut().chain(f.regs.iter_mut()))
    }

    pub fn all_values_mut(&mut self) -> impl Iterator<Item = &mut AbsValue> {
        let heap_vals = self.heap.values_mut().flat_map(|o| match o {
            AbsObject::Instance { fields, .. } => fields.iter_mut().map(|(_, v)| v).collect::<Vec<_>>(),
            AbsObject::ClassVar { .. } => Vec::new(),
        });
        self.frames
            .iter_mut()
            .flat_map(|f| f.stack.iter_mut().chain(f.regs.iter_mut()))
            .chain(heap_vals)
    }

    /// Addresses reachable from `a`, including `a`.
    pub fn reach(&self, a: Addr) -> BTreeSet<Addr> {
        let mut seen = BTreeSet::new();
        let mut work = vec![a];
        while let Some(x) = work.pop() {
            if seen.insert(x) {
                if let Some(o) = self.heap.get(&x) {
                    work.extend(o.field_values().filter_map(|v| v.as_addr()));
                }
            }
        }
        seen
    }

    /// Addresses reachable from `a` via at least one field edge.
    pub fn reach_plus(&self, a: Addr) -> BTreeSet<Addr> {
        let mut seen = BTreeSet::new();
        let mut work: Vec<Addr> = self.heap.get(&a).map_or(vec![], |o| o.field_values().filter_map(|v| v.as_addr()).collect());
        while let Some(x) = work.pop() {
            if seen.insert(x) {
                if let Some(o) = self.heap.get(&x) {
                    work.extend(o.field_values().filter_map(|v| v.as_addr()));
                }
            }
        }
        seen
    }

    pub fn live_addrs(&self) -> BTreeSet<Addr> {
        let mut seen = BTreeSet::new();
        for r in self.root_values().filter_map(|v| v.as_addr()) {
            if !seen.contains(&r) {
                seen.extend(self.reach(r));
            }
        }
        seen
    }

    /// Removes unreachable objects with their annotations and tags.
    pub fn gc(&mut self) {
        let live = self.live_addrs();
        self.heap.retain(|a, _| live.contains(a));
        self.annotations.retain(|(a, b)| live.contains(a) && live.contains(b));
        self.tags.retain(|a, _| live.contains(a));
    }

    pub fn type_of(&self, v: &AbsValue) -> TypeRef {
        match v {
            AbsValue::IntVar(_) => TypeRef::Int,
            AbsValue::BoolVar(_) => TypeRef::Bool,
            AbsValue::Val(Value::Int(_)) => TypeRef::Int,
            AbsValue::Val(Value::Bool(_)) => TypeRef::Bool,
            AbsValue::Val(Value::Unit) => TypeRef::Unit,
            AbsValue::Val(Value::Null) => TypeRef::NullT,
            AbsValue::Val(Value::Addr(a)) => {
                TypeRef::Class(self.heap.get(a).map(|o| o.class_name().clone()).unwrap_or_else(|| crate::program::ident("Object")))
            }
        }
    }

    /// Replaces addresses and variables everywhere. Replaced addresses are
    /// removed from the heap; annotations whose image is not a pair of
    /// distinct addresses are dropped.
    pub fn substitute(&mut self, addrs: &BTreeMap<Addr, AbsValue>, vars: &BTreeMap<VarId, AbsValue>) {
        if addrs.is_empty() && vars.is_empty() {
            return;
        }
        let map = |v: &mut AbsValue| {
            let new = match v {
                AbsValue::Val(Value::Addr(a)) => addrs.get(a).cloned(),
                AbsValue::IntVar(x) | AbsValue::BoolVar(x) => vars.get(x).cloned(),
                _ => None,
            };
            if let Some(n) = new {
                *v = n;
            }
        };
        for v in self.all_values_mut() {
            map(v);
        }
        for a in addrs.keys() {
            self.heap.remove(a);
        }
        let anns = std::mem::take(&mut self.annotations);
        for (a, b) in anns {
            let ia = addrs.get(&a).cloned().unwrap_or(AbsValue::addr(a));
            let ib = addrs.get(&b).cloned().unwrap_or(AbsValue::addr(b));
            if let (Some(x), Some(y)) = (ia.as_addr(), ib.as_addr()) {
                if x != y {
                    self.annotations.insert(pair(x, y));
                }
            }
        }
        for a in addrs.keys() {
            self.tags.remove(a);
        }
    }

    /// Renders an abstract variable or object name.
    pub fn classvar_name(ty: &str, id: VarId) -> String {
        format!("{}{id}", ty.to_lowercase())
    }

    pub fn show_value(&self, v: &AbsValue) -> String {
        match v {
            AbsValue::Val(x) => x.to_string(),
            AbsValue::IntVar(i) => format!("i{i}"),
            AbsValue::BoolVar(b) => format!("b{b}"),
        }
    }

    /// One-line rendering used in DOT labels and dumps.
    pub fn render(&self, p: Option<&Program>) -> String {
        let mut parts = Vec::new();
        for (fi, f) in self.frames.iter().enumerate() {
            let stk: Vec<String> = f.stack.iter().map(|v| self.show_value(v)).collect();
            let m = p.and_then(|p| p.method(&f.class, &f.method));
            let regs: Vec<String> = f
                .regs
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let n = m.map_or(format!("r{i}"), |m| m.register_name(i));
                    format!("{n}={}", self.show_value(v))
                })
                .collect();
            let stk = if stk.is_empty() { "\u{3b5}".to_string() } else { stk.join(", ") };
            let head = if fi == 0 { String::new() } else { format!("{}.{} ", f.class, f.method) };
            parts.push(format!("{head}{:02} | {} | {}", f.pc, stk, regs.join(", ")));
        }
        let mut objs = Vec::new();
        for (a, o) in &self.heap {
            let tag = self.tag(*a);
            let mut t = String::new();
            if let Some(r) = tag.region {
                t.push_str(&format!(" @{}", self.regions.names.get(r as usize).map_or("?", |s| s.as_str())));
            }
            if tag.acyclic {
                t.push_str(" acyc");
            }
            if tag.closed {
                t.push_str(" closed");
            }
            match o {
                AbsObject::Instance { class, fields } => {
                    let fs: Vec<String> = fields.iter().map(|(k, v)| format!("{}={}", k.name, self.show_value(v))).collect();
                    objs.push(format!("{a} = {class}({}){t}", fs.join(", ")));
                }
                AbsObject::ClassVar { id, ty } => objs.push(format!("{a} = {}{t}", Self::classvar_name(ty, *id))),
            }
        }
        if !objs.is_empty() {
            parts.push(objs.join(", "));
        }
        if !self.annotations.is_empty() {
            let a: Vec<String> = self.annotations.iter().map(|(x, y)| format!("{{{x},{y}}}")).collect();
            parts.push(a.join(" "));
        }
        parts.join(" | ")
    }
}

impl fmt::Display for AbstractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbstractState::Bot => f.write_str("\u{22a5}"),
            AbstractState::Top => f.write_str("\u{22a4}"),
            AbstractState::State(s) => f.write_str(&s.render(None)),
        }
    }
}

/// Abstraction of a concrete state: every object is an instance and every
/// pair of distinct addresses is annotated.
pub fn beta(s: &JvmState) -> AbstractState {
    let mut st = beta_unannotated(s);
    let addrs: Vec<Addr> = st.heap.keys().copied().collect();
    for (i, a) in addrs.iter().enumerate() {
        for b in &addrs[i + 1..] {
            st.annotations.insert(pair(*a, *b));
        }
    }
    AbstractState::State(st)
}

pub(crate) fn beta_unannotated(s: &JvmState) -> AbsHeapState {
    let frames = s
        .frames
        .iter()
        .map(|f| AbsFrame {
            stack: f.stack.iter().cloned().map(AbsValue::Val).collect(),
            regs: f.regs.iter().cloned().map(AbsValue::Val).collect(),
            class: f.class.clone(),
            method: f.method.clone(),
            pc: f.pc,
        })
        .collect();
    let mut st = AbsHeapState::new(frames);
    for (a, o) in &s.heap {
        st.heap.insert(
            *a,
            AbsObject::Instance {
                class: o.class.clone(),
                fields: o.fields.iter().map(|(k, v)| (k.clone(), AbsValue::Val(v.clone()))).collect(),
            },
        );
    }
    st.next_addr = s.heap.keys().next_back().map_or(1, |a| a.0 + 1);
    st.gc();
    st
}
