#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use jbc2ctrs::domain::{pair, AbsFrame, AbsHeapState, AbsObject, AbsValue, AbstractState};
use jbc2ctrs::pipeline::load_program;
use jbc2ctrs::program::{ident, TypeRef};
use jbc2ctrs::symex::{refine_class_instance, refine_unshare};
use jbc2ctrs::vm::{Addr, Frame, HeapObject, JvmState, Value};
use jbc2ctrs::Program;

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

pub fn corpus(name: &str) -> Program {
    let src = std::fs::read_to_string(corpus_path(name)).unwrap();
    load_program(&src).unwrap()
}

/// `n` cells, each with `val = 0`.
pub fn list_literal(n: usize) -> String {
    let mut s = "null".to_string();
    for _ in 0..n {
        s = format!("List{{next:{s}}}");
    }
    s
}

fn split_top(s: &str, sep: char) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' | '{' => depth += 1,
            ')' | '}' => depth -= 1,
            _ => {}
        }
        if c == sep && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(c);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// Reads states written the way they are tabulated in the literature:
///
/// `04 | ε | this=o1, ys=o2, cur=o1 | o1 = List(next=o3), o2 = list, o3 = list`
///
/// An optional fifth column lists unsharing pairs as `{o1,o4}`. Fields left
/// out of an instance get fresh variables, `int`/`bool` stand for fresh
/// variables and a lower-case class name for a class variable.
pub fn tabular_state(p: &Program, class: &str, method: &str, text: &str) -> AbsHeapState {
    let cols: Vec<&str> = text.split('|').map(str::trim).collect();
    assert!(cols.len() == 4 || cols.len() == 5, "bad state text: {text}");
    let pc: usize = cols[0].parse().unwrap();
    let mut max_addr = 0;
    for tok in text.split(|c: char| !c.is_ascii_alphanumeric()) {
        if let Some(n) = tok.strip_prefix('o').and_then(|n| n.parse::<u32>().ok()) {
            max_addr = max_addr.max(n);
        }
    }
    let mut s = AbsHeapState::new(vec![]);
    s.next_addr = max_addr + 1;
    let value = |s: &mut AbsHeapState, v: &str| -> AbsValue {
        match v {
            "null" => AbsValue::null(),
            "unit" => AbsValue::unit(),
            "true" => AbsValue::Val(Value::Bool(true)),
            "false" => AbsValue::Val(Value::Bool(false)),
            "int" => AbsValue::IntVar(s.fresh_var()),
            "bool" => AbsValue::BoolVar(s.fresh_var()),
            _ => match v.strip_prefix('o').and_then(|n| n.parse::<u32>().ok()) {
                Some(n) => AbsValue::addr(Addr(n)),
                None => AbsValue::int(v.parse().unwrap_or_else(|_| panic!("bad value {v}"))),
            },
        }
    };
    let stack: Vec<AbsValue> = if cols[1] == "ε" || cols[1].is_empty() {
        vec![]
    } else {
        split_top(cols[1], ',').iter().map(|v| value(&mut s, v)).collect()
    };
    let regs: Vec<AbsValue> = split_top(cols[2], ',')
        .iter()
        .map(|r| value(&mut s, r.split_once('=').unwrap().1.trim()))
        .collect();
    for entry in split_top(cols[3], ',') {
        let (lhs, rhs) = entry.split_once('=').unwrap();
        let a = Addr(lhs.trim()[1..].parse().unwrap());
        let rhs = rhs.trim();
        let obj = match rhs.split_once('(') {
            Some((cn, rest)) => {
                let given: BTreeMap<String, String> = split_top(rest.trim_end_matches(')'), ',')
                    .iter()
                    .map(|f| {
                        let (k, v) = f.split_once('=').unwrap();
                        (k.trim().to_string(), v.trim().to_string())
                    })
                    .collect();
                let mut fields = Vec::new();
                for (k, ty) in p.field_table_domain(cn.trim()) {
                    let v = match given.get(&*k.name) {
                        Some(v) => value(&mut s, v),
                        None => fresh_field(&mut s, ty),
                    };
                    fields.push((k.clone(), v));
                }
                AbsObject::Instance { class: ident(cn.trim()), fields }
            }
            None => {
                let ty = p
                    .class_names()
                    .find(|c| c.eq_ignore_ascii_case(rhs))
                    .unwrap_or_else(|| panic!("unknown class {rhs}"))
                    .clone();
                AbsObject::ClassVar { id: s.fresh_var(), ty }
            }
        };
        s.heap.insert(a, obj);
    }
    if let Some(ann) = cols.get(4) {
        for pr in ann.split('}').filter(|x| !x.trim().is_empty()) {
            let pr = pr.trim().trim_start_matches('{');
            let (x, y) = pr.split_once(',').unwrap();
            let a = Addr(x.trim()[1..].parse().unwrap());
            let b = Addr(y.trim()[1..].parse().unwrap());
            s.annotate(a, b);
        }
    }
    s.frames = vec![AbsFrame { stack, regs, class: ident(class), method: ident(method), pc }];
    s
}

fn fresh_field(s: &mut AbsHeapState, ty: &TypeRef) -> AbsValue {
    match ty {
        TypeRef::Int => AbsValue::IntVar(s.fresh_var()),
        TypeRef::Bool => AbsValue::BoolVar(s.fresh_var()),
        TypeRef::Class(c) => {
            let c = c.clone();
            AbsValue::addr(s.new_classvar(&c, Default::default()))
        }
        _ => AbsValue::null(),
    }
}

pub fn strip_annotations(s: &AbsHeapState) -> AbsHeapState {
    let mut t = s.clone();
    t.annotations.clear();
    t
}

/// Deterministic choices read from a byte string supplied by proptest, so
/// that failing cases shrink.
pub struct Tape<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tape<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Tape { bytes, pos: 0 }
    }

    /// A number in `0..n`; zero once the tape runs out.
    pub fn pick(&mut self, n: usize) -> usize {
        if n <= 1 {
            return 0;
        }
        let b = self.bytes.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        b as usize % n
    }

    pub fn chance(&mut self, percent: usize) -> bool {
        self.pick(100) < percent
    }
}

pub const SHAPES: &str = "
Class:
 Name: List
 Classbody:
  Superclass: Object
  Fields:
   List next
   int val
  Methods:
   Method: unit m
    Parameters:
     Node b
    Methodbody:
     MaxStack: 1
     MaxVars: 1
     Bytecode:
      00: Push unit
      01: Return
Class:
 Name: Node
 Classbody:
  Superclass: Object
  Fields:
   Node left
   Node right
   int key
  Methods:
";

pub fn shapes() -> Program {
    load_program(SHAPES).unwrap()
}

/// A concrete state at `List.m@00` with up to `max_objs` objects. With
/// `acyclic` set, fields only point to objects created later.
pub fn gen_concrete(p: &Program, t: &mut Tape, max_objs: usize, acyclic: bool) -> JvmState {
    let n = 1 + t.pick(max_objs);
    let mut classes = Vec::new();
    for i in 0..n {
        // The first object is `this` and must be a List.
        classes.push(if i == 0 || t.chance(50) { "List" } else { "Node" });
    }
    let pick_ref = |t: &mut Tape, lo: usize, want: &str| -> Value {
        let cands: Vec<usize> = (lo..n).filter(|&j| classes[j] == want).collect();
        if cands.is_empty() || t.chance(30) {
            Value::Null
        } else {
            Value::Addr(Addr(cands[t.pick(cands.len())] as u32 + 1))
        }
    };
    let mut heap = BTreeMap::new();
    for (i, cn) in classes.iter().enumerate() {
        let mut o = HeapObject::new_default(p, cn);
        let keys: Vec<_> = p.field_table_domain(cn).to_vec();
        for (k, ty) in keys {
            let v = match &ty {
                TypeRef::Int => Value::int(t.pick(7) as i64 - 3),
                TypeRef::Class(c) => pick_ref(t, if acyclic { i + 1 } else { 0 }, c),
                _ => Value::Unit,
            };
            o.set(&k, v);
        }
        heap.insert(Addr(i as u32 + 1), o);
    }
    let b = pick_ref(t, 0, "Node");
    let cur = pick_ref(t, 0, "List");
    let top = if t.chance(50) { Value::int(t.pick(9) as i64 - 4) } else { cur.clone() };
    let mut s = JvmState {
        heap,
        frames: vec![Frame {
            stack: vec![top],
            regs: vec![Value::Addr(Addr(1)), b, cur],
            class: ident("List"),
            method: ident("m"),
            pc: 0,
        }],
    };
    jbc2ctrs::vm::gc_concrete(&mut s);
    s
}

fn live_addrs(s: &AbsHeapState) -> Vec<Addr> {
    s.live_addrs().into_iter().collect()
}

/// A random abstraction of `s`: instances become class variables, integers
/// become variables and annotations are dropped.
pub fn generalize(s: &AbsHeapState, t: &mut Tape) -> AbsHeapState {
    let mut g = s.clone();
    let addrs: Vec<Addr> = g.heap.keys().copied().collect();
    for a in addrs {
        if !g.heap.contains_key(&a) || !t.chance(25) {
            continue;
        }
        let ty = g.heap[&a].class_name().clone();
        let ty = if t.chance(20) { ident("Object") } else { ty };
        let id = g.fresh_var();
        g.heap.insert(a, AbsObject::ClassVar { id, ty });
    }
    let mut next = g.next_var;
    for v in g.all_values_mut() {
        if matches!(v, AbsValue::Val(Value::Int(_))) && t.chance(40) {
            *v = AbsValue::IntVar(next);
            next += 1;
        }
    }
    g.next_var = next;
    g.gc();
    let anns: Vec<(Addr, Addr)> = g.annotations.iter().copied().collect();
    for pr in anns {
        if t.chance(30) {
            g.annotations.remove(&pr);
        }
    }
    g
}

/// A random instance of `s` obtained by refinement steps and by fixing
/// integer variables.
pub fn specialize(p: &Program, s: &AbsHeapState, t: &mut Tape) -> AbstractState {
    let mut cur = s.clone();
    for _ in 0..t.pick(4) {
        let live = live_addrs(&cur);
        if live.is_empty() {
            break;
        }
        match t.pick(3) {
            0 => {
                let cvs: Vec<Addr> = live.iter().copied().filter(|a| cur.heap[a].is_classvar()).collect();
                if cvs.is_empty() {
                    continue;
                }
                let a = cvs[t.pick(cvs.len())];
                let outs = refine_class_instance(p, &cur, a);
                if outs.is_empty() {
                    continue;
                }
                cur = outs[t.pick(outs.len())].1.clone();
            }
            1 => {
                let mut pairs = Vec::new();
                for (i, &a) in live.iter().enumerate() {
                    for &b in &live[i + 1..] {
                        if !cur.is_annotated(a, b) {
                            pairs.push((a, b));
                        }
                    }
                }
                if pairs.is_empty() {
                    continue;
                }
                let (a, b) = pairs[t.pick(pairs.len())];
                let (x, y) = refine_unshare(p, &cur, a, b);
                let next = if t.chance(50) { x } else { y };
                match next {
                    AbstractState::State(st) => cur = st,
                    other => return other,
                }
            }
            _ => {
                let vars: BTreeSet<u32> = cur
                    .root_values()
                    .chain(cur.heap.values().flat_map(|o| o.field_values()))
                    .filter_map(|v| match v {
                        AbsValue::IntVar(x) => Some(*x),
                        _ => None,
                    })
                    .collect();
                if let Some(&x) = vars.iter().nth(t.pick(vars.len().max(1))) {
                    let mut vs = BTreeMap::new();
                    vs.insert(x, AbsValue::int(t.pick(5) as i64 - 2));
                    cur.substitute(&BTreeMap::new(), &vs);
                }
            }
        }
    }
    AbstractState::State(cur)
}

/// Random abstract state: a generalised abstraction of a concrete one.
pub fn gen_abstract(p: &Program, t: &mut Tape) -> AbsHeapState {
    let acyclic = t.bytes.len().is_multiple_of(2);
    let c = gen_concrete(p, t, 5, acyclic);
    let AbstractState::State(b) = jbc2ctrs::domain::beta(&c) else { unreachable!() };
    generalize(&b, t)
}

pub fn annotation_pairs(s: &AbsHeapState) -> BTreeSet<(Addr, Addr)> {
    s.annotations.iter().map(|&(a, b)| pair(a, b)).collect()
}
