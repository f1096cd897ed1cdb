//! Concrete small-step semantics.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use thiserror::Error;

use crate::graph::StateGraph;
use crate::program::{FieldKey, Ident, Instruction, Literal, Program, TypeRef};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Addr(pub u32);

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Int(BigInt),
    Unit,
    Null,
    Addr(Addr),
}

impl Value {
    pub fn int(z: i64) -> Value {
        Value::Int(BigInt::from(z))
    }

    pub fn from_literal(l: &Literal) -> Value {
        match l {
            Literal::Unit => Value::Unit,
            Literal::Null => Value::Null,
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Int(z) => Value::Int(z.clone()),
        }
    }

    /// Default value of a field of the given type.
    pub fn default_for(t: &TypeRef) -> Value {
        match t {
            TypeRef::Int => Value::int(0),
            TypeRef::Bool => Value::Bool(false),
            TypeRef::Unit => Value::Unit,
            TypeRef::NullT | TypeRef::Class(_) => Value::Null,
        }
    }

    pub fn as_addr(&self) -> Option<Addr> {
        match self {
            Value::Addr(a) => Some(*a),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(z) => write!(f, "{z}"),
            Value::Unit => f.write_str("unit"),
            Value::Null => f.write_str("null"),
            Value::Addr(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeapObject {
    pub class: Ident,
    pub fields: Vec<(FieldKey, Value)>,
}

impl HeapObject {
    pub fn new_default(p: &Program, cn: &str) -> HeapObject {
        let fields = p
            .field_table_domain(cn)
            .iter()
            .map(|(k, t)| (k.clone(), Value::default_for(t)))
            .collect();
        HeapObject { class: crate::program::ident(cn), fields }
    }

    pub fn get(&self, key: &FieldKey) -> Option<&Value> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn set(&mut self, key: &FieldKey, v: Value) -> bool {
        match self.fields.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => {
                slot.1 = v;
                true
            }
            None => false,
        }
    }
}

/// A method activation. `stack` is bottom first, its last element is the top.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub stack: Vec<Value>,
    pub regs: Vec<Value>,
    pub class: Ident,
    pub method: Ident,
    pub pc: usize,
}

/// Heap plus frame list; `frames[0]` is the active frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JvmState {
    pub heap: BTreeMap<Addr, HeapObject>,
    pub frames: Vec<Frame>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FailureReason {
    #[error("null dereference")]
    NullDeref,
    #[error("cast error")]
    CastError,
    #[error("fuel exhausted")]
    FuelExhausted,
    #[error("stuck: {0}")]
    Stuck(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepResult {
    Next(JvmState),
    Halted(Value),
    Failure(FailureReason),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum StateError {
    #[error("entry method `{0}` not found")]
    NoEntry(String),
    #[error("expected {expected} argument(s) including `this`, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("argument {index} has the wrong type: expected {expected}")]
    ArgType { index: usize, expected: String },
    #[error("`this` must be an object")]
    NullThis,
    #[error("literal: {0}")]
    Literal(String),
}

impl JvmState {
    pub fn top(&self) -> &Frame {
        &self.frames[0]
    }

    pub fn alloc_addr(&self) -> Addr {
        Addr(self.heap.keys().next_back().map_or(1, |a| a.0 + 1))
    }

    pub fn location(&self) -> Vec<(Ident, Ident, usize)> {
        self.frames.iter().map(|f| (f.class.clone(), f.method.clone(), f.pc)).collect()
    }

    /// Dynamic type of a value.
    pub fn type_of(&self, v: &Value) -> TypeRef {
        match v {
            Value::Bool(_) => TypeRef::Bool,
            Value::Int(_) => TypeRef::Int,
            Value::Unit => TypeRef::Unit,
            Value::Null => TypeRef::NullT,
            Value::Addr(a) => TypeRef::Class(self.heap[a].class.clone()),
        }
    }
}

impl fmt::Display for JvmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fr in &self.frames {
            let stk: Vec<String> = fr.stack.iter().map(|v| v.to_string()).collect();
            let regs: Vec<String> = fr.regs.iter().map(|v| v.to_string()).collect();
            writeln!(
                f,
                "{}.{} @{:02} | [{}] | [{}]",
                fr.class,
                fr.method,
                fr.pc,
                stk.join(", "),
                regs.join(", ")
            )?;
        }
        for (a, o) in &self.heap {
            let fs: Vec<String> = o.fields.iter().map(|(k, v)| format!("{}={v}", k.name)).collect();
            writeln!(f, "  {a} = {}({})", o.class, fs.join(", "))?;
        }
        Ok(())
    }
}

/// Builds the entry state. `args[0]` describes `this`, the rest the
/// parameters.
pub fn initial_state(
    p: &Program,
    entry_class: &str,
    entry_method: &str,
    heap: BTreeMap<Addr, HeapObject>,
    args: &[Value],
) -> Result<JvmState, StateError> {
    let (def, m) = p
        .resolve_method(entry_class, entry_method)
        .ok_or_else(|| StateError::NoEntry(format!("{entry_class}.{entry_method}")))?;
    if args.len() != m.params.len() + 1 {
        return Err(StateError::Arity { expected: m.params.len() + 1, got: args.len() });
    }
    let st = JvmState { heap, frames: vec![] };
    match &args[0] {
        Value::Addr(a) if p.is_subclass(&st.heap[a].class, entry_class) => {}
        Value::Null => return Err(StateError::NullThis),
        _ => return Err(StateError::ArgType { index: 0, expected: entry_class.to_string() }),
    }
    for (i, (_, t)) in m.params.iter().enumerate() {
        let vt = st.type_of(&args[i + 1]);
        if !p.is_subtype(&vt, t) || (vt == TypeRef::Unit && *t != TypeRef::Unit) {
            return Err(StateError::ArgType { index: i + 1, expected: t.to_string() });
        }
    }
    let mut regs = args.to_vec();
    regs.extend(std::iter::repeat_n(Value::Unit, m.max_locals));
    let frame = Frame { stack: vec![], regs, class: def, method: m.name.clone(), pc: 0 };
    Ok(JvmState { heap: st.heap, frames: vec![frame] })
}

fn stuck(msg: &str) -> StepResult {
    StepResult::Failure(FailureReason::Stuck(msg.to_string()))
}

/// One transition.
pub fn step(p: &Program, s: &JvmState) -> StepResult {
    let Some(fr) = s.frames.first() else {
        return stuck("no frame");
    };
    let Some(m) = p.method(&fr.class, &fr.method) else {
        return stuck("unknown method");
    };
    let Some(ins) = m.body.get(fr.pc) else {
        return stuck("pc out of range");
    };
    let mut t = s.clone();
    let f = &mut t.frames[0];
    macro_rules! pop {
        () => {
            match f.stack.pop() {
                Some(v) => v,
                None => return stuck("stack underflow"),
            }
        };
    }
    use Instruction::*;
    match ins {
        Load(n) => {
            let Some(v) = f.regs.get(*n).cloned() else { return stuck("bad register") };
            f.stack.push(v);
            f.pc += 1;
        }
        Store(n) => {
            let v = pop!();
            let Some(slot) = f.regs.get_mut(*n) else { return stuck("bad register") };
            *slot = v;
            f.pc += 1;
        }
        Push(l) => {
            f.stack.push(Value::from_literal(l));
            f.pc += 1;
        }
        Pop => {
            pop!();
            f.pc += 1;
        }
        IAdd | ISub | CmpGeq | CmpEq | CmpNeq | And | Or => {
            let v1 = pop!();
            let v2 = pop!();
            let r = match (ins, &v2, &v1) {
                (IAdd, Value::Int(a), Value::Int(b)) => Value::Int(a + b),
                (ISub, Value::Int(a), Value::Int(b)) => Value::Int(a - b),
                (CmpGeq, Value::Int(a), Value::Int(b)) => Value::Bool(a >= b),
                (And, Value::Bool(a), Value::Bool(b)) => Value::Bool(*a && *b),
                (Or, Value::Bool(a), Value::Bool(b)) => Value::Bool(*a || *b),
                (CmpEq, a, b) => Value::Bool(a == b),
                (CmpNeq, a, b) => Value::Bool(a != b),
                _ => return stuck("operand types"),
            };
            f.stack.push(r);
            f.pc += 1;
        }
        Not => match pop!() {
            Value::Bool(b) => {
                f.stack.push(Value::Bool(!b));
                f.pc += 1;
            }
            _ => return stuck("operand types"),
        },
        Goto(i) => {
            let tgt = f.pc as i64 + i;
            if tgt < 0 {
                return stuck("jump target");
            }
            f.pc = tgt as usize;
        }
        IfFalse(n) => match pop!() {
            Value::Bool(false) => f.pc += n,
            Value::Bool(true) => f.pc += 1,
            _ => return stuck("operand types"),
        },
        New(cn) => {
            if !p.has_class(cn) {
                return stuck("unknown class");
            }
            let a = s.alloc_addr();
            f.stack.push(Value::Addr(a));
            f.pc += 1;
            t.heap.insert(a, HeapObject::new_default(p, cn));
        }
        Getfield(fname, cn) => {
            let key = FieldKey { class: cn.clone(), name: fname.clone() };
            match pop!() {
                Value::Null => return StepResult::Failure(FailureReason::NullDeref),
                Value::Addr(a) => {
                    let Some(v) = s.heap.get(&a).and_then(|o| o.get(&key)).cloned() else {
                        return stuck("no such field");
                    };
                    f.stack.push(v);
                    f.pc += 1;
                }
                _ => return stuck("operand types"),
            }
        }
        Putfield(fname, cn) => {
            let key = FieldKey { class: cn.clone(), name: fname.clone() };
            let v = pop!();
            match pop!() {
                Value::Null => return StepResult::Failure(FailureReason::NullDeref),
                Value::Addr(a) => {
                    f.pc += 1;
                    let ok = t.heap.get_mut(&a).is_some_and(|o| o.set(&key, v));
                    if !ok {
                        return stuck("no such field");
                    }
                }
                _ => return stuck("operand types"),
            }
        }
        Checkcast(cn) => match f.stack.last() {
            Some(Value::Null) => f.pc += 1,
            Some(Value::Addr(a)) => {
                if p.is_subclass(&s.heap[a].class, cn) {
                    f.pc += 1;
                } else {
                    return StepResult::Failure(FailureReason::CastError);
                }
            }
            _ => return stuck("operand types"),
        },
        Invoke(mn, n) => {
            if f.stack.len() < n + 1 {
                return stuck("stack underflow");
            }
            let recv_pos = f.stack.len() - 1 - n;
            let recv = f.stack[recv_pos].clone();
            let a = match recv {
                Value::Null => return StepResult::Failure(FailureReason::NullDeref),
                Value::Addr(a) => a,
                _ => return stuck("operand types"),
            };
            let Some((def, callee)) = p.resolve_method(&s.heap[&a].class, mn) else {
                return stuck("method not found");
            };
            let mut regs: Vec<Value> = f.stack[recv_pos..].to_vec();
            regs.extend(std::iter::repeat_n(Value::Unit, callee.max_locals));
            let nf = Frame { stack: vec![], regs, class: def, method: callee.name.clone(), pc: 0 };
            t.frames.insert(0, nf);
        }
        Return => {
            let v = pop!();
            if t.frames.len() == 1 {
                return StepResult::Halted(v);
            }
            t.frames.remove(0);
            let caller = &mut t.frames[0];
            let Some(cm) = p.method(&caller.class, &caller.method) else { return stuck("unknown method") };
            let Some(Invoke(_, n)) = cm.body.get(caller.pc) else { return stuck("return without invoke") };
            let keep = caller.stack.len() - (n + 1);
            caller.stack.truncate(keep);
            caller.stack.push(v);
            caller.pc += 1;
        }
    }
    if matches!(ins, Putfield(..) | Store(_) | Pop | Return) {
        gc_concrete(&mut t);
    }
    StepResult::Next(t)
}

/// Drops objects unreachable from the frames.
pub fn gc_concrete(s: &mut JvmState) {
    let mut live = std::collections::BTreeSet::new();
    let mut work: Vec<Addr> = s
        .frames
        .iter()
        .flat_map(|f| f.stack.iter().chain(f.regs.iter()))
        .filter_map(|v| v.as_addr())
        .collect();
    while let Some(a) = work.pop() {
        if live.insert(a) {
            if let Some(o) = s.heap.get(&a) {
                work.extend(o.fields.iter().filter_map(|(_, v)| v.as_addr()));
            }
        }
    }
    s.heap.retain(|a, _| live.contains(a));
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// `Halted` or `Failure`.
    pub result: StepResult,
    /// Number of `Next` transitions taken.
    pub steps: usize,
    /// Visited states `s_0 .. s_steps` when requested.
    pub trace: Vec<JvmState>,
    pub last: JvmState,
}

/// Runs until halt, failure or until `fuel` transitions were taken.
pub fn run(p: &Program, s0: &JvmState, fuel: usize, keep_trace: bool) -> RunOutcome {
    let mut cur = s0.clone();
    let mut trace = Vec::new();
    if keep_trace {
        trace.push(cur.clone());
    }
    let mut steps = 0;
    loop {
        if steps >= fuel {
            return RunOutcome { result: StepResult::Failure(FailureReason::FuelExhausted), steps, trace, last: cur };
        }
        match step(p, &cur) {
            StepResult::Next(n) => {
                steps += 1;
                if keep_trace {
                    trace.push(n.clone());
                }
                cur = n;
            }
            other => return RunOutcome { result: other, steps, trace, last: cur },
        }
    }
}

/// Path-sum size of the state graph, plus one.
pub fn state_size(s: &JvmState) -> BigUint {
    StateGraph::of_concrete(s).size() + 1u32
}
