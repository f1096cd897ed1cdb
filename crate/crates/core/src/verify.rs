//! Lightweight well-formedness checks on bytecode.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::program::{FieldKey, Ident, Instruction, MethodDecl, Program};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiagnosticKind {
    StackHeight,
    JumpTarget,
    FallOffEnd,
    UninitialisedRegister,
    BadRegister,
    UnresolvedField,
    UnresolvedMethod,
    UnknownClass,
    Recursion,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub class: Ident,
    pub method: Ident,
    pub pc: Option<usize>,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pc {
            Some(pc) => write!(f, "{}.{} @{pc:02}: {}", self.class, self.method, self.message),
            None => write!(f, "{}.{}: {}", self.class, self.method, self.message),
        }
    }
}

/// Stack demand and effect: (operands needed, height after).
fn stack_effect(ins: &Instruction) -> (usize, isize) {
    use Instruction::*;
    match ins {
        Load(_) | Push(_) | New(_) => (0, 1),
        Store(_) | Pop => (1, -1),
        IAdd | ISub | CmpGeq | CmpEq | CmpNeq | And | Or => (2, -1),
        Not | Getfield(..) | Checkcast(_) => (1, 0),
        Goto(_) => (0, 0),
        IfFalse(_) => (1, -1),
        Putfield(..) => (2, -2),
        Invoke(_, n) => (n + 1, -(*n as isize)),
        Return => (1, -1),
    }
}

fn successors(pc: usize, ins: &Instruction) -> Vec<i64> {
    match ins {
        Instruction::Goto(i) => vec![pc as i64 + i],
        Instruction::IfFalse(n) => vec![pc as i64 + 1, pc as i64 + *n as i64],
        Instruction::Return => vec![],
        _ => vec![pc as i64 + 1],
    }
}

/// Dataflow over the method body. Returns the unique stack height at each
/// reachable pc, or `None` for unreachable ones, plus any diagnostics.
pub fn stack_heights(class: &Ident, m: &MethodDecl) -> (Vec<Option<usize>>, Vec<Diagnostic>) {
    let n = m.body.len();
    let mut heights: Vec<Option<usize>> = vec![None; n];
    let mut assigned: Vec<Option<BTreeSet<usize>>> = vec![None; n];
    let mut diags = Vec::new();
    let mut report = |pc: Option<usize>, kind: DiagnosticKind, message: String| {
        let d = Diagnostic { class: class.clone(), method: m.name.clone(), pc, kind, message };
        if !diags.contains(&d) {
            diags.push(d);
        }
    };
    if n == 0 {
        report(None, DiagnosticKind::FallOffEnd, "empty method body".into());
        return (heights, diags);
    }
    let regs = m.register_count();
    let init: BTreeSet<usize> = (0..=m.params.len()).collect();
    heights[0] = Some(0);
    assigned[0] = Some(init);
    let mut work = vec![0usize];
    while let Some(pc) = work.pop() {
        let h = heights[pc].unwrap();
        let mut defs = assigned[pc].clone().unwrap();
        let ins = &m.body[pc];
        let (need, delta) = stack_effect(ins);
        if h < need {
            report(Some(pc), DiagnosticKind::StackHeight, format!("`{ins}` needs {need} operand(s), stack has {h}"));
            continue;
        }
        let after = (h as isize + delta) as usize;
        if after > m.max_stack {
            report(Some(pc), DiagnosticKind::StackHeight, format!("stack height {after} exceeds MaxStack {}", m.max_stack));
        }
        match ins {
            Instruction::Load(r) => {
                if *r >= regs {
                    report(Some(pc), DiagnosticKind::BadRegister, format!("register {r} out of range"));
                } else if !defs.contains(r) {
                    report(Some(pc), DiagnosticKind::UninitialisedRegister, format!("register {r} read before written"));
                }
            }
            Instruction::Store(r) => {
                if *r >= regs {
                    report(Some(pc), DiagnosticKind::BadRegister, format!("register {r} out of range"));
                }
                defs.insert(*r);
            }
            Instruction::Return if h != 1 => {
                report(Some(pc), DiagnosticKind::StackHeight, format!("Return with stack height {h}"));
            }
            _ => {}
        }
        for tgt in successors(pc, ins) {
            if tgt < 0 || tgt as usize >= n {
                let kind = if tgt as usize == n && !matches!(ins, Instruction::Goto(_) | Instruction::IfFalse(_)) {
                    DiagnosticKind::FallOffEnd
                } else {
                    DiagnosticKind::JumpTarget
                };
                report(Some(pc), kind, format!("control transfer to {tgt} outside 0..{n}"));
                continue;
            }
            let t = tgt as usize;
            match heights[t] {
                None => {
                    heights[t] = Some(after);
                    assigned[t] = Some(defs.clone());
                    work.push(t);
                }
                Some(h2) if h2 != after => {
                    report(Some(t), DiagnosticKind::StackHeight, format!("inconsistent stack heights {h2} and {after}"));
                }
                Some(_) => {
                    let old = assigned[t].as_ref().unwrap();
                    let meet: BTreeSet<usize> = old.intersection(&defs).copied().collect();
                    if &meet != old {
                        assigned[t] = Some(meet);
                        work.push(t);
                    }
                }
            }
        }
    }
    (heights, diags)
}

/// All diagnostics for the program; empty means well formed.
pub fn check_wellformed(p: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut calls: BTreeMap<(Ident, Ident), BTreeSet<(Ident, Ident)>> = BTreeMap::new();
    let all_classes: Vec<Ident> = p.class_names().cloned().collect();
    for c in p.declared_classes() {
        for m in &c.methods {
            let (_, diags) = stack_heights(&c.name, m);
            out.extend(diags);
            let mut report = |pc: usize, kind: DiagnosticKind, message: String| {
                out.push(Diagnostic { class: c.name.clone(), method: m.name.clone(), pc: Some(pc), kind, message });
            };
            let node = (c.name.clone(), m.name.clone());
            calls.entry(node.clone()).or_default();
            for (pc, ins) in m.body.iter().enumerate() {
                match ins {
                    Instruction::Getfield(f, cn) | Instruction::Putfield(f, cn) => {
                        if !p.has_class(cn) {
                            report(pc, DiagnosticKind::UnknownClass, format!("unknown class `{cn}`"));
                        } else if p.field_type(&FieldKey { class: cn.clone(), name: f.clone() }).is_none() {
                            report(pc, DiagnosticKind::UnresolvedField, format!("class `{cn}` declares no field `{f}`"));
                        }
                    }
                    Instruction::New(cn) | Instruction::Checkcast(cn) if !p.has_class(cn) => {
                        report(pc, DiagnosticKind::UnknownClass, format!("unknown class `{cn}`"));
                    }
                    Instruction::Invoke(mn, n) => {
                        let targets: Vec<(Ident, Ident)> = all_classes
                            .iter()
                            .filter(|k| p.method(k, mn).is_some_and(|md| md.params.len() == *n))
                            .map(|k| (k.clone(), mn.clone()))
                            .collect();
                        if targets.is_empty() {
                            report(pc, DiagnosticKind::UnresolvedMethod, format!("no method `{mn}` with {n} parameter(s)"));
                        }
                        calls.entry(node.clone()).or_default().extend(targets);
                    }
                    _ => {}
                }
            }
        }
    }
    // The call graph over-approximates dispatch by method name and arity.
    let mut state: BTreeMap<(Ident, Ident), u8> = BTreeMap::new();
    fn dfs(
        n: &(Ident, Ident),
        calls: &BTreeMap<(Ident, Ident), BTreeSet<(Ident, Ident)>>,
        state: &mut BTreeMap<(Ident, Ident), u8>,
        out: &mut Vec<Diagnostic>,
    ) {
        state.insert(n.clone(), 1);
        if let Some(succ) = calls.get(n) {
            for s in succ {
                match state.get(s).copied().unwrap_or(0) {
                    0 => dfs(s, calls, state, out),
                    1 => out.push(Diagnostic {
                        class: s.0.clone(),
                        method: s.1.clone(),
                        pc: None,
                        kind: DiagnosticKind::Recursion,
                        message: format!("recursive call cycle through {}.{}", n.0, n.1),
                    }),
                    _ => {}
                }
            }
        }
        state.insert(n.clone(), 2);
    }
    let nodes: Vec<_> = calls.keys().cloned().collect();
    for n in nodes {
        if state.get(&n).copied().unwrap_or(0) == 0 {
            dfs(&n, &calls, &mut state, &mut out);
        }
    }
    out
}
