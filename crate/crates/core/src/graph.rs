//! Graph view of a state: one root per stack or register slot, one node per
//! address and one implicit node per occurrence of any other value.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{Signed, Zero};

use crate::domain::{beta_unannotated, AbsHeapState, AbsObject, AbsValue, VarId};
use crate::program::{FieldKey, Ident};
use crate::vm::{Addr, JvmState, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    Stack(usize),
    Reg(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeLabel {
    Root { frame: usize, slot: Slot },
    Class(Ident),
    ClassVar(Ident, VarId),
    Value(Value),
    IntVar(VarId),
    BoolVar(VarId),
}

impl NodeLabel {
    /// Contribution of the node to the size measure.
    pub fn weight(&self) -> BigUint {
        match self {
            NodeLabel::Value(Value::Int(z)) => z.abs().to_biguint().unwrap_or_default(),
            NodeLabel::Root { .. } => BigUint::zero(),
            _ => BigUint::from(1u32),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct StateGraph {
    pub labels: Vec<NodeLabel>,
    /// Ordered successors with the field label (`None` from roots).
    pub succ: Vec<Vec<(usize, Option<FieldKey>)>>,
    pub roots: Vec<usize>,
    /// Annotated node pairs.
    pub annotations: Vec<(usize, usize)>,
    pub address_nodes: BTreeMap<Addr, usize>,
}

impl StateGraph {
    fn add(&mut self, l: NodeLabel) -> usize {
        self.labels.push(l);
        self.succ.push(Vec::new());
        self.labels.len() - 1
    }

    fn value_node(&mut self, v: &AbsValue) -> usize {
        match v {
            AbsValue::Val(Value::Addr(a)) => self.address_nodes[a],
            AbsValue::Val(x) => self.add(NodeLabel::Value(x.clone())),
            AbsValue::IntVar(i) => self.add(NodeLabel::IntVar(*i)),
            AbsValue::BoolVar(b) => self.add(NodeLabel::BoolVar(*b)),
        }
    }

    pub fn of_abstract(s: &AbsHeapState) -> StateGraph {
        let mut g = StateGraph::default();
        for (a, o) in &s.heap {
            let l = match o {
                AbsObject::Instance { class, .. } => NodeLabel::Class(class.clone()),
                AbsObject::ClassVar { id, ty } => NodeLabel::ClassVar(ty.clone(), *id),
            };
            let n = g.add(l);
            g.address_nodes.insert(*a, n);
        }
        for (a, o) in &s.heap {
            if let AbsObject::Instance { fields, .. } = o {
                let from = g.address_nodes[a];
                for (k, v) in fields {
                    let to = g.value_node(v);
                    g.succ[from].push((to, Some(k.clone())));
                }
            }
        }
        for (fi, f) in s.frames.iter().enumerate() {
            let slots = f
                .stack
                .iter()
                .enumerate()
                .map(|(i, v)| (Slot::Stack(i), v))
                .chain(f.regs.iter().enumerate().map(|(i, v)| (Slot::Reg(i), v)));
            for (slot, v) in slots {
                let r = g.add(NodeLabel::Root { frame: fi, slot });
                let to = g.value_node(v);
                g.succ[r].push((to, None));
                g.roots.push(r);
            }
        }
        for (a, b) in &s.annotations {
            if let (Some(x), Some(y)) = (g.address_nodes.get(a), g.address_nodes.get(b)) {
                g.annotations.push((*x, *y));
            }
        }
        g
    }

    pub fn of_concrete(s: &JvmState) -> StateGraph {
        StateGraph::of_abstract(&beta_unannotated(s))
    }

    /// Sum over roots `u` and simple paths `u ->+ v` of the weight of `v`.
    pub fn size(&self) -> BigUint {
        let mut total = BigUint::zero();
        let mut on_path = vec![false; self.labels.len()];
        for &r in &self.roots {
            on_path[r] = true;
            for (c, _) in &self.succ[r] {
                self.paths_from(*c, &mut on_path, &mut total);
            }
            on_path[r] = false;
        }
        total
    }

    fn paths_from(&self, v: usize, on_path: &mut [bool], total: &mut BigUint) {
        if on_path[v] {
            return;
        }
        *total += self.labels[v].weight();
        on_path[v] = true;
        for (c, _) in &self.succ[v] {
            self.paths_from(*c, on_path, total);
        }
        on_path[v] = false;
    }
}
