//! Computation graphs: construction with widening at loop heads, replay of
//! concrete runs and export.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::constraint::Formula;
use crate::domain::{
    beta, is_instance, join, state_morphism, AbsHeapState, AbsObject, AbsValue, AbstractState, Location,
};
use crate::program::{Program, ProgramError};
use crate::shape::{tags_compatible, Assumptions, ShapeError};
use crate::symex::{expand, Expansion, RefineKind, SymStep, SymexError};
use crate::vm::{FailureReason, JvmState};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Inner,
    Terminal(AbsValue),
    Failed(FailureReason),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub state: AbstractState,
    pub kind: NodeKind,
    /// Tree parent; `None` for the entry node.
    pub parent: Option<NodeId>,
    /// Produced by widening.
    pub widened: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EdgeLabel {
    Eval(Option<Formula>),
    Refine(RefineKind),
    Instance,
}

impl EdgeLabel {
    pub fn short(&self) -> String {
        match self {
            EdgeLabel::Eval(None) => String::new(),
            EdgeLabel::Eval(Some(c)) => c.to_string(),
            EdgeLabel::Refine(k) => k.to_string(),
            EdgeLabel::Instance => "ins".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub label: EdgeLabel,
}

#[derive(Clone, Debug)]
pub struct CGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub entry: NodeId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_nodes: usize,
    pub max_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_nodes: 10_000, max_depth: 100_000 }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("node limit {0} exceeded")]
    NodeLimit(usize),
    #[error("depth limit {0} exceeded")]
    DepthLimit(usize),
    #[error("widening at {0} produced Top")]
    WideningTop(String),
    #[error("join at {0} does not cover the joined state")]
    WideningStuck(String),
    #[error(transparent)]
    Symex(#[from] SymexError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Program(#[from] ProgramError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("entry node does not cover the initial state")]
    EntryMismatch,
    #[error("no witness path for concrete step {step}")]
    NoWitness { step: usize },
}

/// Entry state for `Class.method`; parameters and `this` become abstract
/// variables of their declared types, tagged per the assumptions.
pub fn initial_abstract_state(
    p: &Program,
    entry: &str,
    assumptions: &Assumptions,
    this_nonnull: bool,
) -> Result<AbsHeapState, BuildError> {
    let (def, m) = p.entry(entry)?;
    let class = entry.rsplit_once('.').map(|(c, _)| c).unwrap_or(&def);
    let (by_reg, regions) = assumptions.regions(class, m)?;
    let mut s = AbsHeapState::new(vec![]);
    s.regions = Arc::new(regions);
    let mut regs = Vec::new();
    let this_tag = assumptions.root_tag(m, 0, &by_reg);
    let cls = crate::program::ident(class);
    if this_nonnull {
        let a = s.fresh_addr();
        let mut fields = Vec::new();
        for (k, t) in p.field_table_domain(class) {
            fields.push((k.clone(), s.fresh_value(t, this_tag)));
        }
        s.heap.insert(a, AbsObject::Instance { class: cls, fields });
        s.set_tag(a, this_tag);
        regs.push(AbsValue::addr(a));
    } else {
        regs.push(AbsValue::addr(s.new_classvar(&cls, this_tag)));
    }
    for (i, (_, t)) in m.params.iter().enumerate() {
        let tag = assumptions.root_tag(m, i + 1, &by_reg);
        regs.push(s.fresh_value(t, tag));
    }
    regs.extend(std::iter::repeat_n(AbsValue::unit(), m.max_locals));
    s.frames.push(crate::domain::AbsFrame { stack: vec![], regs, class: def, method: m.name.clone(), pc: 0 });
    Ok(s)
}

struct BNode {
    node: Node,
    alive: bool,
    processed: bool,
    instance_leaf: bool,
    /// Produced by a refinement edge; expanded without instance checks or
    /// widening.
    refined: bool,
    depth: usize,
    out: Vec<(NodeId, EdgeLabel)>,
    children: Vec<NodeId>,
}

struct Builder<'p> {
    p: &'p Program,
    limits: Limits,
    nodes: Vec<BNode>,
    by_loc: HashMap<Location, Vec<NodeId>>,
    work: Vec<NodeId>,
}

impl Builder<'_> {
    fn live_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.alive).count()
    }

    fn add(&mut self, st: AbsHeapState, parent: Option<NodeId>, widened: bool, refined: bool) -> Result<NodeId, BuildError> {
        let depth = parent.map_or(0, |p| self.nodes[p].depth + 1);
        if depth > self.limits.max_depth {
            return Err(BuildError::DepthLimit(self.limits.max_depth));
        }
        if self.live_count() >= self.limits.max_nodes {
            return Err(BuildError::NodeLimit(self.limits.max_nodes));
        }
        let id = self.nodes.len();
        self.by_loc.entry(st.location()).or_default().push(id);
        self.nodes.push(BNode {
            node: Node { state: AbstractState::State(st), kind: NodeKind::Inner, parent, widened },
            alive: true,
            processed: false,
            instance_leaf: false,
            refined,
            depth,
            out: Vec::new(),
            children: Vec::new(),
        });
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        Ok(id)
    }

    fn state(&self, id: NodeId) -> &AbsHeapState {
        self.nodes[id].node.state.as_state().expect("builder nodes hold proper states")
    }

    fn delete_subtree_of(&mut self, w: NodeId) {
        let mut dead = BTreeSet::new();
        let mut stack: Vec<NodeId> = std::mem::take(&mut self.nodes[w].children);
        while let Some(x) = stack.pop() {
            if dead.insert(x) {
                stack.extend(self.nodes[x].children.iter().copied());
            }
        }
        for &x in &dead {
            self.nodes[x].alive = false;
            let loc = self.state(x).location();
            if let Some(v) = self.by_loc.get_mut(&loc) {
                v.retain(|y| *y != x);
            }
        }
        self.nodes[w].out.clear();
        self.nodes[w].node.kind = NodeKind::Inner;
        // Requeue nodes whose instance edges pointed into the removed part.
        for i in 0..self.nodes.len() {
            if !self.nodes[i].alive {
                continue;
            }
            if self.nodes[i].out.iter().any(|(t, _)| dead.contains(t)) {
                self.nodes[i].out.clear();
                self.nodes[i].instance_leaf = false;
                self.nodes[i].processed = false;
                self.work.push(i);
            }
        }
    }

    fn ancestor_at(&self, u: NodeId, loc: &Location) -> Option<NodeId> {
        let mut cur = self.nodes[u].node.parent;
        while let Some(w) = cur {
            if !self.nodes[w].refined && &self.state(w).location() == loc {
                return Some(w);
            }
            cur = self.nodes[w].node.parent;
        }
        None
    }

    fn process(&mut self, u: NodeId) -> Result<(), BuildError> {
        let st = self.state(u).clone();
        if self.nodes[u].refined {
            return self.expand_node(u, &st);
        }
        let loc = st.location();
        let widening_parent = if self.nodes[u].node.widened { self.nodes[u].node.parent } else { None };
        let candidates: Vec<NodeId> = self.by_loc.get(&loc).cloned().unwrap_or_default();
        for w in candidates {
            if w == u || Some(w) == widening_parent || !self.nodes[w].alive || self.nodes[w].instance_leaf {
                continue;
            }
            let ws = self.state(w);
            if let Some(m) = state_morphism(self.p, &st, ws) {
                if tags_compatible(&st, ws, &m) {
                    self.nodes[u].out = vec![(w, EdgeLabel::Instance)];
                    self.nodes[u].instance_leaf = true;
                    return Ok(());
                }
            }
        }
        if !self.nodes[u].node.widened {
            if let Some(w) = self.ancestor_at(u, &loc) {
                let joined = join(self.p, &self.nodes[w].node.state, &AbstractState::State(st.clone()));
                let AbstractState::State(j) = joined else {
                    return Err(BuildError::WideningTop(format!("{loc:?}")));
                };
                // Guard against a join that does not cover `u`; widening would never settle.
                if state_morphism(self.p, &st, &j).is_none() {
                    return Err(BuildError::WideningStuck(format!("{loc:?}")));
                }
                self.delete_subtree_of(w);
                if self.nodes[w].node.widened {
                    self.nodes[w].node.state = AbstractState::State(j);
                    self.nodes[w].processed = false;
                    self.work.push(w);
                } else {
                    let jid = self.add(j, Some(w), true, false)?;
                    self.nodes[w].out = vec![(jid, EdgeLabel::Instance)];
                    self.work.push(jid);
                }
                return Ok(());
            }
        }
        self.expand_node(u, &st)
    }

    fn expand_node(&mut self, u: NodeId, st: &AbsHeapState) -> Result<(), BuildError> {
        match expand(self.p, st)? {
            Expansion::Refine(list) => {
                let mut ids = Vec::new();
                for (k, t) in list {
                    let id = self.add(t, Some(u), false, true)?;
                    self.nodes[u].out.push((id, EdgeLabel::Refine(k)));
                    ids.push(id);
                }
                self.work.extend(ids.into_iter().rev());
            }
            Expansion::Step(SymStep::Eval(t, c)) => {
                let id = self.add(t, Some(u), false, false)?;
                self.nodes[u].out.push((id, EdgeLabel::Eval(c)));
                self.work.push(id);
            }
            Expansion::Step(SymStep::Terminal(v)) => self.nodes[u].node.kind = NodeKind::Terminal(v),
            Expansion::Step(SymStep::Failed(r)) => self.nodes[u].node.kind = NodeKind::Failed(r),
        }
        Ok(())
    }

    fn finish(self) -> CGraph {
        let mut map = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.alive {
                map[i] = nodes.len();
                nodes.push(n.node.clone());
            }
        }
        for n in nodes.iter_mut() {
            n.parent = n.parent.map(|p| map[p]);
        }
        let mut edges = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.alive {
                continue;
            }
            for (t, l) in &n.out {
                edges.push(Edge { from: map[i], to: map[*t], label: l.clone() });
            }
        }
        CGraph { nodes, edges, entry: 0 }
    }
}

/// Builds the computation graph from an entry state.
pub fn build_graph(p: &Program, s0: AbsHeapState, limits: Limits) -> Result<CGraph, BuildError> {
    let mut b = Builder { p, limits, nodes: Vec::new(), by_loc: HashMap::new(), work: Vec::new() };
    let root = b.add(s0, None, false, false)?;
    b.work.push(root);
    while let Some(u) = b.work.pop() {
        if !b.nodes[u].alive || b.nodes[u].processed {
            continue;
        }
        b.nodes[u].processed = true;
        b.process(u)?;
    }
    Ok(b.finish())
}

impl CGraph {
    pub fn out_edges(&self, n: NodeId) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.from == n)
    }

    pub fn symbol(n: NodeId) -> String {
        format!("f_{n}")
    }

    /// Longest path of the shape `ins* ref* eval` starting anywhere.
    pub fn static_k(&self) -> usize {
        let n = self.nodes.len();
        let mut adj: Vec<Vec<&Edge>> = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.from].push(e);
        }
        // r[x]: longest `ref* eval` path from x.
        let mut r: Vec<Option<Option<usize>>> = vec![None; n];
        fn ref_len(x: usize, adj: &[Vec<&Edge>], memo: &mut Vec<Option<Option<usize>>>) -> Option<usize> {
            if let Some(v) = memo[x] {
                return v;
            }
            memo[x] = Some(None);
            let mut best = None;
            for e in &adj[x] {
                let cand = match e.label {
                    EdgeLabel::Eval(_) => Some(1),
                    EdgeLabel::Refine(_) => ref_len(e.to, adj, memo).map(|k| k + 1),
                    EdgeLabel::Instance => None,
                };
                best = best.max(cand);
            }
            memo[x] = Some(best);
            best
        }
        let mut i: Vec<Option<Option<usize>>> = vec![None; n];
        fn ins_len(
            x: usize,
            adj: &[Vec<&Edge>],
            r: &mut Vec<Option<Option<usize>>>,
            memo: &mut Vec<Option<Option<usize>>>,
        ) -> Option<usize> {
            if let Some(v) = memo[x] {
                return v;
            }
            memo[x] = Some(None);
            let mut best = ref_len(x, adj, r);
            for e in &adj[x] {
                if e.label == EdgeLabel::Instance {
                    best = best.max(ins_len(e.to, adj, r, memo).map(|k| k + 1));
                }
            }
            memo[x] = Some(best);
            best
        }
        (0..n).filter_map(|x| ins_len(x, &adj, &mut r, &mut i)).max().unwrap_or(0)
    }

    pub fn export_dot(&self, p: &Program) -> String {
        let mut out = String::from("digraph cg {\n  node [shape=box, fontname=\"monospace\"];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let body = match &n.state {
                AbstractState::State(s) => s.render(Some(p)),
                other => other.to_string(),
            };
            let extra = match &n.kind {
                NodeKind::Inner => String::new(),
                NodeKind::Terminal(v) => format!("\\nreturn {v:?}"),
                NodeKind::Failed(r) => format!("\\nfailed: {r}"),
            };
            let style = match n.kind {
                NodeKind::Inner => "",
                NodeKind::Terminal(_) => ", style=bold",
                NodeKind::Failed(_) => ", color=red",
            };
            let _ = writeln!(out, "  n{i} [label=\"{}: {}{}\"{style}];", Self::symbol(i), escape(&body), extra);
        }
        for e in &self.edges {
            let style = match e.label {
                EdgeLabel::Instance => ", style=dashed",
                EdgeLabel::Refine(_) => ", style=dotted",
                EdgeLabel::Eval(_) => "",
            };
            let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"{style}];", e.from, e.to, escape(&e.label.short()));
        }
        out.push_str("}\n");
        out
    }

    /// Plain-text listing of nodes and edges.
    pub fn dump(&self, p: &Program) -> String {
        let mut out = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let body = match &n.state {
                AbstractState::State(s) => s.render(Some(p)),
                other => other.to_string(),
            };
            let kind = match &n.kind {
                NodeKind::Inner => String::new(),
                NodeKind::Terminal(_) => " [terminal]".into(),
                NodeKind::Failed(r) => format!(" [failed: {r}]"),
            };
            let _ = writeln!(out, "{}{kind}: {body}", Self::symbol(i));
        }
        for e in &self.edges {
            let kind = match e.label {
                EdgeLabel::Eval(_) => "eval",
                EdgeLabel::Refine(_) => "ref",
                EdgeLabel::Instance => "ins",
            };
            let _ = writeln!(out, "{} -{kind}-> {} {}", Self::symbol(e.from), Self::symbol(e.to), e.label.short());
        }
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// For each concrete step, the edges of the witness path through the graph.
pub fn trace_concrete(p: &Program, g: &CGraph, trace: &[JvmState]) -> Result<Vec<Vec<usize>>, TraceError> {
    let Some(first) = trace.first() else { return Ok(vec![]) };
    if !is_instance(p, &beta(first), &g.nodes[g.entry].state) {
        return Err(TraceError::EntryMismatch);
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); g.nodes.len()];
    for (i, e) in g.edges.iter().enumerate() {
        adj[e.from].push(i);
    }
    let mut cur = g.entry;
    let mut out = Vec::new();
    let mut here = beta(first);
    for (step, next) in trace[1..].iter().enumerate() {
        let there = beta(next);
        // BFS over (node, phase): phase 0 allows instance and refine
        // edges, phase 1 only refine; an eval edge ends the path.
        let mut prev: HashMap<(NodeId, u8), (NodeId, u8, usize)> = HashMap::new();
        let mut q = VecDeque::from([(cur, 0u8)]);
        let mut seen = BTreeSet::from([(cur, 0u8)]);
        let mut found = None;
        'bfs: while let Some((x, ph)) = q.pop_front() {
            for &ei in &adj[x] {
                let e = &g.edges[ei];
                let (nph, target_state) = match (&e.label, ph) {
                    (EdgeLabel::Instance, 0) => (0, &here),
                    (EdgeLabel::Refine(_), _) => (1, &here),
                    (EdgeLabel::Eval(_), _) => (2, &there),
                    _ => continue,
                };
                if !is_instance(p, target_state, &g.nodes[e.to].state) {
                    continue;
                }
                if nph == 2 {
                    found = Some((x, ph, ei));
                    break 'bfs;
                }
                if seen.insert((e.to, nph)) {
                    prev.insert((e.to, nph), (x, ph, ei));
                    q.push_back((e.to, nph));
                }
            }
        }
        let Some((mut x, mut ph, last)) = found else {
            return Err(TraceError::NoWitness { step });
        };
        let mut path = vec![last];
        while let Some(&(px, pph, ei)) = prev.get(&(x, ph)) {
            path.push(ei);
            x = px;
            ph = pph;
        }
        path.reverse();
        cur = g.edges[last].to;
        out.push(path);
        here = there;
    }
    Ok(out)
}
