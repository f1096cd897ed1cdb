//! Heap shape queries over abstract states and entry assumptions.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::domain::{unify, AbsHeapState, AbsObject, AbsValue, Morphism, Regions, ShapeTag};
use crate::program::{Ident, MethodDecl, Program, TypeRef};
use crate::vm::{Addr, JvmState, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShapeError {
    #[error("address {0} is not in the heap")]
    Dangling(Addr),
    #[error("bad assumption `{0}`: expected `acyclic:ROOT` or `unshared:ROOT,ROOT[,...]`")]
    Syntax(String),
    #[error("assumption names unknown root `{0}`")]
    UnknownRoot(String),
    #[error("root `{0}` is not of class type")]
    NotReference(String),
    #[error("arguments violate assumption: {0}")]
    Violated(String),
}

/// Classes whose instances may be reached in one or more field steps from
/// an instance of any subclass of `ty`.
pub fn classes_reachable(p: &Program, ty: &str) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    let mut work: Vec<Ident> = p.subclasses(ty);
    let mut seen: BTreeSet<Ident> = BTreeSet::new();
    while let Some(c) = work.pop() {
        if !seen.insert(c.clone()) {
            continue;
        }
        for (_, t) in p.field_table_domain(&c) {
            if let TypeRef::Class(f) = t {
                for sub in p.subclasses(f) {
                    out.insert(sub.clone());
                    work.push(sub);
                }
            }
        }
    }
    out
}

/// Possible dynamic classes of the object at `a`.
fn dyn_classes(p: &Program, s: &AbsHeapState, a: Addr) -> BTreeSet<Ident> {
    match s.heap.get(&a) {
        Some(AbsObject::Instance { class, .. }) => [class.clone()].into(),
        Some(AbsObject::ClassVar { ty, .. }) => p.subclasses(ty).into_iter().collect(),
        None => BTreeSet::new(),
    }
}

fn check(s: &AbsHeapState, a: Addr) -> Result<(), ShapeError> {
    if s.heap.contains_key(&a) {
        Ok(())
    } else {
        Err(ShapeError::Dangling(a))
    }
}

/// Whether `a` and `b` may denote the same object in some concretisation.
pub fn may_alias(p: &Program, s: &AbsHeapState, a: Addr, b: Addr) -> Result<bool, ShapeError> {
    check(s, a)?;
    check(s, b)?;
    if a == b {
        return Ok(true);
    }
    if s.is_annotated(a, b) {
        return Ok(false);
    }
    let (ta, tb) = (s.tag(a), s.tag(b));
    if s.regions.are_disjoint(ta.region, tb.region) {
        return Ok(false);
    }
    if (ta.acyclic || tb.acyclic) && (s.reach_plus(a).contains(&b) || s.reach_plus(b).contains(&a)) {
        return Ok(false);
    }
    Ok(unify(p, s, &[(AbsValue::addr(a), AbsValue::addr(b))], true).is_some())
}

/// Whether some concretisation has a path of length zero or more from
/// `a` to `b`.
pub fn may_reach(p: &Program, s: &AbsHeapState, a: Addr, b: Addr) -> Result<bool, ShapeError> {
    check(s, a)?;
    check(s, b)?;
    if a == b {
        return Ok(true);
    }
    let ra = s.reach(a);
    if ra.contains(&b) {
        return Ok(true);
    }
    let db = dyn_classes(p, s, b);
    let rb = s.reach(b);
    let tb = s.tag(b);
    for &c in &ra {
        // Any node on a path from `a` that may be `b` is a witness.
        if may_alias(p, s, c, b)? {
            return Ok(true);
        }
        let Some(AbsObject::ClassVar { ty, .. }) = s.heap.get(&c) else { continue };
        let tc = s.tag(c);
        if tc.closed && s.regions.are_disjoint(tc.region, tb.region) {
            continue;
        }
        if tc.acyclic && rb.contains(&c) {
            continue;
        }
        if classes_reachable(p, ty).iter().any(|k| db.contains(k)) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Whether `a` may lie on a cycle.
pub fn maybe_cyclic(p: &Program, s: &AbsHeapState, a: Addr) -> Result<bool, ShapeError> {
    check(s, a)?;
    if s.tag(a).acyclic {
        return Ok(false);
    }
    if s.reach_plus(a).contains(&a) {
        return Ok(true);
    }
    if let Some(AbsObject::ClassVar { ty, .. }) = s.heap.get(&a) {
        let own = dyn_classes(p, s, a);
        if classes_reachable(p, ty).iter().any(|k| own.contains(k)) {
            return Ok(true);
        }
    }
    // Any successor that may lead back, possibly by aliasing `a`, closes a cycle.
    for c in s.reach_plus(a) {
        if c != a && may_reach(p, s, c, a)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Tags of the instance must carry the facts of the abstraction.
pub fn tags_compatible(inst: &AbsHeapState, abs: &AbsHeapState, m: &Morphism) -> bool {
    abs.tags.iter().all(|(a, tag)| match m.addrs.get(a).and_then(|v| v.as_addr()) {
        Some(b) => inst.tag(b).implies(tag),
        None => true,
    })
}

/// Tag maintenance for `p.f := v`, computed on the state before the write.
pub fn putfield_tags(p: &Program, before: &AbsHeapState, target: Addr, v: &AbsValue) -> BTreeMap<Addr, ShapeTag> {
    let mut out = BTreeMap::new();
    let Some(va) = v.as_addr() else { return out };
    let tv = before.tag(va);
    let v_reaches_target = may_reach(p, before, va, target).unwrap_or(true);
    for &x in before.heap.keys() {
        if !may_reach(p, before, x, target).unwrap_or(true) {
            continue;
        }
        let mut t = before.tag(x);
        t.acyclic &= tv.acyclic && !v_reaches_target;
        t.closed &= tv.closed && tv.region == t.region;
        out.insert(x, t);
    }
    out
}

/// Entry assumptions: `acyclic:ROOT` and `unshared:ROOT,ROOT,...`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assumptions {
    pub acyclic: BTreeSet<String>,
    pub unshared: Vec<Vec<String>>,
}

impl Assumptions {
    pub fn parse(specs: &[String]) -> Result<Assumptions, ShapeError> {
        let mut a = Assumptions::default();
        for s in specs {
            let (k, v) = s.split_once(':').ok_or_else(|| ShapeError::Syntax(s.clone()))?;
            let roots: Vec<String> = v.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect();
            match k.trim() {
                "acyclic" if roots.len() == 1 => {
                    a.acyclic.insert(roots[0].clone());
                }
                "unshared" if roots.len() >= 2 => a.unshared.push(roots),
                _ => return Err(ShapeError::Syntax(s.clone())),
            }
        }
        Ok(a)
    }

    fn root_index(m: &MethodDecl, name: &str) -> Result<usize, ShapeError> {
        if name == "this" {
            return Ok(0);
        }
        m.params
            .iter()
            .position(|(n, _)| &**n == name)
            .map(|i| i + 1)
            .ok_or_else(|| ShapeError::UnknownRoot(name.to_string()))
    }

    fn root_type(class: &str, m: &MethodDecl, idx: usize) -> TypeRef {
        if idx == 0 {
            TypeRef::Class(class.into())
        } else {
            m.params[idx - 1].1.clone()
        }
    }

    /// Region index per root register and the region table.
    pub fn regions(&self, class: &str, m: &MethodDecl) -> Result<(BTreeMap<usize, u8>, Regions), ShapeError> {
        let mut names: Vec<String> = Vec::new();
        let mut by_reg = BTreeMap::new();
        let mut disjoint = BTreeSet::new();
        for group in &self.unshared {
            let mut ids = Vec::new();
            for r in group {
                let idx = Self::root_index(m, r)?;
                if !matches!(Self::root_type(class, m, idx), TypeRef::Class(_)) {
                    return Err(ShapeError::NotReference(r.clone()));
                }
                let id = match names.iter().position(|n| n == r) {
                    Some(i) => i as u8,
                    None => {
                        names.push(r.clone());
                        (names.len() - 1) as u8
                    }
                };
                by_reg.insert(idx, id);
                ids.push(id);
            }
            for (i, x) in ids.iter().enumerate() {
                for y in &ids[i + 1..] {
                    if x != y {
                        disjoint.insert((*x.min(y), *x.max(y)));
                    }
                }
            }
        }
        for r in &self.acyclic {
            let idx = Self::root_index(m, r)?;
            if !matches!(Self::root_type(class, m, idx), TypeRef::Class(_)) {
                return Err(ShapeError::NotReference(r.clone()));
            }
        }
        Ok((by_reg, Regions { names, disjoint }))
    }

    /// Shape tag for an entry root register.
    pub fn root_tag(&self, m: &MethodDecl, idx: usize, regions: &BTreeMap<usize, u8>) -> ShapeTag {
        let acyclic = self.acyclic.iter().any(|r| Self::root_index(m, r).ok() == Some(idx));
        match regions.get(&idx) {
            Some(r) => ShapeTag { region: Some(*r), closed: true, acyclic },
            None => ShapeTag { region: None, closed: false, acyclic },
        }
    }

    /// Checks the assumptions against concrete entry arguments.
    pub fn check_concrete(&self, m: &MethodDecl, s: &JvmState) -> Result<(), ShapeError> {
        let regs = &s.frames.last().ok_or_else(|| ShapeError::Violated("no frame".into()))?.regs;
        let reach = |v: &Value| -> BTreeSet<Addr> {
            let mut seen = BTreeSet::new();
            let mut work: Vec<Addr> = v.as_addr().into_iter().collect();
            while let Some(a) = work.pop() {
                if seen.insert(a) {
                    if let Some(o) = s.heap.get(&a) {
                        work.extend(o.fields.iter().filter_map(|(_, v)| v.as_addr()));
                    }
                }
            }
            seen
        };
        for r in &self.acyclic {
            let idx = Self::root_index(m, r)?;
            for a in reach(&regs[idx]) {
                let succ: Vec<Value> = s.heap[&a].fields.iter().map(|(_, v)| v.clone()).collect();
                if succ.iter().any(|v| reach(v).contains(&a)) {
                    return Err(ShapeError::Violated(format!("{r} reaches a cycle")));
                }
            }
        }
        for group in &self.unshared {
            let sets: Vec<(String, BTreeSet<Addr>)> = group
                .iter()
                .map(|r| Ok((r.clone(), reach(&regs[Self::root_index(m, r)?]))))
                .collect::<Result<_, ShapeError>>()?;
            for (i, (n1, s1)) in sets.iter().enumerate() {
                for (n2, s2) in &sets[i + 1..] {
                    if !s1.is_disjoint(s2) {
                        return Err(ShapeError::Violated(format!("{n1} and {n2} share objects")));
                    }
                }
            }
        }
        Ok(())
    }
}
