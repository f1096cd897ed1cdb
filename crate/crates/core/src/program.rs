//! Program model: classes, fields, methods and bytecode instructions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use thiserror::Error;

/// Interned-ish identifier. Cheap to clone and `Send`.
pub type Ident = Arc<str>;

pub const OBJECT: &str = "Object";

pub fn ident(s: &str) -> Ident {
    Arc::from(s)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeRef {
    Bool,
    Int,
    Unit,
    NullT,
    Class(Ident),
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeRef::Bool => f.write_str("bool"),
            TypeRef::Int => f.write_str("int"),
            TypeRef::Unit => f.write_str("unit"),
            TypeRef::NullT => f.write_str("null"),
            TypeRef::Class(c) => f.write_str(c),
        }
    }
}

/// A field is identified by its defining class and its name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldKey {
    pub class: Ident,
    pub name: Ident,
}

impl FieldKey {
    pub fn new(class: &str, name: &str) -> Self {
        FieldKey { class: ident(class), name: ident(name) }
    }
}

impl fmt::Display for FieldKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.class, self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Literal {
    Unit,
    Null,
    Bool(bool),
    Int(BigInt),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Unit => f.write_str("unit"),
            Literal::Null => f.write_str("null"),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Int(z) => write!(f, "{z}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instruction {
    Load(usize),
    Store(usize),
    Push(Literal),
    Pop,
    IAdd,
    ISub,
    CmpGeq,
    CmpEq,
    CmpNeq,
    And,
    Or,
    Not,
    Goto(i64),
    IfFalse(usize),
    New(Ident),
    Getfield(Ident, Ident),
    Putfield(Ident, Ident),
    Checkcast(Ident),
    Invoke(Ident, usize),
    Return,
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Instruction::*;
        match self {
            Load(n) => write!(f, "Load {n}"),
            Store(n) => write!(f, "Store {n}"),
            Push(v) => write!(f, "Push {v}"),
            Pop => f.write_str("Pop"),
            IAdd => f.write_str("IAdd"),
            ISub => f.write_str("ISub"),
            CmpGeq => f.write_str("CmpGeq"),
            CmpEq => f.write_str("CmpEq"),
            CmpNeq => f.write_str("CmpNeq"),
            And => f.write_str("And"),
            Or => f.write_str("Or"),
            Not => f.write_str("Not"),
            Goto(i) => write!(f, "Goto {i}"),
            IfFalse(n) => write!(f, "IfFalse {n}"),
            New(c) => write!(f, "New {c}"),
            Getfield(fl, c) => write!(f, "Getfield {fl} {c}"),
            Putfield(fl, c) => write!(f, "Putfield {fl} {c}"),
            Checkcast(c) => write!(f, "Checkcast {c}"),
            Invoke(m, n) => write!(f, "Invoke {m} {n}"),
            Return => f.write_str("Return"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: Ident,
    pub ty: TypeRef,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodDecl {
    pub name: Ident,
    pub params: Vec<(Ident, TypeRef)>,
    pub result: TypeRef,
    pub max_stack: usize,
    pub max_locals: usize,
    pub body: Vec<Instruction>,
}

impl MethodDecl {
    /// Number of registers: `this`, the parameters, then the locals.
    pub fn register_count(&self) -> usize {
        1 + self.params.len() + self.max_locals
    }

    pub fn register_name(&self, idx: usize) -> String {
        if idx == 0 {
            "this".to_string()
        } else if idx <= self.params.len() {
            self.params[idx - 1].0.to_string()
        } else {
            format!("r{idx}")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassDecl {
    pub name: Ident,
    pub superclass: Option<Ident>,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodDecl>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProgramError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("duplicate class `{0}`")]
    DuplicateClass(Ident),
    #[error("duplicate field `{field}` in class `{class}`")]
    DuplicateField { class: Ident, field: Ident },
    #[error("duplicate method `{method}` in class `{class}`")]
    DuplicateMethod { class: Ident, method: Ident },
    #[error("class `{class}` extends unknown class `{superclass}`")]
    UnknownSuperclass { class: Ident, superclass: Ident },
    #[error("unknown class `{0}`")]
    UnknownClass(Ident),
    #[error("class hierarchy is cyclic at `{0}`")]
    CyclicHierarchy(Ident),
    #[error("class `{0}` must not declare a superclass")]
    ObjectHasSuperclass(Ident),
    #[error("no method `{method}` in class `{class}`")]
    MethodNotFound { class: Ident, method: Ident },
}

/// A closed, validated set of classes.
#[derive(Clone, Debug)]
pub struct Program {
    classes: BTreeMap<Ident, ClassDecl>,
    order: Vec<Ident>,
    field_tables: BTreeMap<Ident, Vec<(FieldKey, TypeRef)>>,
    children: BTreeMap<Ident, Vec<Ident>>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.classes == other.classes
    }
}

impl Eq for Program {}

impl Program {
    /// Validates the class list. `Object` is added when not declared.
    pub fn new(decls: Vec<ClassDecl>) -> Result<Program, ProgramError> {
        let mut classes = BTreeMap::new();
        let mut order = Vec::new();
        for c in decls {
            if classes.contains_key(&c.name) {
                return Err(ProgramError::DuplicateClass(c.name));
            }
            let mut seen = BTreeSet::new();
            for f in &c.fields {
                if !seen.insert(f.name.clone()) {
                    return Err(ProgramError::DuplicateField { class: c.name.clone(), field: f.name.clone() });
                }
            }
            let mut seen = BTreeSet::new();
            for m in &c.methods {
                if !seen.insert(m.name.clone()) {
                    return Err(ProgramError::DuplicateMethod { class: c.name.clone(), method: m.name.clone() });
                }
            }
            order.push(c.name.clone());
            classes.insert(c.name.clone(), c);
        }
        let obj = ident(OBJECT);
        if !classes.contains_key(&obj) {
            classes.insert(
                obj.clone(),
                ClassDecl { name: obj.clone(), superclass: None, fields: vec![], methods: vec![] },
            );
        }
        if classes[&obj].superclass.is_some() {
            return Err(ProgramError::ObjectHasSuperclass(obj));
        }
        // Normalise: every non-Object class has a superclass.
        for (name, c) in classes.iter_mut() {
            if c.superclass.is_none() && **name != *OBJECT {
                c.superclass = Some(ident(OBJECT));
            }
        }
        for c in classes.values() {
            if let Some(sc) = &c.superclass {
                if !classes.contains_key(sc) {
                    return Err(ProgramError::UnknownSuperclass { class: c.name.clone(), superclass: sc.clone() });
                }
            }
        }
        // Acyclic hierarchy.
        for start in classes.keys() {
            let mut cur = start.clone();
            let mut steps = 0usize;
            while let Some(sc) = &classes[&cur].superclass {
                cur = sc.clone();
                steps += 1;
                if steps > classes.len() {
                    return Err(ProgramError::CyclicHierarchy(start.clone()));
                }
            }
        }
        let check_ty = |t: &TypeRef| -> Result<(), ProgramError> {
            if let TypeRef::Class(c) = t {
                if !classes.contains_key(c) {
                    return Err(ProgramError::UnknownClass(c.clone()));
                }
            }
            Ok(())
        };
        for c in classes.values() {
            for f in &c.fields {
                check_ty(&f.ty)?;
            }
            for m in &c.methods {
                check_ty(&m.result)?;
                for (_, t) in &m.params {
                    check_ty(t)?;
                }
            }
        }
        let mut children: BTreeMap<Ident, Vec<Ident>> = BTreeMap::new();
        for c in classes.values() {
            children.entry(c.name.clone()).or_default();
            if let Some(sc) = &c.superclass {
                children.entry(sc.clone()).or_default().push(c.name.clone());
            }
        }
        let mut p = Program { classes, order, field_tables: BTreeMap::new(), children };
        let names: Vec<Ident> = p.classes.keys().cloned().collect();
        for n in names {
            let table = p.compute_field_table(&n);
            p.field_tables.insert(n, table);
        }
        Ok(p)
    }

    fn compute_field_table(&self, cn: &Ident) -> Vec<(FieldKey, TypeRef)> {
        let mut chain = self.superclasses(cn);
        chain.reverse();
        let mut out = Vec::new();
        for c in chain {
            for f in &self.classes[&c].fields {
                out.push((FieldKey { class: c.clone(), name: f.name.clone() }, f.ty.clone()));
            }
        }
        out
    }

    /// Declared classes in source order (implicit `Object` excluded).
    pub fn declared_classes(&self) -> impl Iterator<Item = &ClassDecl> {
        self.order.iter().map(move |n| &self.classes[n])
    }

    pub fn class_names(&self) -> impl Iterator<Item = &Ident> {
        self.classes.keys()
    }

    pub fn class(&self, cn: &str) -> Option<&ClassDecl> {
        self.classes.get(cn)
    }

    pub fn has_class(&self, cn: &str) -> bool {
        self.classes.contains_key(cn)
    }

    /// The class itself followed by its ancestors up to `Object`.
    pub fn superclasses(&self, cn: &str) -> Vec<Ident> {
        let mut out = Vec::new();
        let mut cur = self.classes.get(cn).map(|c| c.name.clone());
        while let Some(c) = cur {
            cur = self.classes[&c].superclass.clone();
            out.push(c);
        }
        out
    }

    pub fn is_subclass(&self, sub: &str, sup: &str) -> bool {
        self.superclasses(sub).iter().any(|c| &**c == sup)
    }

    /// Subtyping over value types. `NullT` is below every class type,
    /// `Unit` is below everything.
    pub fn is_subtype(&self, t1: &TypeRef, t2: &TypeRef) -> bool {
        match (t1, t2) {
            (a, b) if a == b => true,
            (TypeRef::Unit, _) => true,
            (TypeRef::NullT, TypeRef::Class(_)) => true,
            (TypeRef::Class(a), TypeRef::Class(b)) => self.is_subclass(a, b),
            _ => false,
        }
    }

    /// Least common superclass.
    pub fn lub_class(&self, a: &str, b: &str) -> Ident {
        let sa = self.superclasses(a);
        let sb = self.superclasses(b);
        for c in &sa {
            if sb.contains(c) {
                return c.clone();
            }
        }
        ident(OBJECT)
    }

    /// Pre-order walk of the class and all its subclasses.
    pub fn subclasses(&self, cn: &str) -> Vec<Ident> {
        let mut out = Vec::new();
        let mut stack = match self.classes.get(cn) {
            Some(c) => vec![c.name.clone()],
            None => return out,
        };
        while let Some(c) = stack.pop() {
            if let Some(ch) = self.children.get(&c) {
                for k in ch.iter().rev() {
                    stack.push(k.clone());
                }
            }
            out.push(c);
        }
        out
    }

    /// All fields of `cn` including inherited ones, root class first.
    pub fn field_table_domain(&self, cn: &str) -> &[(FieldKey, TypeRef)] {
        self.field_tables.get(cn).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn field_type(&self, key: &FieldKey) -> Option<&TypeRef> {
        self.classes
            .get(&key.class)?
            .fields
            .iter()
            .find(|f| f.name == key.name)
            .map(|f| &f.ty)
    }

    /// Method lookup in the class itself only.
    pub fn method(&self, cn: &str, mn: &str) -> Option<&MethodDecl> {
        self.classes.get(cn)?.methods.iter().find(|m| &*m.name == mn)
    }

    /// Dynamic dispatch: the first class on the superclass chain of `cn`
    /// declaring `mn`.
    pub fn resolve_method(&self, cn: &str, mn: &str) -> Option<(Ident, &MethodDecl)> {
        for c in self.superclasses(cn) {
            if let Some(m) = self.method(&c, mn) {
                return Some((c, m));
            }
        }
        None
    }

    /// Parses `Class.method` and resolves it.
    pub fn entry(&self, qualified: &str) -> Result<(Ident, &MethodDecl), ProgramError> {
        let (c, m) = qualified.rsplit_once('.').ok_or_else(|| ProgramError::MethodNotFound {
            class: ident(""),
            method: ident(qualified),
        })?;
        if !self.has_class(c) {
            return Err(ProgramError::UnknownClass(ident(c)));
        }
        self.resolve_method(c, m)
            .ok_or_else(|| ProgramError::MethodNotFound { class: ident(c), method: ident(m) })
    }

    /// Resolves an unqualified field name in the field table of `cn`.
    /// The nearest declaration wins when a name is shadowed.
    pub fn lookup_field(&self, cn: &str, name: &str) -> Option<FieldKey> {
        self.field_table_domain(cn)
            .iter()
            .rev()
            .find(|(k, _)| &*k.name == name)
            .map(|(k, _)| k.clone())
    }
}
