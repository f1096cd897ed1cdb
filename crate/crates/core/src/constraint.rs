//! Quantifier-free constraints over integer and boolean terms.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;

use crate::domain::VarId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Int,
    Bool,
    Univ,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sort::Int => "int",
            Sort::Bool => "bool",
            Sort::Univ => "univ",
        })
    }
}

pub fn int_var_name(id: VarId) -> String {
    format!("i{id}")
}

pub fn bool_var_name(id: VarId) -> String {
    format!("b{id}")
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CTerm {
    Var(String, Sort),
    Int(BigInt),
    Bool(bool),
    Add(Box<CTerm>, Box<CTerm>),
    Sub(Box<CTerm>, Box<CTerm>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    /// A boolean-sorted term used as an atom.
    Holds(CTerm),
    Eq(CTerm, CTerm),
    Neq(CTerm, CTerm),
    Geq(CTerm, CTerm),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

impl CTerm {
    pub fn vars(&self, out: &mut BTreeSet<(String, Sort)>) {
        match self {
            CTerm::Var(n, s) => {
                out.insert((n.clone(), *s));
            }
            CTerm::Add(a, b) | CTerm::Sub(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            _ => {}
        }
    }
}

impl Formula {
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn negate(a: Formula) -> Formula {
        Formula::Not(Box::new(a))
    }

    /// `b <-> phi` written as `(b /\ phi) \/ (not b /\ not phi)`.
    pub fn iff_var(b: CTerm, phi: Formula) -> Formula {
        let hb = Formula::Holds(b);
        Formula::or(
            Formula::and(hb.clone(), phi.clone()),
            Formula::and(Formula::negate(hb), Formula::negate(phi)),
        )
    }

    pub fn vars(&self) -> BTreeSet<(String, Sort)> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<(String, Sort)>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Holds(t) => t.vars(out),
            Formula::Eq(a, b) | Formula::Neq(a, b) | Formula::Geq(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Formula::Not(a) => a.collect(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    /// Renames variables.
    pub fn map_vars(&self, f: &dyn Fn(&str, Sort) -> CTerm) -> Formula {
        fn mt(t: &CTerm, f: &dyn Fn(&str, Sort) -> CTerm) -> CTerm {
            match t {
                CTerm::Var(n, s) => f(n, *s),
                CTerm::Add(a, b) => CTerm::Add(Box::new(mt(a, f)), Box::new(mt(b, f))),
                CTerm::Sub(a, b) => CTerm::Sub(Box::new(mt(a, f)), Box::new(mt(b, f))),
                other => other.clone(),
            }
        }
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Holds(t) => Formula::Holds(mt(t, f)),
            Formula::Eq(a, b) => Formula::Eq(mt(a, f), mt(b, f)),
            Formula::Neq(a, b) => Formula::Neq(mt(a, f), mt(b, f)),
            Formula::Geq(a, b) => Formula::Geq(mt(a, f), mt(b, f)),
            Formula::Not(a) => Formula::negate(a.map_vars(f)),
            Formula::And(a, b) => Formula::and(a.map_vars(f), b.map_vars(f)),
            Formula::Or(a, b) => Formula::or(a.map_vars(f), b.map_vars(f)),
        }
    }
}

impl fmt::Display for CTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CTerm::Var(n, _) => f.write_str(n),
            CTerm::Int(z) => write!(f, "{z}"),
            CTerm::Bool(b) => write!(f, "{b}"),
            CTerm::Add(a, b) => write!(f, "{a} + {b}"),
            CTerm::Sub(a, b) => match **b {
                CTerm::Add(..) | CTerm::Sub(..) => write!(f, "{a} - ({b})"),
                _ => write!(f, "{a} - {b}"),
            },
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let paren = |g: &Formula| -> String {
            match g {
                Formula::And(..) | Formula::Or(..) => format!("({g})"),
                _ => g.to_string(),
            }
        };
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Holds(t) => write!(f, "{t}"),
            Formula::Eq(a, b) => write!(f, "{a} = {b}"),
            Formula::Neq(a, b) => write!(f, "{a} != {b}"),
            Formula::Geq(a, b) => write!(f, "{a} >= {b}"),
            Formula::Not(a) => match **a {
                Formula::Holds(_) | Formula::True | Formula::False => write!(f, "not {a}"),
                _ => write!(f, "not ({a})"),
            },
            Formula::And(a, b) => write!(f, "{} /\\ {}", paren(a), paren(b)),
            Formula::Or(a, b) => write!(f, "{} \\/ {}", paren(a), paren(b)),
        }
    }
}
