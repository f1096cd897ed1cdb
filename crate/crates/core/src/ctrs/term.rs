use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use num_traits::Signed;

use crate::constraint::Sort;

/// Sorted first-order terms. `Null` stands for both `null` and `unit`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String, Sort),
    Int(BigInt),
    Bool(bool),
    Null,
    App(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>, sort: Sort) -> Term {
        Term::Var(name.into(), sort)
    }

    pub fn app(f: impl Into<String>, args: Vec<Term>) -> Term {
        Term::App(f.into(), args)
    }

    /// Variables count 1, integers their absolute value, symbols 1 plus
    /// their arguments.
    pub fn size(&self) -> BigInt {
        match self {
            Term::Int(z) => z.abs(),
            Term::Var(..) | Term::Bool(_) | Term::Null => BigInt::from(1),
            Term::App(_, args) => args.iter().fold(BigInt::from(1), |acc, t| acc + t.size()),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(..) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
            _ => true,
        }
    }

    pub fn vars(&self, out: &mut BTreeSet<(String, Sort)>) {
        match self {
            Term::Var(n, s) => {
                out.insert((n.clone(), *s));
            }
            Term::App(_, args) => args.iter().for_each(|a| a.vars(out)),
            _ => {}
        }
    }

    pub fn root(&self) -> Option<&str> {
        match self {
            Term::App(f, _) => Some(f),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::App(_, a) => a,
            _ => &[],
        }
    }

    pub fn sort(&self) -> Sort {
        match self {
            Term::Var(_, s) => *s,
            Term::Int(_) => Sort::Int,
            Term::Bool(_) => Sort::Bool,
            _ => Sort::Univ,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(n, _) => f.write_str(n),
            Term::Int(z) => write!(f, "{z}"),
            Term::Bool(b) => write!(f, "{b}"),
            Term::Null => f.write_str("null"),
            Term::App(g, args) if args.is_empty() => f.write_str(g),
            Term::App(g, args) => {
                write!(f, "{g}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
