//! Constrained term rewrite systems obtained from computation graphs.

mod rules;
mod term;
mod text;
mod translate;

pub use rules::{
    corr_rule, emit_ctrs, project_constructor, rules_equivalent_modulo_renaming, Ctrs, Renaming, Rule, SymKind,
    SymbolDecl,
};
pub use term::Term;
pub use text::{parse_ctrs, parse_formula, parse_term, render_ctrs, CtrsParseError};
pub use translate::{tst, tst_arity, tval, Fresh, TranslateError, Translator};
