//! Analysis of Jinja-style bytecode: a concrete interpreter, an abstract
//! domain of heap shapes, computation graphs and their translation into
//! constrained term rewrite systems.

pub mod cgraph;
pub mod constraint;
pub mod ctrs;
pub mod domain;
pub mod frontend;
pub mod graph;
pub mod literal;
pub mod pipeline;
pub mod program;
pub mod rewriter;
pub mod shape;
pub mod symex;
pub mod verify;
pub mod vm;

pub use frontend::{parse_program, render};
pub use program::Program;
