//! End-to-end helpers shared by the command line and the bindings.

use thiserror::Error;

use crate::cgraph::{build_graph, initial_abstract_state, BuildError, CGraph, Limits};
use crate::ctrs::{emit_ctrs, Ctrs, TranslateError};
use crate::frontend::parse_program;
use crate::literal::{parse_args, LiteralError};
use crate::program::{Program, ProgramError};
use crate::ctrs::Term;
use crate::rewriter::{concrete_term, derive, simulate_run, Derivation, Pool, SimError, SimReport};
use crate::shape::{Assumptions, ShapeError};
use crate::verify::{check_wellformed, Diagnostic};
use crate::vm::{initial_state, run, JvmState, RunOutcome, StateError, StepResult};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("program is not well-formed:\n{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Verify(Vec<Diagnostic>),
    #[error(transparent)]
    Literal(#[from] LiteralError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("run did not halt: {0:?}")]
    NotHalted(StepResult),
}

/// Parses and checks a program.
pub fn load_program(src: &str) -> Result<Program, PipelineError> {
    let p = parse_program(src)?;
    let d = check_wellformed(&p);
    if !d.is_empty() {
        return Err(PipelineError::Verify(d));
    }
    Ok(p)
}

/// Entry state from argument literals; the first literal is `this`.
pub fn entry_state(p: &Program, entry: &str, args: &[String]) -> Result<JvmState, PipelineError> {
    let (_, m) = p.entry(entry)?;
    let class = entry.rsplit_once('.').map_or(entry, |(c, _)| c);
    let (heap, vals) = parse_args(p, args)?;
    Ok(initial_state(p, class, &m.name, heap, &vals)?)
}

pub fn concrete_run(p: &Program, entry: &str, args: &[String], fuel: usize, keep_trace: bool) -> Result<RunOutcome, PipelineError> {
    let s0 = entry_state(p, entry, args)?;
    Ok(run(p, &s0, fuel, keep_trace))
}

/// A computation graph and its rewrite system for one entry point.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub program: Program,
    pub entry: String,
    pub assumptions: Assumptions,
    pub graph: CGraph,
    pub ctrs: Ctrs,
}

impl Analysis {
    pub fn new(
        program: Program,
        entry: &str,
        assumptions: Assumptions,
        this_nonnull: bool,
        limits: Limits,
    ) -> Result<Analysis, PipelineError> {
        let s0 = initial_abstract_state(&program, entry, &assumptions, this_nonnull)?;
        let graph = build_graph(&program, s0, limits)?;
        let ctrs = emit_ctrs(&program, &graph)?;
        Ok(Analysis { program, entry: entry.to_string(), assumptions, graph, ctrs })
    }

    /// Runs the program on `args`, checks the assumptions, and replays the
    /// run against `ctrs` (by default the emitted system).
    pub fn simulate(
        &self,
        args: &[String],
        fuel: usize,
        ctrs: Option<&Ctrs>,
    ) -> Result<(RunOutcome, SimReport), PipelineError> {
        let p = &self.program;
        let s0 = entry_state(p, &self.entry, args)?;
        let (_, m) = p.entry(&self.entry)?;
        self.assumptions.check_concrete(m, &s0)?;
        let out = run(p, &s0, fuel, true);
        if !matches!(out.result, StepResult::Halted(_)) {
            return Err(PipelineError::NotHalted(out.result));
        }
        let report = simulate_run(p, &self.graph, ctrs.unwrap_or(&self.ctrs), &out.trace)?;
        Ok((out, report))
    }

    /// Entry-node term for concrete arguments.
    pub fn start_term(&self, args: &[String]) -> Result<Term, PipelineError> {
        let s0 = entry_state(&self.program, &self.entry, args)?;
        Ok(concrete_term(&self.program, self.graph.entry, &s0)?)
    }

    /// Longest derivation found from the entry term, with the default pool.
    pub fn probe(&self, args: &[String], fuel: usize, budget: usize) -> Result<Derivation, PipelineError> {
        let start = self.start_term(args)?;
        let pool = Pool::for_program(&self.program, 2, 16);
        Ok(derive(&self.ctrs, &start, fuel, &pool, budget))
    }
}
