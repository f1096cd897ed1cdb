//! Python bindings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use jbc2ctrs::cgraph::Limits;
use jbc2ctrs::ctrs::{parse_ctrs, render_ctrs};
use jbc2ctrs::pipeline::{concrete_run, load_program, Analysis as CoreAnalysis, PipelineError};
use jbc2ctrs::shape::Assumptions;
use jbc2ctrs::vm::StepResult;

fn err(e: PipelineError) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// A parsed and verified program.
#[pyclass(frozen)]
struct Program {
    inner: jbc2ctrs::Program,
}

#[pymethods]
impl Program {
    #[staticmethod]
    fn parse(src: &str) -> PyResult<Program> {
        Ok(Program { inner: load_program(src).map_err(|e| PyValueError::new_err(e.to_string()))? })
    }

    /// Canonical text form.
    fn render(&self) -> String {
        jbc2ctrs::render(&self.inner)
    }

    /// Runs `entry` on argument literals and returns `(steps, outcome)`.
    #[pyo3(signature = (entry, args, fuel = 1_000_000))]
    fn run(&self, entry: &str, args: Vec<String>, fuel: usize) -> PyResult<(usize, String)> {
        let out = concrete_run(&self.inner, entry, &args, fuel, false).map_err(err)?;
        let text = match &out.result {
            StepResult::Halted(v) => v.to_string(),
            StepResult::Failure(r) => format!("failure: {r}"),
            StepResult::Next(_) => unreachable!("run stops only on halt or failure"),
        };
        Ok((out.steps, text))
    }
}

/// Outcome of replaying a concrete run as rewrite steps.
#[pyclass(frozen, get_all)]
struct SimReport {
    m: usize,
    l: usize,
    k: usize,
    k_observed: usize,
    holds: bool,
}

/// Computation graph and rewrite system for one entry point.
#[pyclass(frozen)]
struct Analysis {
    inner: CoreAnalysis,
}

#[pymethods]
impl Analysis {
    #[new]
    #[pyo3(signature = (program, entry, assume = Vec::new(), this_nonnull = false, max_nodes = 10_000))]
    fn new(program: &Program, entry: &str, assume: Vec<String>, this_nonnull: bool, max_nodes: usize) -> PyResult<Self> {
        let a = Assumptions::parse(&assume).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let limits = Limits { max_nodes, ..Limits::default() };
        let inner = CoreAnalysis::new(program.inner.clone(), entry, a, this_nonnull, limits).map_err(err)?;
        Ok(Analysis { inner })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.graph.nodes.len()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.graph.edges.len()
    }

    /// Static bound on rewrite steps per concrete step.
    #[getter]
    fn k(&self) -> usize {
        self.inner.graph.static_k()
    }

    #[getter]
    fn rule_count(&self) -> usize {
        self.inner.ctrs.rules.len()
    }

    fn ctrs(&self) -> String {
        render_ctrs(&self.inner.ctrs)
    }

    fn dot(&self) -> String {
        self.inner.graph.export_dot(&self.inner.program)
    }

    /// Replays a concrete run, optionally against a rewrite system in text form.
    #[pyo3(signature = (args, fuel = 1_000_000, ctrs = None))]
    fn simulate(&self, args: Vec<String>, fuel: usize, ctrs: Option<&str>) -> PyResult<SimReport> {
        let custom = ctrs.map(parse_ctrs).transpose().map_err(|e| PyValueError::new_err(e.to_string()))?;
        let (_, r) = self.inner.simulate(&args, fuel, custom.as_ref()).map_err(err)?;
        Ok(SimReport { m: r.m, l: r.l, k: r.k, k_observed: r.k_observed, holds: r.holds() })
    }
}

#[pymodule]
fn jbc2ctrs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Program>()?;
    m.add_class::<Analysis>()?;
    m.add_class::<SimReport>()?;
    Ok(())
}
