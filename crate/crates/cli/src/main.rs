use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jbc2ctrs::cgraph::{BuildError, Limits};
use jbc2ctrs::ctrs::{parse_ctrs, render_ctrs};
use jbc2ctrs::pipeline::{concrete_run, load_program, Analysis, PipelineError};
use jbc2ctrs::shape::{Assumptions, ShapeError};
use jbc2ctrs::vm::{FailureReason, StepResult};
use jbc2ctrs::Program;

const EXIT_IO: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_LIMIT: u8 = 3;
const EXIT_VIOLATION: u8 = 4;

#[derive(Parser)]
#[command(name = "jbc2ctrs", version, about = "Bytecode to constrained rewrite systems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and verify a program, then print it in canonical form.
    Parse { file: PathBuf },
    /// Run a method on concrete arguments.
    Run {
        #[command(flatten)]
        common: Common,
        /// Step budget.
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
        fuel: u64,
    },
    /// Build the computation graph.
    Graph {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Write the graph in DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Print every node and edge.
        #[arg(long)]
        dump: bool,
    },
    /// Emit the constrained rewrite system.
    Ctrs {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Output file; stdout if absent.
        #[arg(short = 'o', long = "out")]
        out: Option<PathBuf>,
    },
    /// Run concretely and replay the run as rewrite steps.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
        fuel: u64,
        /// Check against this system instead of the emitted one.
        #[arg(long)]
        ctrs: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    file: PathBuf,
    /// Entry point as Class.method.
    #[arg(long)]
    entry: String,
    /// Argument literal; the first one is `this`.
    #[arg(long = "arg", allow_hyphen_values = true)]
    args: Vec<String>,
}

#[derive(Args)]
struct AnalysisArgs {
    /// `acyclic:ROOT` or `unshared:ROOT,ROOT,...`.
    #[arg(long = "assume")]
    assume: Vec<String>,
    /// Treat `this` as an object rather than an unknown reference.
    #[arg(long)]
    this_nonnull: bool,
    #[arg(long, default_value_t = 10_000)]
    max_nodes: usize,
    #[arg(long, default_value_t = 100_000)]
    max_depth: usize,
}

struct Fail(u8, String);

impl From<PipelineError> for Fail {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Build(BuildError::NodeLimit(_) | BuildError::DepthLimit(_)) => EXIT_LIMIT,
            PipelineError::NotHalted(StepResult::Failure(FailureReason::FuelExhausted)) => EXIT_LIMIT,
            PipelineError::Simulation(_) => EXIT_VIOLATION,
            _ => EXIT_INPUT,
        };
        Fail(code, e.to_string())
    }
}

impl From<ShapeError> for Fail {
    fn from(e: ShapeError) -> Self {
        Fail(EXIT_INPUT, e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| Fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Fail> {
    fs::write(path, text).map_err(|e| Fail(EXIT_IO, format!("{}: {e}", path.display())))
}

fn program(path: &Path) -> Result<Program, Fail> {
    Ok(load_program(&read(path)?)?)
}

fn analysis(common: &Common, a: &AnalysisArgs) -> Result<Analysis, Fail> {
    let p = program(&common.file)?;
    let assumptions = Assumptions::parse(&a.assume)?;
    let limits = Limits { max_nodes: a.max_nodes, max_depth: a.max_depth };
    Ok(Analysis::new(p, &common.entry, assumptions, a.this_nonnull, limits)?)
}

fn real_main(cli: Cli) -> Result<(), Fail> {
    match cli.cmd {
        Cmd::Parse { file } => {
            let p = program(&file)?;
            print!("{}", jbc2ctrs::render(&p));
        }
        Cmd::Run { common, fuel } => {
            let p = program(&common.file)?;
            let out = concrete_run(&p, &common.entry, &common.args, fuel as usize, false)?;
            println!("steps: {}", out.steps);
            match &out.result {
                StepResult::Halted(v) => println!("result: {v}"),
                StepResult::Failure(FailureReason::FuelExhausted) => {
                    return Err(Fail(EXIT_LIMIT, format!("fuel exhausted after {} steps", out.steps)));
                }
                StepResult::Failure(r) => println!("failure: {r}"),
                StepResult::Next(_) => unreachable!("run stops only on halt or failure"),
            }
            println!("final: {}", out.last);
        }
        Cmd::Graph { common, analysis: a, dot, dump } => {
            let an = analysis(&common, &a)?;
            let g = &an.graph;
            println!("nodes: {}", g.nodes.len());
            println!("edges: {}", g.edges.len());
            println!("K: {}", g.static_k());
            if dump {
                print!("{}", g.dump(&an.program));
            }
            if let Some(path) = dot {
                write(&path, &g.export_dot(&an.program))?;
            }
        }
        Cmd::Ctrs { common, analysis: a, out } => {
            let an = analysis(&common, &a)?;
            let text = render_ctrs(&an.ctrs);
            match out {
                Some(path) => write(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Cmd::Simulate { common, analysis: a, fuel, ctrs } => {
            let an = analysis(&common, &a)?;
            let custom = match ctrs {
                Some(path) => Some(parse_ctrs(&read(&path)?).map_err(|e| Fail(EXIT_INPUT, e.to_string()))?),
                None => None,
            };
            let (_, report) = an.simulate(&common.args, fuel as usize, custom.as_ref())?;
            print!("{}", report.render());
            if !report.holds() {
                return Err(Fail(EXIT_VIOLATION, "simulation bounds violated".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
