//! The `gridblock` command line: `tasks`, `run`, `check`, `trace`, `solve`
//! and `serve`.
//!
//! Exit status is 0 on success (and, for `run`/`check`, a correct verdict),
//! 1 on an incorrect verdict, 2 on usage, input or parse errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use crate::block_ast::serialize_program;
use crate::grid::Cell;
use crate::oracle;
use crate::server;
use crate::service::{evaluate, EvalError, Evaluation};
use crate::tasks::{
    builtin_tasks, find_task, load_task, PolicyOverrides, SuccessRule, TaskError, TaskSpec,
};
use crate::verdict::render_feedback;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCORRECT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "gridblock",
    version,
    about = "Run and check block programs on the 5x5 grid tasks"
)]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the built-in tasks.
    Tasks,
    /// Execute a program and print its trace and verdict.
    Run(ProgramArgs),
    /// Print the verdict only.
    Check(ProgramArgs),
    /// Print the canonical execution trace.
    Trace(ProgramArgs),
    /// Print oracle output for a task.
    Solve(TaskArgs),
    /// Start the WebSocket service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    /// Built-in task id (or unique prefix), or a path to a task JSON file.
    #[arg(long)]
    pub task: String,
    /// JSON file of policy overrides.
    #[arg(long)]
    pub policies: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProgramArgs {
    #[command(flatten)]
    pub task: TaskArgs,
    /// Blockly XML file.
    #[arg(long)]
    pub program: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("bad policies file: {0}")]
    Policies(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Port(#[from] server::PortError),
    #[error("server failed: {0}")]
    Serve(std::io::Error),
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Resolves `--task` and applies `--policies`.
pub fn resolve_task(args: &TaskArgs) -> Result<TaskSpec, CliError> {
    let builtins = builtin_tasks();
    let mut task = match find_task(&builtins, &args.task) {
        Ok(t) => t.clone(),
        Err(e) => {
            let p = Path::new(&args.task);
            if p.is_file() {
                load_task(&read(p)?)?
            } else {
                return Err(e.into());
            }
        }
    };
    if let Some(p) = &args.policies {
        let o: PolicyOverrides =
            serde_json::from_str(&read(p)?).map_err(|e| CliError::Policies(e.to_string()))?;
        o.apply(&mut task.policies);
    }
    Ok(task)
}

/// Parses `args` and runs the command, writing to the given streams.
/// Returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(rendered.as_bytes())
            } else {
                out.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn json_out(out: &mut dyn Write, v: &Value) {
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(v).expect("json"));
}

fn verdict_code(e: &Evaluation) -> i32 {
    if e.verdict.is_correct {
        EXIT_OK
    } else {
        EXIT_INCORRECT
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let text = cli.format == Format::Text;
    match &cli.command {
        Command::Tasks => {
            for t in builtin_tasks() {
                if text {
                    let _ = writeln!(out, "{}", t.id);
                } else {
                    let _ = writeln!(out, "{}", json!({ "id": t.id, "title": t.title }));
                }
            }
            Ok(EXIT_OK)
        }
        Command::Run(a) | Command::Check(a) | Command::Trace(a) => {
            let task = resolve_task(&a.task)?;
            let e = evaluate(&read(&a.program)?, &task)?;
            match &cli.command {
                Command::Run(_) => {
                    if text {
                        write_text_summary(out, &e);
                    } else {
                        json_out(
                            out,
                            &json!({
                                "trace": e.trace.to_canonical_json(),
                                "verdict": e.verdict.to_json_value(),
                                "fault": e.verdict.fault_report,
                            }),
                        );
                    }
                    if !e.verdict.is_correct {
                        let _ = writeln!(err, "{}", e.verdict.feedback_text);
                    }
                    Ok(verdict_code(&e))
                }
                Command::Check(_) => {
                    if text {
                        let _ = writeln!(
                            out,
                            "{}: {}",
                            if e.verdict.is_correct {
                                "correct"
                            } else {
                                "incorrect"
                            },
                            e.verdict.feedback_text
                        );
                    } else {
                        let _ = writeln!(out, "{}", render_feedback(&e.verdict));
                    }
                    Ok(verdict_code(&e))
                }
                _ => {
                    if text {
                        write_text_summary(out, &e);
                    } else {
                        let _ = writeln!(out, "{}", e.trace.to_canonical_string());
                    }
                    Ok(EXIT_OK)
                }
            }
        }
        Command::Solve(a) => {
            let task = resolve_task(a)?;
            json_out(out, &solve(&task));
            Ok(EXIT_OK)
        }
        Command::Serve { port } => {
            let port = server::resolve_port(*port)?;
            let rt = tokio::runtime::Runtime::new().map_err(CliError::Serve)?;
            rt.block_on(server::serve(port, builtin_tasks()))
                .map_err(CliError::Serve)?;
            Ok(EXIT_OK)
        }
    }
}

fn write_text_summary(out: &mut dyn Write, e: &Evaluation) {
    let cells: Vec<String> = e.trace.visited.iter().map(Cell::to_string).collect();
    let _ = writeln!(out, "path: {}", cells.join(" "));
    let p = e.trace.final_pose();
    let _ = writeln!(out, "final: {} {}", p.cell, p.orientation.as_str());
    for f in &e.trace.faults {
        let _ = writeln!(
            out,
            "fault: {} at {} (primitive {}, step {})",
            f.kind.as_str(),
            f.cell,
            f.primitive,
            f.step
        );
    }
    if let Some(l) = &e.trace.energy {
        if let Some(last) = l.last() {
            let _ = writeln!(out, "energy: {}", last.energy);
        }
    }
    let _ = writeln!(
        out,
        "verdict: {}",
        if e.verdict.is_correct {
            "correct"
        } else {
            "incorrect"
        }
    );
    let _ = writeln!(out, "{}", e.verdict.feedback_text);
}

/// Oracle output for a task, chosen by its success rule.
pub fn solve(task: &TaskSpec) -> Value {
    let mut v = json!({ "task": task.id });
    let start = task.start.cell;
    match &task.success {
        SuccessRule::FollowExactCellPath { path } => {
            let mut legs = Vec::new();
            let mut from = start;
            for t in &task.triggers {
                legs.push(json!({
                    "from": from,
                    "to": t.cell,
                    "label": t.label,
                    "length": oracle::shortest_path_len(task, from, t.cell).ok(),
                }));
                from = t.cell;
            }
            v["shortestLegs"] = json!(legs);
            v["acceptedPathSteps"] = json!(path.len().saturating_sub(1));
        }
        SuccessRule::TransportAllItems { .. } => match oracle::river_solver(task) {
            Ok(plan) => {
                v["crossings"] = json!(plan.crossings.len());
                v["plan"] = json!(plan.crossings);
                v["statesExplored"] = json!(plan.states_explored);
                v["program"] = json!(serialize_program(&oracle::crossing_program(task, &plan)));
            }
            Err(e) => v["error"] = json!(e.to_string()),
        },
        SuccessRule::KnightFullCover { .. } => {
            v["referenceCheck"] = json!(oracle::knight_reference_check(task.policies));
            v["program"] = json!(serialize_program(&oracle::knight_reference_program()));
        }
        SuccessRule::CollectAllMinerals => match oracle::mineral_route_search(task) {
            Some(route) => {
                let program = oracle::route_program(&route, task.start.orientation);
                let final_energy =
                    oracle::replay(&program, task).and_then(|t| t.final_energy(task));
                v["route"] = json!(route);
                v["steps"] = json!(route.len() - 1);
                v["finalEnergy"] = json!(final_energy);
                v["program"] = json!(serialize_program(&program));
            }
            None => v["error"] = json!("no route collects every mineral with energy to spare"),
        },
        SuccessRule::CoverAllCells { .. } => {
            let dist: Vec<Value> = Cell::all()
                .filter_map(|c| {
                    oracle::shortest_path_len(task, start, c)
                        .ok()
                        .map(|d| json!({ "cell": c, "distance": d }))
                })
                .collect();
            v["reachableCells"] = json!(dist.len());
            v["distances"] = json!(dist);
        }
    }
    v
}
