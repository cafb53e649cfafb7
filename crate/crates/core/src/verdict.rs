//! Success decisions, fault localization and feedback rendering.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::block_ast::{serialize_program, BlockProgram, Statement};
use crate::executor::{EventKind, ExecutionTrace, Fault, FaultKind};
use crate::grid::{self, Cell};
use crate::tasks::{StructuralChecks, SuccessRule, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Fault(FaultKind),
    MineralSkippedNoEnergy,
}

impl ReportKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Fault(k) => k.as_str(),
            ReportKind::MineralSkippedNoEnergy => "MineralSkippedNoEnergy",
        }
    }
}

impl Serialize for ReportKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// Where a run first went wrong.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FaultReport {
    pub primitive_index: usize,
    pub step_index: usize,
    pub cell: Cell,
    pub kind: ReportKind,
    pub template: &'static str,
    pub detail: String,
}

impl FaultReport {
    fn from_fault(f: &Fault) -> Self {
        FaultReport {
            primitive_index: f.primitive,
            step_index: f.step,
            cell: f.cell,
            kind: ReportKind::Fault(f.kind),
            template: fault_template(f.kind),
            detail: f.detail.clone(),
        }
    }
}

fn fault_template(kind: FaultKind) -> &'static str {
    match kind {
        FaultKind::OutOfBounds => "fault.out_of_bounds",
        FaultKind::ObstacleCollision => "fault.obstacle",
        FaultKind::IllegalKnightMove => "fault.illegal_knight",
        FaultKind::RevisitViolation => "fault.revisit",
        FaultKind::EnergyDepleted => "fault.energy_depleted",
        FaultKind::ForbiddenCell => "fault.forbidden_cell",
        FaultKind::PickWithoutItem => "fault.pick_without_item",
        FaultKind::PlaceWithoutCarry => "fault.place_without_carry",
        FaultKind::WrongBankAction => "fault.wrong_bank_action",
    }
}

/// Rule-level reasons a fault-free run can still be wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shortfall {
    NoMatchingProcedure {
        expected_steps: usize,
        closest: Option<(String, usize)>,
    },
    LoopCount {
        expected: i64,
        found: Option<i64>,
    },
    Uncovered(Vec<Cell>),
    PathMismatch {
        index: usize,
        expected: Option<Cell>,
        found: Option<Cell>,
    },
    MineralsMissed(Vec<Cell>),
    EnergyNotPositive(i64),
    ItemsNotTransported(Vec<String>),
    CoverageMismatch {
        missing: Vec<Cell>,
        repeated: Vec<Cell>,
    },
    GoalNotReached {
        goal: Cell,
        last: Cell,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub is_correct: bool,
    pub return_button: bool,
    pub feedback_text: String,
    pub echo_xml: Option<String>,
    pub fault_report: Option<FaultReport>,
    pub shortfall: Option<Shortfall>,
}

impl Verdict {
    fn success(task: &TaskSpec, xml: String) -> Self {
        Verdict {
            is_correct: true,
            return_button: true,
            feedback_text: format!(
                "Well done! Your program solves \"{}\". Press return to finish the exercise.",
                task.title
            ),
            echo_xml: Some(xml),
            fault_report: None,
            shortfall: None,
        }
    }

    fn failure(xml: String, report: Option<FaultReport>, shortfall: Option<Shortfall>) -> Self {
        let feedback_text = match (&report, &shortfall) {
            (Some(r), _) => report_text(r),
            (None, Some(s)) => shortfall_text(s),
            (None, None) => "The program does not solve the task yet.".to_string(),
        };
        Verdict {
            is_correct: false,
            return_button: false,
            feedback_text,
            echo_xml: Some(xml),
            fault_report: report,
            shortfall,
        }
    }
}

fn report_text(r: &FaultReport) -> String {
    let at = format!("(block {}, step {})", r.primitive_index + 1, r.step_index);
    let cell = r.cell;
    match r.kind {
        ReportKind::MineralSkippedNoEnergy => format!(
            "The robot reaches the mineral at {cell} with no energy left, so it cannot collect it {at}. Look for a route that saves energy earlier."
        ),
        ReportKind::Fault(kind) => match kind {
            FaultKind::OutOfBounds => format!(
                "The robot would leave the grid at {cell} {at}. Check the distance and direction of that move."
            ),
            FaultKind::ObstacleCollision => {
                format!("The robot runs into the obstacle at {cell} {at}. Find a way around it.")
            }
            FaultKind::IllegalKnightMove => format!(
                "The knight move at {cell} {at} is not an L shape: {}. Use two cells along one axis and one along the other.",
                r.detail
            ),
            FaultKind::RevisitViolation => {
                format!("The robot visits {cell} a second time {at}. Every cell may be covered only once.")
            }
            FaultKind::EnergyDepleted => {
                format!("The robot runs out of energy before reaching {cell} {at}: {}.", r.detail)
            }
            FaultKind::ForbiddenCell => {
                format!("The robot may not enter {cell} {at}. Items must be placed from the cell before it.")
            }
            FaultKind::PickWithoutItem => format!("Nothing to pick up at {cell} {at}: {}.", r.detail),
            FaultKind::PlaceWithoutCarry => {
                format!("The robot tries to place an item at {cell} {at} but is not carrying anything.")
            }
            FaultKind::WrongBankAction => format!("Problem at {cell} {at}: {}.", r.detail),
        },
    }
}

fn cells_list(cells: &[Cell]) -> String {
    cells
        .iter()
        .map(Cell::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn shortfall_text(s: &Shortfall) -> String {
    match s {
        Shortfall::NoMatchingProcedure { expected_steps, closest: None } => format!(
            "Structural check failed: define a procedure of {expected_steps} move steps that cleans two rows."
        ),
        Shortfall::NoMatchingProcedure { expected_steps, closest: Some((name, n)) } if n != expected_steps => {
            format!(
                "Structural check failed: procedure `{name}` has {n} steps, but cleaning two rows takes {expected_steps}."
            )
        }
        Shortfall::NoMatchingProcedure { closest: Some((name, _)), .. } => format!(
            "Structural check failed: the steps of procedure `{name}` do not clean two rows. Check each direction and distance."
        ),
        Shortfall::LoopCount { expected, found: Some(n) } => format!(
            "Structural check failed: the loop repeats the procedure {n} times, but it should repeat {expected} times."
        ),
        Shortfall::LoopCount { expected, found: None } => format!(
            "Structural check failed: call your procedure from a loop that repeats {expected} times."
        ),
        Shortfall::Uncovered(cells) => {
            format!("Some cells are never reached: {}.", cells_list(cells))
        }
        Shortfall::PathMismatch { index, expected, found } => match (expected, found) {
            (Some(e), Some(f)) => format!(
                "The route leaves the expected path at step {index}: the robot goes to {f} instead of {e}."
            ),
            (Some(e), None) => format!("The route stops early at step {index}; it should continue to {e}."),
            (None, Some(f)) => format!("The route goes on past the goal to {f} at step {index}."),
            (None, None) => "The route does not follow the expected path.".to_string(),
        },
        Shortfall::MineralsMissed(cells) => {
            format!("Not every mineral is collected; still missing: {}.", cells_list(cells))
        }
        Shortfall::EnergyNotPositive(e) => {
            format!("All minerals are collected, but the robot ends with {e} energy; it must stay above 0.")
        }
        Shortfall::ItemsNotTransported(items) => {
            format!("Not everything reached the opposite bank; still missing: {}.", items.join(", "))
        }
        Shortfall::CoverageMismatch { missing, repeated } => {
            let mut parts = Vec::new();
            if !missing.is_empty() {
                parts.push(format!("never covered: {}", cells_list(missing)));
            }
            if !repeated.is_empty() {
                parts.push(format!("covered more than once: {}", cells_list(repeated)));
            }
            format!("Every free cell must be covered exactly once ({}).", parts.join("; "))
        }
        Shortfall::GoalNotReached { goal, last } => {
            format!("The tour ends at {last}, but it must finish on the goal {goal}.")
        }
    }
}

/// Earliest fault by (primitive, step).
pub fn first_fault(trace: &ExecutionTrace) -> Option<FaultReport> {
    trace
        .faults
        .iter()
        .min_by_key(|f| (f.primitive, f.step))
        .map(FaultReport::from_fault)
}

/// Judges a trace produced by executing `program` on `task`.
pub fn check(trace: &ExecutionTrace, program: &BlockProgram, task: &TaskSpec) -> Verdict {
    let xml = serialize_program(program);

    let mut report = first_fault(trace);
    if matches!(task.success, SuccessRule::CollectAllMinerals) {
        let skipped = trace.events.iter().find_map(|e| match e.kind {
            EventKind::MineralSkippedNoEnergy { cell } => Some(FaultReport {
                primitive_index: e.primitive,
                step_index: e.step,
                cell,
                kind: ReportKind::MineralSkippedNoEnergy,
                template: "event.mineral_skipped",
                detail: format!("no energy left to collect the mineral at {cell}"),
            }),
            _ => None,
        });
        if let Some(s) = skipped {
            let earlier = report.as_ref().is_none_or(|r| {
                (s.primitive_index, s.step_index) < (r.primitive_index, r.step_index)
            });
            if earlier {
                report = Some(s);
            }
        }
    }
    if report.is_some() {
        return Verdict::failure(xml, report, None);
    }

    match rule_shortfall(trace, program, task) {
        None => Verdict::success(task, xml),
        Some(s) => Verdict::failure(xml, None, Some(s)),
    }
}

fn rule_shortfall(
    trace: &ExecutionTrace,
    program: &BlockProgram,
    task: &TaskSpec,
) -> Option<Shortfall> {
    match &task.success {
        SuccessRule::CoverAllCells {
            exceptions,
            structural,
        } => {
            if let Some(s) = structural
                .as_ref()
                .and_then(|s| structural_shortfall(program, s))
            {
                return Some(s);
            }
            let seen: BTreeSet<Cell> = trace.visited.iter().copied().collect();
            let missing: Vec<Cell> = Cell::all()
                .filter(|c| {
                    !exceptions.contains(c) && !task.obstacles.contains(c) && !seen.contains(c)
                })
                .collect();
            (!missing.is_empty()).then_some(Shortfall::Uncovered(missing))
        }
        SuccessRule::FollowExactCellPath { path } => {
            if &trace.visited == path {
                return None;
            }
            let index = trace
                .visited
                .iter()
                .zip(path)
                .position(|(a, b)| a != b)
                .unwrap_or(trace.visited.len().min(path.len()));
            Some(Shortfall::PathMismatch {
                index,
                expected: path.get(index).copied(),
                found: trace.visited.get(index).copied(),
            })
        }
        SuccessRule::CollectAllMinerals => {
            let collected: BTreeSet<Cell> = trace
                .events
                .iter()
                .filter_map(|e| match e.kind {
                    EventKind::MineralCollected { cell } => Some(cell),
                    _ => None,
                })
                .collect();
            let missed: Vec<Cell> = task.minerals.difference(&collected).copied().collect();
            if !missed.is_empty() {
                return Some(Shortfall::MineralsMissed(missed));
            }
            let energy = trace.final_energy(task).unwrap_or(0);
            (energy <= 0).then_some(Shortfall::EnergyNotPositive(energy))
        }
        SuccessRule::TransportAllItems { .. } => {
            let right = trace
                .items
                .as_ref()
                .map(|i| i.right.clone())
                .unwrap_or_default();
            let missing: Vec<String> = task
                .items
                .iter()
                .filter(|i| !right.contains(i))
                .cloned()
                .collect();
            (!missing.is_empty()).then_some(Shortfall::ItemsNotTransported(missing))
        }
        SuccessRule::KnightFullCover { goal, exceptions } => {
            let covered = trace.covered_cells(task.policies.knight_intermediates_count);
            let mut counts: BTreeMap<Cell, usize> = BTreeMap::new();
            for c in &covered {
                *counts.entry(*c).or_default() += 1;
            }
            let free = |c: &Cell| !exceptions.contains(c) && !task.obstacles.contains(c);
            let missing: Vec<Cell> = Cell::all()
                .filter(|c| free(c) && !counts.contains_key(c))
                .collect();
            let repeated: Vec<Cell> = counts
                .iter()
                .filter(|(_, n)| **n > 1)
                .map(|(c, _)| *c)
                .collect();
            if !missing.is_empty() || !repeated.is_empty() {
                return Some(Shortfall::CoverageMismatch { missing, repeated });
            }
            let last = trace.final_pose().cell;
            (last != *goal).then_some(Shortfall::GoalNotReached { goal: *goal, last })
        }
    }
}

fn matches_pattern(body: &[Statement], s: &StructuralChecks) -> bool {
    body.len() == s.procedure.len()
        && body
            .iter()
            .zip(&s.procedure)
            .all(|(stmt, step)| match stmt {
                Statement::Move {
                    dir,
                    speed,
                    duration,
                } => {
                    *dir == step.dir
                        && grid::displacement_cells(*speed, *duration) == Ok(step.cells)
                }
                _ => false,
            })
}

/// Repeat counts of loops (at any depth) whose body calls one of `names`.
fn loops_calling(stmts: &[Statement], names: &BTreeSet<&str>, out: &mut Vec<i64>) {
    for s in stmts {
        if let Statement::Repeat { times, body } = s {
            let calls = body
                .iter()
                .any(|b| matches!(b, Statement::Call { name } if names.contains(name.as_str())));
            if calls {
                out.push(*times);
            }
            loops_calling(body, names, out);
        }
    }
}

fn structural_shortfall(program: &BlockProgram, s: &StructuralChecks) -> Option<Shortfall> {
    let matching: BTreeSet<&str> = program
        .procedures
        .iter()
        .filter(|(_, body)| matches_pattern(body, s))
        .map(|(name, _)| name.as_str())
        .collect();
    if matching.is_empty() {
        let closest = program
            .procedures
            .iter()
            .min_by_key(|(_, body)| body.len().abs_diff(s.procedure.len()))
            .map(|(name, body)| (name.clone(), body.len()));
        return Some(Shortfall::NoMatchingProcedure {
            expected_steps: s.procedure.len(),
            closest,
        });
    }
    let mut counts = Vec::new();
    loops_calling(&program.main, &matching, &mut counts);
    if counts.contains(&s.loop_times) {
        None
    } else {
        Some(Shortfall::LoopCount {
            expected: s.loop_times,
            found: counts.first().copied(),
        })
    }
}

#[derive(Serialize)]
struct VerdictJson<'a> {
    text: &'a str,
    xml: Option<&'a str>,
    is_correct: bool,
    return_button: bool,
}

impl Verdict {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.json_view()).expect("verdict serializes")
    }

    fn json_view(&self) -> VerdictJson<'_> {
        VerdictJson {
            text: &self.feedback_text,
            xml: self.echo_xml.as_deref(),
            is_correct: self.is_correct,
            return_button: self.return_button,
        }
    }
}

/// The four-key verdict object: `text`, `xml`, `is_correct`, `return_button`.
pub fn render_feedback(v: &Verdict) -> String {
    serde_json::to_string_pretty(&v.json_view()).expect("verdict serializes")
}
