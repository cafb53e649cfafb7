//! Lowering of block programs to flat primitive actions, and unit-step
//! simulation of those actions against a task world.
//!
//! Every entered cell is processed in a fixed order: boundary, obstacle and
//! forbidden-cell checks, then (in energy tasks) the affordability check,
//! then the move cost, swamp penalty, mineral collection and trigger
//! activation. Knight tasks additionally track coverage and revisits, the
//! river task tracks item banks and safety.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::block_ast::{BlockProgram, KnightMove, LegOrder, Statement};
use crate::grid::{self, Cell, Delta, KinematicsError, Orientation, Pose, RelDir, Side};
use crate::tasks::TaskSpec;

/// Upper bound on the length of a lowered program.
pub const UNROLL_BUDGET: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TurnAngle {
    Quarter,
    Half,
}

impl TurnAngle {
    pub fn degrees(self) -> u32 {
        match self {
            TurnAngle::Quarter => 90,
            TurnAngle::Half => 180,
        }
    }

    pub fn from_degrees(d: u32) -> Option<Self> {
        match d {
            90 => Some(TurnAngle::Quarter),
            180 => Some(TurnAngle::Half),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Translate { dir: RelDir, cells: u32 },
    Rotate { side: Side, angle: TurnAngle },
    Knight(KnightMove),
    Pick { item: String },
    Place,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActionSequence(pub Vec<Action>);

impl ActionSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Action> {
        self.0.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LowerError {
    #[error("program expands to more than {limit} primitive actions")]
    UnrollBudgetExceeded { limit: usize },
    #[error("program is not executable: {0}")]
    InvalidProgram(String),
}

/// Flattens loops and procedure calls into primitive actions.
pub fn lower(p: &BlockProgram) -> Result<ActionSequence, LowerError> {
    p.check_calls()
        .map_err(|e| LowerError::InvalidProgram(e.to_string()))?;
    let size = expanded_len(p, &p.main)?;
    let mut out = Vec::with_capacity(size);
    emit(p, &p.main, &mut out)?;
    debug_assert_eq!(out.len(), size);
    Ok(ActionSequence(out))
}

fn expanded_len(p: &BlockProgram, stmts: &[Statement]) -> Result<usize, LowerError> {
    let over = LowerError::UnrollBudgetExceeded {
        limit: UNROLL_BUDGET,
    };
    let mut total = 0usize;
    for s in stmts {
        let n = match s {
            Statement::Repeat { times, body } => {
                if *times < 0 {
                    return Err(LowerError::InvalidProgram(format!(
                        "negative repeat count {times}"
                    )));
                }
                let inner = expanded_len(p, body)?;
                usize::try_from(*times)
                    .unwrap_or(usize::MAX)
                    .saturating_mul(inner)
            }
            // Call targets were checked for existence and acyclicity.
            Statement::Call { name } => expanded_len(p, &p.procedures[name])?,
            _ => 1,
        };
        total = total.saturating_add(n);
        if total > UNROLL_BUDGET {
            return Err(over);
        }
    }
    Ok(total)
}

fn emit(p: &BlockProgram, stmts: &[Statement], out: &mut Vec<Action>) -> Result<(), LowerError> {
    for s in stmts {
        match s {
            Statement::Move {
                dir,
                speed,
                duration,
            } => {
                let cells = grid::displacement_cells(*speed, *duration)
                    .map_err(|e| LowerError::InvalidProgram(e.to_string()))?;
                out.push(Action::Translate { dir: *dir, cells });
            }
            Statement::Turn { side, degrees } => {
                let angle = TurnAngle::from_degrees(*degrees).ok_or_else(|| {
                    LowerError::InvalidProgram(
                        KinematicsError::UnsupportedAngle(*degrees).to_string(),
                    )
                })?;
                out.push(Action::Rotate { side: *side, angle });
            }
            Statement::Knight(k) => out.push(Action::Knight(*k)),
            Statement::Pick { item } => out.push(Action::Pick { item: item.clone() }),
            Statement::Place => out.push(Action::Place),
            Statement::Repeat { times, body } => {
                for _ in 0..*times {
                    emit(p, body, out)?;
                }
            }
            Statement::Call { name } => emit(p, &p.procedures[name], out)?,
        }
    }
    Ok(())
}

/// A legal knight move walked as two axis-aligned legs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnightExpansion {
    /// The three traversed cells, landing last.
    pub cells: [Cell; 3],
    /// Which of `cells` are interior to a leg (not a leg end).
    pub interior: [bool; 3],
    pub end: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum KnightError {
    #[error("illegal knight move: merged displacement ({}, {}) is not an L shape", .0.dx, .0.dy)]
    IllegalKnightMove(Delta),
    #[error("knight move leaves the grid at {0}")]
    OutOfBounds(Cell),
}

/// Global displacement of the two knight legs, lateral leg first.
pub fn knight_legs(o: Orientation, k: &KnightMove) -> (Delta, Delta) {
    let lateral = match k.dir_x {
        Side::Left => RelDir::Left,
        Side::Right => RelDir::Right,
    };
    (
        grid::relative_to_global(o, lateral, k.steps_x),
        grid::relative_to_global(o, k.dir_y.rel(), k.steps_y),
    )
}

/// Resolves a knight move against the current pose. Legality is decided on
/// the merged global displacement before any leg is expanded.
pub fn expand_knight(p: Pose, k: &KnightMove) -> Result<KnightExpansion, KnightError> {
    let (lateral, vertical) = knight_legs(p.orientation, k);
    let merged = lateral + vertical;
    let shape = (merged.dx.abs(), merged.dy.abs());
    if shape != (1, 2) && shape != (2, 1) {
        return Err(KnightError::IllegalKnightMove(merged));
    }
    let legs = match k.leg_order {
        LegOrder::XFirst => [lateral, vertical],
        LegOrder::YFirst => [vertical, lateral],
    };
    let mut cells = [p.cell; 3];
    let mut interior = [false; 3];
    let mut cursor = p.cell;
    let mut i = 0;
    for leg in legs {
        let steps = leg.manhattan();
        for (n, step) in grid::unit_steps(leg).enumerate() {
            cursor = cursor.offset(step);
            if !cursor.on_grid() {
                return Err(KnightError::OutOfBounds(cursor));
            }
            cells[i] = cursor;
            interior[i] = (n as i32) + 1 < steps;
            i += 1;
        }
    }
    Ok(KnightExpansion {
        cells,
        interior,
        end: Pose {
            cell: cursor,
            orientation: p.orientation,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type")]
pub enum EventKind {
    MineralCollected {
        cell: Cell,
    },
    MineralSkippedNoEnergy {
        cell: Cell,
    },
    SwampEntered {
        cell: Cell,
    },
    TriggerActivated {
        label: String,
        cell: Cell,
    },
    ItemPicked {
        item: String,
        bank: Bank,
    },
    ItemPlaced {
        item: String,
        bank: Bank,
        cell: Cell,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Event {
    pub primitive: usize,
    pub step: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FaultKind {
    OutOfBounds,
    ObstacleCollision,
    IllegalKnightMove,
    RevisitViolation,
    EnergyDepleted,
    ForbiddenCell,
    PickWithoutItem,
    PlaceWithoutCarry,
    WrongBankAction,
}

impl FaultKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FaultKind::OutOfBounds => "OutOfBounds",
            FaultKind::ObstacleCollision => "ObstacleCollision",
            FaultKind::IllegalKnightMove => "IllegalKnightMove",
            FaultKind::RevisitViolation => "RevisitViolation",
            FaultKind::EnergyDepleted => "EnergyDepleted",
            FaultKind::ForbiddenCell => "ForbiddenCell",
            FaultKind::PickWithoutItem => "PickWithoutItem",
            FaultKind::PlaceWithoutCarry => "PlaceWithoutCarry",
            FaultKind::WrongBankAction => "WrongBankAction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fault {
    pub kind: FaultKind,
    pub primitive: usize,
    /// Unit-step ordinal: index in `visited` of the cell being entered, or of
    /// the current cell for non-motion actions.
    pub step: usize,
    pub cell: Cell,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EnergyCause {
    Move,
    Swamp,
    CollectCost,
    CollectGain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnergyEntry {
    pub primitive: usize,
    pub step: usize,
    pub cell: Cell,
    pub cause: EnergyCause,
    pub delta: i64,
    pub energy: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bank {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ItemState {
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub carried: Option<String>,
}

impl ItemState {
    fn bank_mut(&mut self, bank: Bank) -> &mut Vec<String> {
        match bank {
            Bank::Left => &mut self.left,
            Bank::Right => &mut self.right,
        }
    }
}

/// Unordered item pairs that may not be left together unattended.
pub const UNSAFE_PAIRS: [(&str, &str); 2] = [("wolf", "goat"), ("goat", "cabbage")];

pub fn unsafe_pair(bank: &[String]) -> Option<(&'static str, &'static str)> {
    UNSAFE_PAIRS
        .into_iter()
        .find(|(a, b)| bank.iter().any(|i| i == a) && bank.iter().any(|i| i == b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionTrace {
    /// Pose after every unit step and rotation, starting pose first.
    pub states: Vec<Pose>,
    /// Cells entered, start cell first; consecutive cells are adjacent.
    pub visited: Vec<Cell>,
    /// Indices into `visited` of knight-leg interior cells.
    pub jumped: Vec<usize>,
    pub events: Vec<Event>,
    pub faults: Vec<Fault>,
    pub energy: Option<Vec<EnergyEntry>>,
    pub items: Option<ItemState>,
    pub halted: bool,
}

impl ExecutionTrace {
    pub fn final_pose(&self) -> Pose {
        *self
            .states
            .last()
            .expect("trace always holds the start pose")
    }

    pub fn final_energy(&self, task: &TaskSpec) -> Option<i64> {
        let initial = task.energy?;
        Some(
            self.energy
                .as_ref()
                .and_then(|l| l.last())
                .map_or(initial, |e| e.energy),
        )
    }

    pub fn unit_steps(&self) -> usize {
        self.visited.len() - 1
    }

    /// Cells that count for coverage under `count_interior`, in visit order.
    pub fn covered_cells(&self, count_interior: bool) -> Vec<Cell> {
        let jumped: BTreeSet<usize> = self.jumped.iter().copied().collect();
        self.visited
            .iter()
            .enumerate()
            .filter(|(i, _)| count_interior || !jumped.contains(i))
            .map(|(_, c)| *c)
            .collect()
    }

    /// Canonical JSON form used for golden files and the wire protocol.
    pub fn to_canonical_json(&self) -> serde_json::Value {
        serde_json::json!({
            "states": self.states.iter()
                .map(|p| serde_json::json!([p.cell.x, p.cell.y, p.orientation.as_str()]))
                .collect::<Vec<_>>(),
            "visited": self.visited,
            "jumped": self.jumped,
            "events": self.events,
            "faults": self.faults,
            "energy": self.energy,
            "items": self.items,
            "halted": self.halted,
        })
    }

    pub fn to_canonical_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_canonical_json()).expect("trace serializes")
    }
}

struct Sim<'t> {
    task: &'t TaskSpec,
    pose: Pose,
    trace: ExecutionTrace,
    energy: i64,
    collected: BTreeSet<Cell>,
    next_trigger: usize,
    covered: BTreeSet<Cell>,
    primitive: usize,
}

/// What entering a cell did to the run.
enum Entry {
    Entered,
    Halted,
    /// A fault was recorded but the run goes on; the cell was not entered.
    Skipped,
}

impl<'t> Sim<'t> {
    fn new(task: &'t TaskSpec) -> Self {
        let start = task.start;
        let mut covered = BTreeSet::new();
        covered.insert(start.cell);
        Sim {
            task,
            pose: start,
            trace: ExecutionTrace {
                states: vec![start],
                visited: vec![start.cell],
                jumped: Vec::new(),
                events: Vec::new(),
                faults: Vec::new(),
                energy: task.energy.map(|_| Vec::new()),
                items: (!task.items.is_empty() || !task.river.is_empty()).then(|| ItemState {
                    left: task.items.clone(),
                    ..ItemState::default()
                }),
                halted: false,
            },
            energy: task.energy.unwrap_or(0),
            collected: BTreeSet::new(),
            next_trigger: 0,
            covered,
            primitive: 0,
        }
    }

    fn here(&self) -> usize {
        self.trace.visited.len() - 1
    }

    fn fault(&mut self, kind: FaultKind, step: usize, cell: Cell, detail: String) {
        self.trace.faults.push(Fault {
            kind,
            primitive: self.primitive,
            step,
            cell,
            detail,
        });
    }

    fn halt(&mut self, kind: FaultKind, cell: Cell, detail: String) -> Entry {
        let step = self.trace.visited.len();
        self.fault(kind, step, cell, detail);
        self.trace.halted = true;
        Entry::Halted
    }

    fn event(&mut self, step: usize, kind: EventKind) {
        self.trace.events.push(Event {
            primitive: self.primitive,
            step,
            kind,
        });
    }

    fn ledger(&mut self, step: usize, cell: Cell, cause: EnergyCause, delta: i64) {
        self.energy += delta;
        let energy = self.energy;
        if let Some(l) = self.trace.energy.as_mut() {
            l.push(EnergyEntry {
                primitive: self.primitive,
                step,
                cell,
                cause,
                delta,
                energy,
            });
        }
    }

    /// Moves one cell. `interior` marks a knight-leg interior cell.
    fn enter(&mut self, cell: Cell, interior: bool) -> Entry {
        let task = self.task;
        if !cell.on_grid() {
            if task.policies.halt_on_out_of_bounds {
                return self.halt(
                    FaultKind::OutOfBounds,
                    cell,
                    format!("left the grid at {cell}"),
                );
            }
            let step = self.trace.visited.len();
            self.fault(
                FaultKind::OutOfBounds,
                step,
                cell,
                format!("left the grid at {cell}"),
            );
            return Entry::Skipped;
        }
        let obstacle_blocks = !interior || task.policies.knight_intermediates_blocked;
        if obstacle_blocks && task.obstacles.contains(&cell) {
            return self.halt(
                FaultKind::ObstacleCollision,
                cell,
                format!("hit the obstacle at {cell}"),
            );
        }
        if task.forbidden.contains(&cell) {
            return self.halt(
                FaultKind::ForbiddenCell,
                cell,
                format!("entered the forbidden cell {cell}"),
            );
        }
        let swamp = task.swamps.contains(&cell);
        if task.energy.is_some() {
            let cost = 1 + if swamp { 2 } else { 0 };
            if self.energy < cost {
                let detail = format!(
                    "needs {cost} energy to enter {cell} but has {}",
                    self.energy
                );
                return self.halt(FaultKind::EnergyDepleted, cell, detail);
            }
        }

        self.pose.cell = cell;
        self.trace.visited.push(cell);
        self.trace.states.push(self.pose);
        let step = self.here();
        if interior {
            self.trace.jumped.push(step);
        }

        if task.energy.is_some() {
            self.ledger(step, cell, EnergyCause::Move, -1);
            if swamp {
                self.ledger(step, cell, EnergyCause::Swamp, -2);
            }
        }
        if swamp {
            self.event(step, EventKind::SwampEntered { cell });
        }
        if task.minerals.contains(&cell) && !self.collected.contains(&cell) {
            if task.energy.is_none() || self.energy >= 1 {
                if task.energy.is_some() {
                    self.ledger(step, cell, EnergyCause::CollectCost, -1);
                    self.ledger(step, cell, EnergyCause::CollectGain, 3);
                }
                self.collected.insert(cell);
                self.event(step, EventKind::MineralCollected { cell });
            } else {
                self.event(step, EventKind::MineralSkippedNoEnergy { cell });
            }
        }
        if let Some(t) = task.triggers.get(self.next_trigger) {
            if t.cell == cell {
                let label = t.label.clone();
                self.next_trigger += 1;
                self.event(step, EventKind::TriggerActivated { label, cell });
            }
        }
        if task.is_knight_task()
            && (!interior || task.policies.knight_intermediates_count)
            && !task.obstacles.contains(&cell)
            && !self.covered.insert(cell)
        {
            self.fault(
                FaultKind::RevisitViolation,
                step,
                cell,
                format!("revisited {cell}"),
            );
        }
        self.check_banks(step);
        Entry::Entered
    }

    fn check_banks(&mut self, step: usize) {
        if !self.task.policies.safety_rules {
            return;
        }
        let (Some((left_end, right_end)), Some(items)) =
            (self.task.river_ends(), &self.trace.items)
        else {
            return;
        };
        let cell = self.pose.cell;
        let unattended = if cell == right_end {
            (Bank::Left, &items.left)
        } else if cell == left_end {
            (Bank::Right, &items.right)
        } else {
            return;
        };
        if let Some((a, b)) = unsafe_pair(unattended.1) {
            let detail = format!(
                "the {a} and the {b} were left alone on the {:?} bank",
                unattended.0
            )
            .to_lowercase();
            self.fault(FaultKind::WrongBankAction, step, cell, detail);
        }
    }

    fn translate(&mut self, dir: RelDir, cells: u32) {
        let unit = grid::relative_to_global(self.pose.orientation, dir, 1);
        for _ in 0..cells {
            match self.enter(self.pose.cell.offset(unit), false) {
                Entry::Entered => {}
                Entry::Halted | Entry::Skipped => return,
            }
        }
    }

    fn knight(&mut self, k: &KnightMove) {
        let here = self.pose.cell;
        let expansion = match expand_knight(self.pose, k) {
            Ok(e) => e,
            Err(KnightError::IllegalKnightMove(d)) => {
                let step = self.here();
                let detail = format!("displacement ({}, {}) is not an L shape", d.dx, d.dy);
                self.fault(FaultKind::IllegalKnightMove, step, here, detail);
                return;
            }
            Err(KnightError::OutOfBounds(cell)) => {
                if self.task.policies.halt_on_out_of_bounds {
                    self.halt(
                        FaultKind::OutOfBounds,
                        cell,
                        format!("knight move leaves the grid at {cell}"),
                    );
                } else {
                    let step = self.trace.visited.len();
                    self.fault(
                        FaultKind::OutOfBounds,
                        step,
                        cell,
                        format!("knight move leaves the grid at {cell}"),
                    );
                }
                return;
            }
        };
        // The move is checked as a whole before the robot jumps.
        let policies = self.task.policies;
        for (cell, interior) in expansion.cells.iter().zip(expansion.interior) {
            if (!interior || policies.knight_intermediates_blocked)
                && self.task.obstacles.contains(cell)
            {
                self.halt(
                    FaultKind::ObstacleCollision,
                    *cell,
                    format!("knight move lands on the obstacle at {cell}"),
                );
                return;
            }
        }
        for (cell, interior) in expansion.cells.iter().zip(expansion.interior) {
            if !matches!(self.enter(*cell, interior), Entry::Entered) {
                return;
            }
        }
    }

    fn rotate(&mut self, side: Side, angle: TurnAngle) {
        self.pose.orientation = grid::rotate(self.pose.orientation, side, angle.degrees())
            .expect("turn angles are validated when lowering");
        self.trace.states.push(self.pose);
    }

    /// Where the robot may reach a bank from: the bank it faces, if any.
    fn facing_bank(&self) -> Option<Bank> {
        let (left_end, right_end) = self.task.river_ends()?;
        match (self.pose.cell, self.pose.orientation) {
            (c, Orientation::West) if c == left_end => Some(Bank::Left),
            (c, Orientation::East) if c == right_end => Some(Bank::Right),
            _ => None,
        }
    }

    fn adjacent_bank(&self) -> Option<Bank> {
        let (left_end, right_end) = self.task.river_ends()?;
        if self.pose.cell == right_end {
            Some(Bank::Right)
        } else if self.pose.cell == left_end {
            Some(Bank::Left)
        } else {
            None
        }
    }

    fn pick(&mut self, item: &str) {
        let step = self.here();
        let cell = self.pose.cell;
        let bank = self.facing_bank();
        let Some(items) = self.trace.items.as_mut() else {
            self.fault(
                FaultKind::PickWithoutItem,
                step,
                cell,
                format!("there is no {item} to pick up here"),
            );
            return;
        };
        if let Some(held) = &items.carried {
            let detail = format!("already carrying the {held}");
            self.fault(FaultKind::WrongBankAction, step, cell, detail);
            return;
        }
        let Some(bank) = bank else {
            let detail = format!(
                "items can only be picked up at a river end facing the bank, not at {cell}"
            );
            self.fault(FaultKind::WrongBankAction, step, cell, detail);
            return;
        };
        let side = items.bank_mut(bank);
        let Some(pos) = side.iter().position(|i| i == item) else {
            let detail = format!("the {item} is not on the {bank:?} bank").to_lowercase();
            self.fault(FaultKind::PickWithoutItem, step, cell, detail);
            return;
        };
        let taken = side.remove(pos);
        items.carried = Some(taken.clone());
        self.event(step, EventKind::ItemPicked { item: taken, bank });
    }

    fn place(&mut self) {
        let step = self.here();
        let cell = self.pose.cell;
        let bank = self.adjacent_bank();
        let Some(items) = self.trace.items.as_mut().filter(|i| i.carried.is_some()) else {
            self.fault(
                FaultKind::PlaceWithoutCarry,
                step,
                cell,
                "nothing is being carried".into(),
            );
            return;
        };
        let Some(bank) = bank else {
            let detail = format!("items can only be placed from a river end, not at {cell}");
            self.fault(FaultKind::WrongBankAction, step, cell, detail);
            return;
        };
        let item = items.carried.take().expect("checked above");
        items.bank_mut(bank).push(item.clone());
        self.event(step, EventKind::ItemPlaced { item, bank, cell });
    }
}

/// Simulates `a` on the task world. Never fails: problems become faults.
pub fn execute(a: &ActionSequence, t: &TaskSpec) -> ExecutionTrace {
    let mut sim = Sim::new(t);
    for (i, action) in a.iter().enumerate() {
        sim.primitive = i;
        match action {
            Action::Translate { dir, cells } => sim.translate(*dir, *cells),
            Action::Rotate { side, angle } => sim.rotate(*side, *angle),
            Action::Knight(k) => sim.knight(k),
            Action::Pick { item } => sim.pick(item),
            Action::Place => sim.place(),
        }
        if sim.trace.halted {
            break;
        }
    }
    sim.trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block_ast::Vertical;
    use crate::tasks;
    use Orientation::*;

    fn tr(dir: RelDir, cells: u32) -> Action {
        Action::Translate { dir, cells }
    }

    fn knight(
        dir_x: Side,
        steps_x: u32,
        dir_y: Vertical,
        steps_y: u32,
        leg_order: LegOrder,
    ) -> KnightMove {
        KnightMove {
            dir_x,
            steps_x,
            dir_y,
            steps_y,
            leg_order,
        }
    }

    fn mv(dir: RelDir, speed: f64, duration: f64) -> Statement {
        Statement::Move {
            dir,
            speed,
            duration,
        }
    }

    #[test]
    fn lower_reference_tile_program() {
        let body = vec![
            mv(RelDir::Forward, 300.0, 4.0),
            mv(RelDir::Left, 300.0, 1.0),
            mv(RelDir::Backward, 300.0, 4.0),
            mv(RelDir::Left, 300.0, 1.0),
        ];
        let p = BlockProgram::new(vec![
            Statement::Repeat {
                times: 2,
                body: vec![Statement::Call {
                    name: "clean_2_rows".into(),
                }],
            },
            mv(RelDir::Forward, 300.0, 4.0),
        ])
        .with_procedure("clean_2_rows", body);
        let a = lower(&p).unwrap();
        let half = [
            tr(RelDir::Forward, 4),
            tr(RelDir::Left, 1),
            tr(RelDir::Backward, 4),
            tr(RelDir::Left, 1),
        ];
        let mut expected: Vec<Action> = half.iter().chain(half.iter()).cloned().collect();
        expected.push(tr(RelDir::Forward, 4));
        assert_eq!(a.0, expected);
    }

    #[test]
    fn lower_zero_repeat_and_rounding() {
        let p = BlockProgram::new(vec![
            Statement::Repeat {
                times: 0,
                body: vec![mv(RelDir::Forward, 300.0, 1.0)],
            },
            mv(RelDir::Forward, 100.0, 2.0),
        ]);
        assert_eq!(lower(&p).unwrap().0, vec![tr(RelDir::Forward, 1)]);
    }

    #[test]
    fn lower_budget_guard() {
        let p = BlockProgram::new(vec![Statement::Repeat {
            times: 10_001,
            body: vec![Statement::Place],
        }]);
        assert_eq!(
            lower(&p),
            Err(LowerError::UnrollBudgetExceeded {
                limit: UNROLL_BUDGET
            })
        );
        let p = BlockProgram::new(vec![Statement::Repeat {
            times: i64::MAX,
            body: vec![Statement::Place],
        }]);
        assert!(lower(&p).is_err());
        let p = BlockProgram::new(vec![Statement::Repeat {
            times: 10_000,
            body: vec![Statement::Place],
        }]);
        assert_eq!(lower(&p).unwrap().len(), 10_000);
    }

    #[test]
    fn lower_rejects_bad_turns() {
        let p = BlockProgram::new(vec![Statement::Turn {
            side: Side::Left,
            degrees: 45,
        }]);
        assert!(matches!(lower(&p), Err(LowerError::InvalidProgram(_))));
    }

    #[test]
    fn knight_expansion_examples() {
        let e = expand_knight(
            Pose::new(0, 0, North),
            &knight(Side::Right, 2, Vertical::Forward, 1, LegOrder::XFirst),
        )
        .unwrap();
        assert_eq!(e.cells, [Cell::new(1, 0), Cell::new(2, 0), Cell::new(2, 1)]);
        assert_eq!(e.interior, [true, false, false]);
        assert_eq!(e.end, Pose::new(2, 1, North));

        let e = expand_knight(
            Pose::new(0, 2, North),
            &knight(Side::Right, 1, Vertical::Forward, 2, LegOrder::YFirst),
        )
        .unwrap();
        assert_eq!(e.cells, [Cell::new(0, 3), Cell::new(0, 4), Cell::new(1, 4)]);

        let e = expand_knight(
            Pose::new(0, 2, North),
            &knight(Side::Right, 1, Vertical::Forward, 2, LegOrder::XFirst),
        )
        .unwrap();
        assert_eq!(e.cells, [Cell::new(1, 2), Cell::new(1, 3), Cell::new(1, 4)]);
        assert_eq!(e.interior, [false, true, false]);

        assert_eq!(
            expand_knight(
                Pose::new(0, 0, North),
                &knight(Side::Right, 2, Vertical::Forward, 2, LegOrder::XFirst)
            ),
            Err(KnightError::IllegalKnightMove(Delta::new(2, 2)))
        );
        assert_eq!(
            expand_knight(
                Pose::new(0, 0, North),
                &knight(Side::Left, 1, Vertical::Forward, 2, LegOrder::YFirst)
            ),
            Err(KnightError::OutOfBounds(Cell::new(-1, 2)))
        );
        // Facing East, "forward" is +x.
        let e = expand_knight(
            Pose::new(0, 0, East),
            &knight(Side::Left, 1, Vertical::Forward, 2, LegOrder::YFirst),
        )
        .unwrap();
        assert_eq!(e.end.cell, Cell::new(2, 1));
    }

    #[test]
    fn empty_sequence() {
        let t = tasks::tile_cleaning();
        let trace = execute(&ActionSequence::default(), &t);
        assert_eq!(trace.states, vec![t.start]);
        assert_eq!(trace.visited, vec![t.start.cell]);
        assert!(trace.events.is_empty() && trace.faults.is_empty());
    }

    #[test]
    fn out_of_bounds_halts() {
        let t = tasks::tile_cleaning();
        // Facing East at (0,0): right is -y.
        let a = ActionSequence(vec![
            tr(RelDir::Forward, 2),
            tr(RelDir::Right, 1),
            tr(RelDir::Forward, 1),
        ]);
        let trace = execute(&a, &t);
        assert!(trace.halted);
        assert_eq!(trace.faults.len(), 1);
        let f = &trace.faults[0];
        assert_eq!(
            (f.kind, f.primitive, f.step, f.cell),
            (FaultKind::OutOfBounds, 1, 3, Cell::new(2, -1))
        );
        assert_eq!(trace.final_pose(), Pose::new(2, 0, East));
        assert_eq!(trace.visited.len(), 3);
    }

    #[test]
    fn out_of_bounds_can_continue() {
        let mut t = tasks::tile_cleaning();
        t.policies.halt_on_out_of_bounds = false;
        let a = ActionSequence(vec![tr(RelDir::Backward, 1), tr(RelDir::Forward, 1)]);
        let trace = execute(&a, &t);
        assert!(!trace.halted);
        assert_eq!(trace.faults.len(), 1);
        assert_eq!(trace.final_pose().cell, Cell::new(1, 0));
    }

    #[test]
    fn mineral_wrong_route_ledger() {
        let t = tasks::mineral_collection();
        let a = ActionSequence(vec![
            tr(RelDir::Right, 3),
            tr(RelDir::Forward, 3),
            tr(RelDir::Left, 3),
        ]);
        let trace = execute(&a, &t);
        let after_each_cell: Vec<(Cell, i64)> = {
            let ledger = trace.energy.as_ref().unwrap();
            trace.visited[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| (*c, ledger.iter().rfind(|e| e.step == i + 1).unwrap().energy))
                .collect()
        };
        // Independently worked by hand: move -1, swamp -2, collect -1 +3.
        let expected = [
            ((1, 0), 7),
            ((2, 0), 6),
            ((3, 0), 5),
            ((3, 1), 4),
            ((3, 2), 3),
            ((3, 3), 4),
            ((2, 3), 1),
            ((1, 3), 0),
        ];
        let expected: Vec<(Cell, i64)> = expected
            .iter()
            .map(|&((x, y), e)| (Cell::new(x, y), e))
            .collect();
        assert_eq!(after_each_cell, expected);
        assert_eq!(trace.final_pose().cell, Cell::new(1, 3));
        assert_eq!(trace.final_energy(&t), Some(0));
        assert!(trace.events.iter().any(|e| e.kind
            == EventKind::MineralSkippedNoEnergy {
                cell: Cell::new(1, 3)
            }));
        assert_eq!(trace.faults.len(), 1);
        assert_eq!(trace.faults[0].kind, FaultKind::EnergyDepleted);
        assert_eq!(trace.faults[0].cell, Cell::new(0, 3));
    }

    #[test]
    fn minerals_collected_once() {
        let t = tasks::mineral_collection();
        let a = ActionSequence(vec![
            tr(RelDir::Right, 1),
            tr(RelDir::Left, 1),
            tr(RelDir::Right, 1),
        ]);
        let trace = execute(&a, &t);
        let collected = trace
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::MineralCollected { .. }))
            .count();
        assert_eq!(collected, 1);
        assert_eq!(trace.final_energy(&t), Some(6 - 3 - 1 + 3));
    }

    #[test]
    fn triggers_fire_in_order_only() {
        let t = tasks::secret_realm();
        let a = ActionSequence(vec![
            tr(RelDir::Forward, 1),
            tr(RelDir::Right, 3),
            tr(RelDir::Forward, 1),
            tr(RelDir::Backward, 2),
            tr(RelDir::Forward, 1),
        ]);
        let trace = execute(&a, &t);
        let labels: Vec<&str> = trace
            .events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::TriggerActivated { label, .. } => Some(label.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(labels, ["A", "B", "C"]);
    }

    #[test]
    fn obstacle_halts_without_entering() {
        let t = tasks::secret_realm();
        let a = ActionSequence(vec![tr(RelDir::Right, 1), tr(RelDir::Forward, 1)]);
        let trace = execute(&a, &t);
        assert!(trace.halted);
        assert_eq!(trace.faults[0].kind, FaultKind::ObstacleCollision);
        assert_eq!(trace.faults[0].cell, Cell::new(2, 1));
        assert_eq!(trace.visited, vec![Cell::new(1, 1)]);
    }

    #[test]
    fn illegal_knight_recorded_and_continues() {
        let t = tasks::knights_tour();
        let a = ActionSequence(vec![
            Action::Knight(knight(
                Side::Right,
                2,
                Vertical::Forward,
                2,
                LegOrder::XFirst,
            )),
            Action::Knight(knight(
                Side::Right,
                2,
                Vertical::Forward,
                1,
                LegOrder::XFirst,
            )),
        ]);
        let trace = execute(&a, &t);
        assert_eq!(trace.faults.len(), 1);
        assert_eq!(trace.faults[0].kind, FaultKind::IllegalKnightMove);
        assert_eq!(trace.final_pose().cell, Cell::new(2, 1));
        assert_eq!(trace.jumped, vec![1]);
    }

    #[test]
    fn knight_revisit_is_recorded() {
        let t = tasks::knights_tour();
        let a = ActionSequence(vec![
            Action::Knight(knight(
                Side::Right,
                2,
                Vertical::Forward,
                1,
                LegOrder::XFirst,
            )),
            Action::Knight(knight(
                Side::Left,
                2,
                Vertical::Backward,
                1,
                LegOrder::YFirst,
            )),
        ]);
        let trace = execute(&a, &t);
        let kinds: Vec<_> = trace.faults.iter().map(|f| (f.kind, f.primitive)).collect();
        // Second move walks back over (2,0) then (1,0) and lands on (0,0).
        assert_eq!(
            kinds,
            vec![
                (FaultKind::RevisitViolation, 1),
                (FaultKind::RevisitViolation, 1),
                (FaultKind::RevisitViolation, 1)
            ]
        );
        assert!(!trace.halted);
    }

    #[test]
    fn knight_landing_on_obstacle_halts_but_jumping_over_is_allowed() {
        let t = tasks::knights_tour();
        // (2,3) -> (3,1): lands on the obstacle.
        let mut t2 = t.clone();
        t2.start = Pose::new(2, 3, North);
        let hit = ActionSequence(vec![Action::Knight(knight(
            Side::Right,
            1,
            Vertical::Backward,
            2,
            LegOrder::XFirst,
        ))]);
        let trace = execute(&hit, &t2);
        assert_eq!(trace.faults[0].kind, FaultKind::ObstacleCollision);
        assert_eq!(trace.visited.len(), 1);

        // (3,2) -> (2,0) y-first jumps over the obstacle at (3,1).
        let mut t3 = t.clone();
        t3.start = Pose::new(3, 2, North);
        let over = ActionSequence(vec![Action::Knight(knight(
            Side::Left,
            1,
            Vertical::Backward,
            2,
            LegOrder::YFirst,
        ))]);
        let trace = execute(&over, &t3);
        assert!(trace.faults.is_empty(), "{:?}", trace.faults);
        assert_eq!(trace.final_pose().cell, Cell::new(2, 0));
        t3.policies.knight_intermediates_blocked = true;
        let trace = execute(&over, &t3);
        assert_eq!(trace.faults[0].kind, FaultKind::ObstacleCollision);
        assert_eq!(trace.faults[0].cell, Cell::new(3, 1));
    }

    #[test]
    fn river_pick_place_and_forbidden_cell() {
        let t = tasks::river_crossing();
        let a = ActionSequence(vec![
            Action::Pick {
                item: "goat".into(),
            },
            Action::Rotate {
                side: Side::Left,
                angle: TurnAngle::Half,
            },
            tr(RelDir::Forward, 2),
            Action::Place,
            tr(RelDir::Forward, 1),
        ]);
        let trace = execute(&a, &t);
        let items = trace.items.as_ref().unwrap();
        assert_eq!(items.right, vec!["goat".to_string()]);
        assert_eq!(items.left, vec!["wolf".to_string(), "cabbage".to_string()]);
        assert_eq!(trace.faults.len(), 1);
        assert_eq!(trace.faults[0].kind, FaultKind::ForbiddenCell);
        assert_eq!(trace.final_pose().cell, Cell::new(2, 0));
    }

    #[test]
    fn river_safety_and_bad_actions() {
        let t = tasks::river_crossing();
        let a = ActionSequence(vec![
            Action::Place,
            Action::Pick {
                item: "dragon".into(),
            },
            Action::Pick {
                item: "wolf".into(),
            },
            Action::Pick {
                item: "goat".into(),
            },
            Action::Rotate {
                side: Side::Right,
                angle: TurnAngle::Half,
            },
            tr(RelDir::Forward, 2),
        ]);
        let trace = execute(&a, &t);
        let kinds: Vec<_> = trace.faults.iter().map(|f| f.kind).collect();
        assert_eq!(
            kinds,
            vec![
                FaultKind::PlaceWithoutCarry,
                FaultKind::PickWithoutItem,
                FaultKind::WrongBankAction,
                FaultKind::WrongBankAction
            ]
        );
        assert!(trace.faults[3].detail.contains("goat"));

        let mut relaxed = t.clone();
        relaxed.policies.safety_rules = false;
        let trace = execute(&a, &relaxed);
        assert_eq!(trace.faults.len(), 3);
    }

    #[test]
    fn pick_requires_facing_the_bank() {
        let t = tasks::river_crossing();
        let a = ActionSequence(vec![
            Action::Rotate {
                side: Side::Left,
                angle: TurnAngle::Quarter,
            },
            Action::Pick {
                item: "goat".into(),
            },
        ]);
        let trace = execute(&a, &t);
        assert_eq!(trace.faults[0].kind, FaultKind::WrongBankAction);
    }

    #[test]
    fn rotation_records_state() {
        let t = tasks::knights_tour();
        let a = ActionSequence(vec![Action::Rotate {
            side: Side::Right,
            angle: TurnAngle::Quarter,
        }]);
        let trace = execute(&a, &t);
        assert_eq!(
            trace.states,
            vec![Pose::new(0, 0, North), Pose::new(0, 0, East)]
        );
        assert_eq!(trace.visited.len(), 1);
    }
}
