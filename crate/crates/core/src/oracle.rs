//! Brute-force oracles: breadth-first searches over the grid and over
//! river bank states, and a replay of the published knight tour.
//!
//! These search the problem directly rather than going through the
//! executor, so they can be used to cross-check it.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::block_ast::{BlockProgram, KnightMove, LegOrder, Statement, Vertical};
use crate::executor::{self, unsafe_pair, Bank, ExecutionTrace};
use crate::grid::{Cell, Orientation, RelDir, Side};
use crate::tasks::{self, Policies, TaskSpec};
use crate::verdict;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{to} is unreachable from {from}")]
    Unreachable { from: Cell, to: Cell },
    #[error("the river crossing has no safe plan")]
    Unsolvable,
    #[error("task `{0}` has no river")]
    NotARiverTask(String),
}

/// Fewest unit steps between two cells, moving 4-connected around obstacles.
pub fn shortest_path_len(world: &TaskSpec, from: Cell, to: Cell) -> Result<u32, OracleError> {
    shortest_path(world, from, to).map(|p| (p.len() - 1) as u32)
}

/// One shortest cell path, both ends included.
pub fn shortest_path(world: &TaskSpec, from: Cell, to: Cell) -> Result<Vec<Cell>, OracleError> {
    let unreachable = OracleError::Unreachable { from, to };
    let blocked = |c: &Cell| world.obstacles.contains(c) || world.forbidden.contains(c);
    if !from.on_grid() || !to.on_grid() || blocked(&from) || blocked(&to) {
        return Err(unreachable);
    }
    let mut parent: HashMap<Cell, Cell> = HashMap::new();
    let mut queue = VecDeque::from([from]);
    parent.insert(from, from);
    while let Some(c) = queue.pop_front() {
        if c == to {
            let mut path = vec![c];
            let mut cur = c;
            while cur != from {
                cur = parent[&cur];
                path.push(cur);
            }
            path.reverse();
            return Ok(path);
        }
        for n in c.neighbours() {
            if !blocked(&n) && !parent.contains_key(&n) {
                parent.insert(n, c);
                queue.push_back(n);
            }
        }
    }
    Err(unreachable)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Crossing {
    pub to: Bank,
    pub cargo: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossingPlan {
    pub crossings: Vec<Crossing>,
    /// Bank states explored by the search.
    pub states_explored: usize,
}

/// Bank state: robot side plus a bitmask of items on the right bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct BankState {
    robot_right: bool,
    right_mask: u32,
}

/// Minimum-crossing plan moving every item to the right bank. The robot
/// carries at most one item per crossing; with safety rules on, the bank it
/// leaves behind must not hold an unsafe pair.
pub fn river_solver(t: &TaskSpec) -> Result<CrossingPlan, OracleError> {
    if t.river.is_empty() {
        return Err(OracleError::NotARiverTask(t.id.clone()));
    }
    let items = &t.items;
    assert!(items.len() < 32, "bank states are kept in a u32 mask");
    let all = (1u32 << items.len()) - 1;
    let bank_of = |mask: u32, right: bool| -> Vec<String> {
        items
            .iter()
            .enumerate()
            .filter(|(i, _)| ((mask >> i) & 1 == 1) == right)
            .map(|(_, s)| s.clone())
            .collect()
    };

    let start = BankState {
        robot_right: false,
        right_mask: 0,
    };
    let mut parent: HashMap<BankState, (BankState, Option<usize>)> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    let mut seen = BTreeSet::from([(false, 0u32)]);
    let mut goal = None;
    while let Some(s) = queue.pop_front() {
        if s.right_mask == all {
            goal = Some(s);
            break;
        }
        let here: Vec<usize> = (0..items.len())
            .filter(|i| ((s.right_mask >> i) & 1 == 1) == s.robot_right)
            .collect();
        for cargo in here.iter().map(|&i| Some(i)).chain(std::iter::once(None)) {
            let mask = cargo.map_or(s.right_mask, |i| s.right_mask ^ (1 << i));
            let next = BankState {
                robot_right: !s.robot_right,
                right_mask: mask,
            };
            if t.policies.safety_rules && unsafe_pair(&bank_of(mask, s.robot_right)).is_some() {
                continue;
            }
            if seen.insert((next.robot_right, next.right_mask)) {
                parent.insert(next, (s, cargo));
                queue.push_back(next);
            }
        }
    }
    let goal = goal.ok_or(OracleError::Unsolvable)?;
    let mut crossings = Vec::new();
    let mut cur = goal;
    while cur != start {
        let (prev, cargo) = parent[&cur];
        crossings.push(Crossing {
            to: if cur.robot_right {
                Bank::Right
            } else {
                Bank::Left
            },
            cargo: cargo.map(|i| items[i].clone()),
        });
        cur = prev;
    }
    crossings.reverse();
    Ok(CrossingPlan {
        crossings,
        states_explored: seen.len(),
    })
}

/// A block program that carries out `plan` on a river task whose robot
/// starts at the left river end facing the left bank.
pub fn crossing_program(t: &TaskSpec, plan: &CrossingPlan) -> BlockProgram {
    let width = t.river.len().saturating_sub(1) as f64;
    let mut main = Vec::new();
    for c in &plan.crossings {
        if let Some(item) = &c.cargo {
            main.push(Statement::Pick { item: item.clone() });
        }
        main.push(Statement::Turn {
            side: Side::Left,
            degrees: 180,
        });
        main.push(Statement::Move {
            dir: RelDir::Forward,
            speed: 300.0,
            duration: width,
        });
        if c.cargo.is_some() {
            main.push(Statement::Place);
        }
    }
    BlockProgram::new(main)
}

/// The published seven-move tour: landing cells, the two cells listed for
/// each move, and the leg order that reproduces them.
pub const KNIGHT_REFERENCE_START: Cell = Cell::new(0, 0);
pub const KNIGHT_REFERENCE_PAIRS: [[(i32, i32); 2]; 7] = [
    [(2, 0), (2, 1)],
    [(0, 1), (0, 2)],
    [(0, 4), (1, 4)],
    [(1, 2), (2, 2)],
    [(2, 4), (3, 4)],
    [(3, 2), (4, 2)],
    [(4, 0), (3, 0)],
];
pub const KNIGHT_REFERENCE_LEG_ORDERS: [LegOrder; 7] = [
    LegOrder::XFirst,
    LegOrder::XFirst,
    LegOrder::YFirst,
    LegOrder::YFirst,
    LegOrder::YFirst,
    LegOrder::YFirst,
    LegOrder::YFirst,
];

/// Knight moves for the reference tour, for a robot facing North.
pub fn knight_reference_program() -> BlockProgram {
    let mut from = KNIGHT_REFERENCE_START;
    let mut main = Vec::new();
    for (pair, order) in KNIGHT_REFERENCE_PAIRS
        .iter()
        .zip(KNIGHT_REFERENCE_LEG_ORDERS)
    {
        let to = Cell::new(pair[1].0, pair[1].1);
        let (dx, dy) = (to.x - from.x, to.y - from.y);
        main.push(Statement::Knight(KnightMove {
            dir_x: if dx >= 0 { Side::Right } else { Side::Left },
            steps_x: dx.unsigned_abs(),
            dir_y: if dy >= 0 {
                Vertical::Forward
            } else {
                Vertical::Backward
            },
            steps_y: dy.unsigned_abs(),
            leg_order: order,
        }));
        from = to;
    }
    BlockProgram::new(main)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct KnightReferenceReport {
    pub covered_cells: usize,
    pub distinct_cells: usize,
    pub free_cells: usize,
    pub final_cell: Cell,
    pub landed_on_obstacle: bool,
    pub accepted_by_checker: bool,
    pub violations: Vec<String>,
}

impl KnightReferenceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Replays the reference tour through the executor under `policies` and
/// checks: every free cell covered exactly once, no obstacle landing, the
/// listed cell pairs are the last two cells of each move, and the tour ends
/// on the goal.
pub fn knight_reference_check(policies: Policies) -> KnightReferenceReport {
    let mut task = tasks::knights_tour();
    task.policies = policies;
    let program = knight_reference_program();
    let actions = executor::lower(&program).expect("reference program lowers");
    let trace = executor::execute(&actions, &task);
    let mut violations = Vec::new();

    for f in &trace.faults {
        violations.push(format!("{} at {}: {}", f.kind.as_str(), f.cell, f.detail));
    }

    // Each move contributes three cells after the start.
    for (i, pair) in KNIGHT_REFERENCE_PAIRS.iter().enumerate() {
        let idx = 3 * (i + 1);
        let got = (
            trace.visited.get(idx - 1).copied(),
            trace.visited.get(idx).copied(),
        );
        let want = (
            Some(Cell::new(pair[0].0, pair[0].1)),
            Some(Cell::new(pair[1].0, pair[1].1)),
        );
        if got != want {
            violations.push(format!(
                "move {} does not pass through the listed cells",
                i + 1
            ));
        }
    }

    let covered = trace.covered_cells(policies.knight_intermediates_count);
    let distinct: BTreeSet<Cell> = covered.iter().copied().collect();
    let free = Cell::all().filter(|c| !task.obstacles.contains(c)).count();
    if covered.len() != free || distinct.len() != free {
        violations.push(format!(
            "covers {} cells ({} distinct), but {free} free cells must each be covered once",
            covered.len(),
            distinct.len()
        ));
    }
    let landings: Vec<Cell> = KNIGHT_REFERENCE_PAIRS
        .iter()
        .map(|p| Cell::new(p[1].0, p[1].1))
        .collect();
    let landed_on_obstacle = landings.iter().any(|c| task.obstacles.contains(c));
    if landed_on_obstacle {
        violations.push("a move lands on an obstacle".into());
    }
    let final_cell = trace.final_pose().cell;
    if final_cell != Cell::new(3, 0) {
        violations.push(format!("tour ends at {final_cell}, not (3,0)"));
    }
    let accepted_by_checker = verdict::check(&trace, &program, &task).is_correct;

    KnightReferenceReport {
        covered_cells: covered.len(),
        distinct_cells: distinct.len(),
        free_cells: free,
        final_cell,
        landed_on_obstacle,
        accepted_by_checker,
        violations,
    }
}

/// Shortest route (in cells entered) that collects every mineral and ends
/// with energy at least 1, searched over (cell, collected set, energy).
pub fn mineral_route_search(t: &TaskSpec) -> Option<Vec<Cell>> {
    let initial = t.energy?;
    let minerals: Vec<Cell> = t.minerals.iter().copied().collect();
    let all = (1u32 << minerals.len()) - 1;
    type State = (Cell, u32, i64);
    let start: State = (t.start.cell, 0, initial);
    let mut parent: HashMap<State, State> = HashMap::from([(start, start)]);
    let mut queue = VecDeque::from([start]);
    while let Some(s @ (cell, mask, energy)) = queue.pop_front() {
        if mask == all && energy >= 1 {
            let mut route = vec![cell];
            let mut cur = s;
            while cur != start {
                cur = parent[&cur];
                route.push(cur.0);
            }
            route.reverse();
            return Some(route);
        }
        for n in cell.neighbours() {
            if t.obstacles.contains(&n) || t.forbidden.contains(&n) {
                continue;
            }
            let cost = 1 + if t.swamps.contains(&n) { 2 } else { 0 };
            if energy < cost {
                continue;
            }
            let mut e = energy - cost;
            let mut m = mask;
            if let Some(i) = minerals.iter().position(|c| *c == n) {
                if m & (1 << i) == 0 && e >= 1 {
                    e += 2;
                    m |= 1 << i;
                }
            }
            let next = (n, m, e);
            if let std::collections::hash_map::Entry::Vacant(v) = parent.entry(next) {
                v.insert(s);
                queue.push_back(next);
            }
        }
    }
    None
}

/// Translation blocks that walk `route` without turning, for a robot with
/// the given fixed orientation.
pub fn route_program(route: &[Cell], facing: Orientation) -> BlockProgram {
    let mut main: Vec<Statement> = Vec::new();
    let mut run: Option<(RelDir, u32)> = None;
    let flush = |run: &mut Option<(RelDir, u32)>, main: &mut Vec<Statement>| {
        if let Some((dir, n)) = run.take() {
            main.push(Statement::Move {
                dir,
                speed: 300.0,
                duration: n as f64,
            });
        }
    };
    for w in route.windows(2) {
        let d = crate::grid::Delta::new(w[1].x - w[0].x, w[1].y - w[0].y);
        let dir = RelDir::ALL
            .into_iter()
            .find(|r| crate::grid::relative_to_global(facing, *r, 1) == d)
            .expect("route cells are adjacent");
        match &mut run {
            Some((r, n)) if *r == dir => *n += 1,
            _ => {
                flush(&mut run, &mut main);
                run = Some((dir, 1));
            }
        }
    }
    flush(&mut run, &mut main);
    BlockProgram::new(main)
}

/// Runs a program end to end on a task; convenience for oracles and tests.
pub fn replay(program: &BlockProgram, t: &TaskSpec) -> Option<ExecutionTrace> {
    executor::lower(program)
        .ok()
        .map(|a| executor::execute(&a, t))
}
