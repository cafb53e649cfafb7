#![allow(dead_code)]

pub mod ws;

use std::path::PathBuf;

use gridblock::block_ast::{BlockProgram, KnightMove, LegOrder, Statement, Vertical};
use gridblock::grid::{Delta, Orientation, RelDir, Side};
use proptest::prelude::*;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// (fixture, task id, expected correctness) for every golden program.
pub const GOLDEN: &[(&str, &str, bool)] = &[
    ("tile_reference.xml", "tile-cleaning", true),
    ("secret_realm_translate.xml", "secret-realm", true),
    ("secret_realm_turns.xml", "secret-realm", true),
    ("secret_realm_obstacle.xml", "secret-realm", false),
    ("mineral_detour.xml", "mineral-collection", false),
    ("mineral_route.xml", "mineral-collection", true),
    ("river_plan.xml", "river-crossing", true),
    ("knight_reference.xml", "knights-tour", true),
];

/// Unit displacement for each relative direction, written out by hand:
/// rows are North, East, South, West; columns forward, backward, left, right.
pub const UNIT_TABLE: [[(i32, i32); 4]; 4] = [
    [(0, 1), (0, -1), (-1, 0), (1, 0)],
    [(1, 0), (-1, 0), (0, 1), (0, -1)],
    [(0, -1), (0, 1), (1, 0), (-1, 0)],
    [(-1, 0), (1, 0), (0, -1), (0, 1)],
];

pub fn table_delta(o: Orientation, rel: RelDir, n: u32) -> Delta {
    let row = match o {
        Orientation::North => 0,
        Orientation::East => 1,
        Orientation::South => 2,
        Orientation::West => 3,
    };
    let col = match rel {
        RelDir::Forward => 0,
        RelDir::Backward => 1,
        RelDir::Left => 2,
        RelDir::Right => 3,
    };
    let (x, y) = UNIT_TABLE[row][col];
    Delta::new(x * n as i32, y * n as i32)
}

pub fn orientation() -> impl Strategy<Value = Orientation> {
    prop::sample::select(vec![
        Orientation::North,
        Orientation::East,
        Orientation::South,
        Orientation::West,
    ])
}

pub fn rel_dir() -> impl Strategy<Value = RelDir> {
    prop::sample::select(RelDir::ALL.to_vec())
}

fn side() -> impl Strategy<Value = Side> {
    prop_oneof![Just(Side::Left), Just(Side::Right)]
}

fn motion_value() -> impl Strategy<Value = f64> {
    prop_oneof![
        (1u32..1500).prop_map(f64::from),
        (1u32..40_000).prop_map(|v| f64::from(v) / 16.0)
    ]
}

fn leaf(callable: Vec<String>) -> BoxedStrategy<Statement> {
    let mv = (rel_dir(), motion_value(), motion_value()).prop_map(|(dir, speed, duration)| {
        Statement::Move {
            dir,
            speed,
            duration,
        }
    });
    let turn = (side(), prop_oneof![Just(90u32), Just(180u32)])
        .prop_map(|(side, degrees)| Statement::Turn { side, degrees });
    let knight = (side(), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(
        |(dir_x, fwd, wide, x_first)| {
            Statement::Knight(KnightMove {
                dir_x,
                steps_x: if wide { 2 } else { 1 },
                dir_y: if fwd {
                    Vertical::Forward
                } else {
                    Vertical::Backward
                },
                steps_y: if wide { 1 } else { 2 },
                leg_order: if x_first {
                    LegOrder::XFirst
                } else {
                    LegOrder::YFirst
                },
            })
        },
    );
    let pick = "[a-z][a-z0-9_&<>\"']{0,7}".prop_map(|item| Statement::Pick { item });
    let mut options = vec![
        mv.boxed(),
        turn.boxed(),
        knight.boxed(),
        pick.boxed(),
        Just(Statement::Place).boxed(),
    ];
    if !callable.is_empty() {
        options.push(
            prop::sample::select(callable)
                .prop_map(|name| Statement::Call { name })
                .boxed(),
        );
    }
    prop::strategy::Union::new(options).boxed()
}

fn statement(callable: Vec<String>) -> BoxedStrategy<Statement> {
    leaf(callable)
        .prop_recursive(3, 24, 4, |inner| {
            (0i64..6, prop::collection::vec(inner, 0..4))
                .prop_map(|(times, body)| Statement::Repeat { times, body })
        })
        .boxed()
}

fn proc_name(i: usize) -> String {
    format!("proc_{i}")
}

/// Programs that pass validation against the full catalog: positive
/// motion, supported angles, non-negative loops, and procedure calls that
/// only point forward so there is never a cycle.
pub fn valid_program() -> impl Strategy<Value = BlockProgram> {
    (0usize..4).prop_flat_map(|n| {
        let procs: Vec<BoxedStrategy<Vec<Statement>>> = (0..n)
            .map(|i| {
                prop::collection::vec(statement(((i + 1)..n).map(proc_name).collect()), 0..4)
                    .boxed()
            })
            .collect();
        let main = prop::collection::vec(statement((0..n).map(proc_name).collect()), 0..6);
        (procs, main).prop_map(|(bodies, main)| {
            bodies
                .into_iter()
                .enumerate()
                .fold(BlockProgram::new(main), |p, (i, body)| {
                    p.with_procedure(proc_name(i), body)
                })
        })
    })
}

/// Translation-only programs for the energy identity.
pub fn move_program() -> impl Strategy<Value = BlockProgram> {
    prop::collection::vec(
        (rel_dir(), 1u32..4).prop_map(|(dir, n)| Statement::Move {
            dir,
            speed: 300.0,
            duration: f64::from(n),
        }),
        0..8,
    )
    .prop_map(BlockProgram::new)
}
