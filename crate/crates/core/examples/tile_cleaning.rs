//! Build the two-row cleaning program in code and run it on the tile task.

use gridblock::block_ast::{BlockProgram, Statement};
use gridblock::executor::{execute, lower};
use gridblock::grid::RelDir;
use gridblock::tasks;
use gridblock::verdict::{check, render_feedback};

fn mv(dir: RelDir, cells: f64) -> Statement {
    Statement::Move {
        dir,
        speed: 300.0,
        duration: cells,
    }
}

fn main() {
    let program = BlockProgram::new(vec![
        Statement::Repeat {
            times: 2,
            body: vec![Statement::Call {
                name: "clean_2_rows".into(),
            }],
        },
        mv(RelDir::Forward, 4.0),
    ])
    .with_procedure(
        "clean_2_rows",
        vec![
            mv(RelDir::Forward, 4.0),
            mv(RelDir::Left, 1.0),
            mv(RelDir::Backward, 4.0),
            mv(RelDir::Left, 1.0),
        ],
    );

    let task = tasks::tile_cleaning();
    let actions = lower(&program).expect("program lowers");
    println!("{} primitives", actions.len());
    let trace = execute(&actions, &task);
    for row in (0..5).rev() {
        let line: String = (0..5)
            .map(
                |x| match trace.visited.iter().position(|c| c.x == x && c.y == row) {
                    Some(i) => format!("{i:>3}"),
                    None => "  .".into(),
                },
            )
            .collect();
        println!("{line}");
    }
    println!("{}", render_feedback(&check(&trace, &program, &task)));
}
