//! Solve the river puzzle by search and replay the plan on the simulator.
//! Pass `--no-safety` to drop the wolf/goat/cabbage rules.

use gridblock::executor::{execute, lower};
use gridblock::oracle::{crossing_program, river_solver};
use gridblock::tasks;
use gridblock::verdict::check;

fn main() {
    let mut task = tasks::river_crossing();
    task.policies.safety_rules = !std::env::args().any(|a| a == "--no-safety");
    let plan = river_solver(&task).expect("solvable");
    for (i, c) in plan.crossings.iter().enumerate() {
        println!(
            "{:>2}. to {:?} bank carrying {}",
            i + 1,
            c.to,
            c.cargo.as_deref().unwrap_or("nothing")
        );
    }
    let program = crossing_program(&task, &plan);
    let trace = execute(&lower(&program).expect("lowers"), &task);
    println!("items at the end: {:?}", trace.items);
    println!("{}", check(&trace, &program, &task).feedback_text);
}
