//! Lower a program to robot commands and replay them on the command
//! interpreter.

use gridblock::block_ast::parse_program;
use gridblock::executor::{execute, lower};
use gridblock::service::{emit_wire, WireInterpreter};
use gridblock::tasks;

fn main() {
    let task = tasks::knights_tour();
    let program =
        parse_program(include_str!("../tests/fixtures/knight_reference.xml")).expect("parses");
    let actions = lower(&program).expect("lowers");
    let commands = emit_wire(&actions);
    for c in &commands {
        println!("{}", serde_json::to_string(c).expect("json"));
    }
    let mut robot = WireInterpreter::new(task.start);
    robot.feed_all(&commands).expect("stream is well formed");
    let trace = execute(&actions, &task);
    println!(
        "robot ends at {}; replay matches simulator: {}",
        robot.pose(),
        robot.visited() == trace.visited.as_slice()
    );
}
