//! Print the energy ledger of the wrong route, then search for one that
//! collects every mineral.

use gridblock::block_ast::serialize_program;
use gridblock::oracle::{mineral_route_search, replay, route_program};
use gridblock::service::evaluate;
use gridblock::tasks;

fn main() {
    let task = tasks::mineral_collection();
    let e = evaluate(include_str!("../tests/fixtures/mineral_detour.xml"), &task).expect("valid");
    println!(
        "{:<8} {:<12} {:>5} {:>6}",
        "cell", "cause", "delta", "energy"
    );
    for entry in e.trace.energy.iter().flatten() {
        println!(
            "{:<8} {:<12} {:>5} {:>6}",
            entry.cell.to_string(),
            format!("{:?}", entry.cause),
            entry.delta,
            entry.energy
        );
    }
    println!("{}\n", e.verdict.feedback_text);

    let route = mineral_route_search(&task).expect("a route exists");
    let program = route_program(&route, task.start.orientation);
    let trace = replay(&program, &task).expect("lowers");
    println!(
        "found a {}-step route ending with energy {:?}",
        route.len() - 1,
        trace.final_energy(&task)
    );
    print!("{}", serialize_program(&program));
}
