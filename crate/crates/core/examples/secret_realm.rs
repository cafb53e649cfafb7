//! Compare the translation and turning solutions and ask the path oracle
//! how long each leg between triggers has to be.

use gridblock::oracle::shortest_path_len;
use gridblock::service::evaluate;
use gridblock::tasks;

fn main() {
    let task = tasks::secret_realm();
    for (label, xml) in [
        (
            "translate",
            include_str!("../tests/fixtures/secret_realm_translate.xml"),
        ),
        (
            "turns",
            include_str!("../tests/fixtures/secret_realm_turns.xml"),
        ),
        (
            "obstacle",
            include_str!("../tests/fixtures/secret_realm_obstacle.xml"),
        ),
    ] {
        let e = evaluate(xml, &task).expect("fixture is valid");
        let path: Vec<String> = e.trace.visited.iter().map(|c| c.to_string()).collect();
        println!(
            "{label:>9}: {} -> {}",
            path.join(" "),
            e.verdict.feedback_text
        );
    }

    let mut from = task.start.cell;
    for t in &task.triggers {
        println!(
            "{from} -> {} ({}): {:?} steps",
            t.cell,
            t.label,
            shortest_path_len(&task, from, t.cell)
        );
        from = t.cell;
    }
}
