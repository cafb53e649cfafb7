//! Assemble the three-part prompt for a session with some history.

use gridblock::service::{build_prompt, handle_message, ClientMessage, Session};
use gridblock::tasks::builtin_tasks;

fn main() {
    let id = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "tile-cleaning".into());
    let registry = builtin_tasks();
    let mut session = Session::new("demo");
    handle_message(
        &mut session,
        &registry,
        ClientMessage::SelectTask { task_id: id },
    );
    session.push_history("student", "How far does one move block go?");
    session.push_history(
        "assistant",
        "Multiply speed by duration and divide by the tile size.",
    );
    let task = registry
        .iter()
        .find(|t| Some(&t.id) == session.task_id.as_ref())
        .expect("task selected");
    let bundle = build_prompt(task, &session);
    for (title, part) in ["role", "instructions", "context"]
        .iter()
        .zip(bundle.parts())
    {
        println!("==== {title} ====\n{part}\n");
    }
}
