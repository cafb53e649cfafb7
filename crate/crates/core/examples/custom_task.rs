//! Load a task from JSON and check a program against it.

use gridblock::service::evaluate;
use gridblock::tasks::load_task;
use gridblock::verdict::render_feedback;

const TASK: &str = r#"{
  "id": "zigzag",
  "title": "Zigzag",
  "start": {"x": 0, "y": 0, "orientation": "East"},
  "obstacles": [[1, 1]],
  "success": {"kind": "followExactCellPath", "path": [[0,0],[1,0],[2,0],[2,1],[2,2]]},
  "policies": {"haltOnOutOfBounds": true}
}"#;

const PROGRAM: &str = r#"<xml xmlns="https://developers.google.com/blockly/xml">
  <block type="move_forward"><field name="SPEED">400</field><field name="DURATION">1.5</field>
    <next><block type="move_left"><field name="SPEED">300</field><field name="DURATION">2</field></block></next>
  </block>
</xml>"#;

fn main() {
    let task = load_task(TASK).expect("task loads");
    let e = evaluate(PROGRAM, &task).expect("program is valid");
    println!("{}", render_feedback(&e.verdict));
    print!("{}", task.to_json());
    println!();
}
