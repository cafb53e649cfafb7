//! Session logic behind the WebSocket endpoint: frame handling, the robot
//! command stream and prompt assembly. Transport lives in [`crate::server`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::block_ast::{
    parse_program, validate_program, BlockProgram, LegOrder, ParseError, ValidationReport, Vertical,
};
use crate::executor::{self, expand_knight, Action, ActionSequence, ExecutionTrace, LowerError};
use crate::grid::{self, Cell, Pose, RelDir, Side};
use crate::tasks::{find_task, SuccessRule, TaskSpec};
use crate::verdict::{self, Verdict};

/// Most history entries a session keeps.
pub const HISTORY_CAP: usize = 20;

/// Role line opening every prompt bundle.
pub const ROLE_PREAMBLE: &str =
    "You are an encouraging AI assistant that returns structured JSON outputs \
for a block-based robot programming environment. Reply with one JSON object holding the keys \
\"text\", \"xml\", \"is_correct\" and \"return_button\", and nothing else.";

const MOVEMENT_RULE: &str = "A movement block <move_* SPEED=X DURATION=T> moves the robot \
round(T × X / 300) cells, rounding halves away from zero. Translations are relative to the \
robot's facing and never turn it; turn blocks rotate in place by 90 or 180 degrees. \
The grid is 5 by 5 with (0,0) at the bottom-left, x growing to the right and y growing upward.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub role: String,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub task_id: Option<String>,
    history: VecDeque<HistoryEntry>,
    pub last_workspace_xml: Option<String>,
    pub last_trace: Option<ExecutionTrace>,
}

impl Session {
    pub fn new(id: impl Into<String>) -> Self {
        Session {
            id: id.into(),
            task_id: None,
            history: VecDeque::new(),
            last_workspace_xml: None,
            last_trace: None,
        }
    }

    /// Appends an entry, dropping the oldest once the cap is exceeded.
    pub fn push_history(&mut self, role: impl Into<String>, text: impl Into<String>) {
        self.history.push_back(HistoryEntry {
            role: role.into(),
            text: text.into(),
        });
        while self.history.len() > HISTORY_CAP {
            self.history.pop_front();
        }
    }

    pub fn history(&self) -> impl ExactSizeIterator<Item = &HistoryEntry> {
        self.history.iter()
    }

    fn reset(&mut self, task_id: String) {
        self.task_id = Some(task_id);
        self.history.clear();
        self.last_workspace_xml = None;
        self.last_trace = None;
    }
}

/// One command of the robot stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    tag = "op",
    rename_all = "SCREAMING_SNAKE_CASE",
    rename_all_fields = "camelCase"
)]
pub enum WireCommand {
    Move {
        dir: RelDir,
        cells: u32,
    },
    Turn {
        side: Side,
        degrees: u32,
    },
    Knight {
        dir_x: Side,
        steps_x: u32,
        dir_y: Vertical,
        steps_y: u32,
        leg_order: LegOrder,
    },
    Pick {
        item: String,
    },
    Place,
    End,
}

/// One command per primitive, in order, then END.
pub fn emit_wire(a: &ActionSequence) -> Vec<WireCommand> {
    a.iter()
        .map(|act| match act {
            Action::Translate { dir, cells } => WireCommand::Move {
                dir: *dir,
                cells: *cells,
            },
            Action::Rotate { side, angle } => WireCommand::Turn {
                side: *side,
                degrees: angle.degrees(),
            },
            Action::Knight(k) => WireCommand::Knight {
                dir_x: k.dir_x,
                steps_x: k.steps_x,
                dir_y: k.dir_y,
                steps_y: k.steps_y,
                leg_order: k.leg_order,
            },
            Action::Pick { item } => WireCommand::Pick { item: item.clone() },
            Action::Place => WireCommand::Place,
        })
        .chain(std::iter::once(WireCommand::End))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("command received after END")]
    AfterEnd,
    #[error("turn of {0} degrees is not supported")]
    BadTurn(u32),
}

/// A stand-in for the robot end of the stream. It knows its start pose and
/// the grid bounds, nothing about the task layout; it stops moving once a
/// step would leave the grid.
#[derive(Debug, Clone)]
pub struct WireInterpreter {
    pose: Pose,
    visited: Vec<Cell>,
    stopped: bool,
    ended: bool,
}

impl WireInterpreter {
    pub fn new(start: Pose) -> Self {
        WireInterpreter {
            pose: start,
            visited: vec![start.cell],
            stopped: false,
            ended: false,
        }
    }

    pub fn feed(&mut self, cmd: &WireCommand) -> Result<(), WireError> {
        if self.ended {
            return Err(WireError::AfterEnd);
        }
        match cmd {
            WireCommand::End => self.ended = true,
            _ if self.stopped => {}
            WireCommand::Move { dir, cells } => {
                let d = grid::relative_to_global(self.pose.orientation, *dir, *cells);
                for step in grid::unit_steps(d) {
                    let next = self.pose.cell.offset(step);
                    if !next.on_grid() {
                        self.stopped = true;
                        break;
                    }
                    self.pose.cell = next;
                    self.visited.push(next);
                }
            }
            WireCommand::Turn { side, degrees } => {
                self.pose.orientation = grid::rotate(self.pose.orientation, *side, *degrees)
                    .map_err(|_| WireError::BadTurn(*degrees))?;
            }
            WireCommand::Knight {
                dir_x,
                steps_x,
                dir_y,
                steps_y,
                leg_order,
            } => {
                let k = crate::block_ast::KnightMove {
                    dir_x: *dir_x,
                    steps_x: *steps_x,
                    dir_y: *dir_y,
                    steps_y: *steps_y,
                    leg_order: *leg_order,
                };
                match expand_knight(self.pose, &k) {
                    Ok(exp) => {
                        self.visited.extend(exp.cells);
                        self.pose = exp.end;
                    }
                    Err(executor::KnightError::OutOfBounds(_)) => self.stopped = true,
                    Err(executor::KnightError::IllegalKnightMove(_)) => {}
                }
            }
            WireCommand::Pick { .. } | WireCommand::Place => {}
        }
        Ok(())
    }

    pub fn feed_all<'a>(
        &mut self,
        cmds: impl IntoIterator<Item = &'a WireCommand>,
    ) -> Result<(), WireError> {
        cmds.into_iter().try_for_each(|c| self.feed(c))
    }

    pub fn visited(&self) -> &[Cell] {
        &self.visited
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn ended(&self) -> bool {
        self.ended
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("program is not valid for this task: {}", join_violations(.0))]
    Invalid(ValidationReport),
    #[error(transparent)]
    Lower(#[from] LowerError),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::Parse(_) => "PARSE_ERROR",
            EvalError::Invalid(_) => "INVALID_PROGRAM",
            EvalError::Lower(_) => "LOWER_ERROR",
        }
    }
}

fn join_violations(r: &ValidationReport) -> String {
    r.violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Everything produced by running one program on one task.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub program: BlockProgram,
    pub actions: ActionSequence,
    pub trace: ExecutionTrace,
    pub verdict: Verdict,
}

/// Parse, validate against the task's catalog, lower, execute and check.
pub fn evaluate(xml: &str, task: &TaskSpec) -> Result<Evaluation, EvalError> {
    let program = parse_program(xml)?;
    let report = validate_program(&program, &task.catalog);
    if !report.is_empty() {
        return Err(EvalError::Invalid(report));
    }
    let actions = executor::lower(&program)?;
    let trace = executor::execute(&actions, task);
    let verdict = verdict::check(&trace, &program, task);
    Ok(Evaluation {
        program,
        actions,
        trace,
        verdict,
    })
}

/// Frames sent to the client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "type",
    content = "payload",
    rename_all = "SCREAMING_SNAKE_CASE",
    rename_all_fields = "camelCase"
)]
pub enum ServerMessage {
    Session {
        session_id: String,
    },
    Task {
        task: Value,
        known_blocks: Value,
    },
    Verdict {
        verdict: Value,
        fault: Value,
        trace: Value,
    },
    Wire {
        commands: Vec<WireCommand>,
    },
    Trace {
        trace: Value,
    },
    Ack {
        history_length: usize,
    },
    History {
        entries: Vec<HistoryEntry>,
    },
    Prompt {
        role_preamble: String,
        task_instructions: String,
        context_block: String,
    },
    Error {
        code: String,
        message: String,
    },
}

impl ServerMessage {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("server frame serializes")
    }
}

/// Frames accepted from the client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientMessage {
    Run { xml: String },
    Check { xml: String },
    Trace,
    SelectTask { task_id: String },
    Chat { role: String, text: String },
    Prompt,
    History,
}

#[derive(Deserialize)]
struct Envelope {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    payload: Value,
}

impl ClientMessage {
    pub fn from_text(text: &str) -> Result<Self, ServerMessage> {
        let env: Envelope = serde_json::from_str(text)
            .map_err(|e| ServerMessage::error("BAD_FRAME", e.to_string()))?;
        let field = |name: &str| -> Result<String, ServerMessage> {
            env.payload
                .get(name)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| {
                    ServerMessage::error(
                        "BAD_FRAME",
                        format!("{} needs a string `{name}` in its payload", env.kind),
                    )
                })
        };
        Ok(match env.kind.as_str() {
            "RUN" => ClientMessage::Run { xml: field("xml")? },
            "CHECK" => ClientMessage::Check { xml: field("xml")? },
            "TRACE" => ClientMessage::Trace,
            "SELECT_TASK" => ClientMessage::SelectTask {
                task_id: field("taskId")?,
            },
            "CHAT" => ClientMessage::Chat {
                role: field("role").unwrap_or_else(|_| "student".into()),
                text: field("text")?,
            },
            "PROMPT" => ClientMessage::Prompt,
            "HISTORY" => ClientMessage::History,
            other => {
                return Err(ServerMessage::error(
                    "UNKNOWN_TYPE",
                    format!("unknown frame type `{other}`"),
                ))
            }
        })
    }

    pub fn to_text(&self) -> String {
        let (kind, payload) = match self {
            ClientMessage::Run { xml } => ("RUN", json!({ "xml": xml })),
            ClientMessage::Check { xml } => ("CHECK", json!({ "xml": xml })),
            ClientMessage::Trace => ("TRACE", json!({})),
            ClientMessage::SelectTask { task_id } => ("SELECT_TASK", json!({ "taskId": task_id })),
            ClientMessage::Chat { role, text } => ("CHAT", json!({ "role": role, "text": text })),
            ClientMessage::Prompt => ("PROMPT", json!({})),
            ClientMessage::History => ("HISTORY", json!({})),
        };
        json!({ "type": kind, "payload": payload }).to_string()
    }
}

fn current_task<'a>(s: &Session, registry: &'a [TaskSpec]) -> Result<&'a TaskSpec, ServerMessage> {
    let id = s
        .task_id
        .as_deref()
        .ok_or_else(|| ServerMessage::error("NO_TASK", "select a task first"))?;
    find_task(registry, id).map_err(|e| ServerMessage::error("UNKNOWN_TASK", e.to_string()))
}

/// Handles one client frame. On error the session is left as it was and a
/// single ERROR frame is returned.
pub fn handle_message(
    s: &mut Session,
    registry: &[TaskSpec],
    msg: ClientMessage,
) -> Vec<ServerMessage> {
    match try_handle(s, registry, msg) {
        Ok(out) => out,
        Err(e) => vec![e],
    }
}

fn try_handle(
    s: &mut Session,
    registry: &[TaskSpec],
    msg: ClientMessage,
) -> Result<Vec<ServerMessage>, ServerMessage> {
    match msg {
        ClientMessage::SelectTask { task_id } => {
            let task = find_task(registry, &task_id)
                .map_err(|e| ServerMessage::error("UNKNOWN_TASK", e.to_string()))?;
            s.reset(task.id.clone());
            Ok(vec![ServerMessage::Task {
                task: serde_json::from_str(&task.to_json()).expect("task json"),
                known_blocks: task.catalog.describe_json(),
            }])
        }
        ClientMessage::Run { xml } => run_or_check(s, registry, xml, true),
        ClientMessage::Check { xml } => run_or_check(s, registry, xml, false),
        ClientMessage::Trace => {
            let trace = s
                .last_trace
                .as_ref()
                .ok_or_else(|| ServerMessage::error("NO_TRACE", "no program has been run yet"))?;
            Ok(vec![ServerMessage::Trace {
                trace: trace.to_canonical_json(),
            }])
        }
        ClientMessage::Chat { role, text } => {
            s.push_history(role, text);
            Ok(vec![ServerMessage::Ack {
                history_length: s.history.len(),
            }])
        }
        ClientMessage::History => Ok(vec![ServerMessage::History {
            entries: s.history().cloned().collect(),
        }]),
        ClientMessage::Prompt => {
            let task = current_task(s, registry)?;
            let b = build_prompt(task, s);
            Ok(vec![ServerMessage::Prompt {
                role_preamble: b.role_preamble,
                task_instructions: b.task_instructions,
                context_block: b.context_block,
            }])
        }
    }
}

fn run_or_check(
    s: &mut Session,
    registry: &[TaskSpec],
    xml: String,
    run: bool,
) -> Result<Vec<ServerMessage>, ServerMessage> {
    let task = current_task(s, registry)?;
    let eval = evaluate(&xml, task).map_err(|e| ServerMessage::error(e.code(), e.to_string()))?;
    let verb = if run { "ran" } else { "submitted" };
    s.push_history(
        "student",
        format!("{verb} a program of {} blocks", eval.program.block_count()),
    );
    s.push_history("assistant", eval.verdict.feedback_text.clone());
    s.last_workspace_xml = Some(xml);
    let trace = eval.trace.to_canonical_json();
    let mut out = vec![ServerMessage::Verdict {
        verdict: eval.verdict.to_json_value(),
        fault: serde_json::to_value(&eval.verdict.fault_report).expect("fault serializes"),
        trace,
    }];
    if run {
        out.push(ServerMessage::Wire {
            commands: emit_wire(&eval.actions),
        });
    }
    s.last_trace = Some(eval.trace);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PromptBundle {
    pub role_preamble: String,
    pub task_instructions: String,
    pub context_block: String,
}

impl PromptBundle {
    pub fn parts(&self) -> [&str; 3] {
        [
            &self.role_preamble,
            &self.task_instructions,
            &self.context_block,
        ]
    }
}

fn cells(cs: impl IntoIterator<Item = Cell>) -> String {
    let v: Vec<String> = cs.into_iter().map(|c| c.to_string()).collect();
    if v.is_empty() {
        "none".into()
    } else {
        v.join(", ")
    }
}

fn start_line(t: &TaskSpec) -> String {
    format!(
        "The robot starts at {} facing {}.",
        t.start.cell,
        t.start.orientation.as_str()
    )
}

fn tile_template(t: &TaskSpec) -> String {
    format!(
        "Exercise: sweep every tile of the floor.\n\
         {start}\n\
         Expected structure: a procedure (any name, e.g. clean_2_rows) of four moves: forward 4, left 1, \
         backward 4, left 1. The main program repeats that procedure twice and finishes with forward 4, \
         so all 25 tiles are visited.\n\
         When judging a submission, check that such a procedure exists and that the loop count is 2.\n\
         {MOVEMENT_RULE}",
        start = start_line(t)
    )
}

fn secret_realm_template(t: &TaskSpec) -> String {
    let triggers: Vec<String> = t
        .triggers
        .iter()
        .map(|tr| format!("{} at {}", tr.label, tr.cell))
        .collect();
    let path = match &t.success {
        SuccessRule::FollowExactCellPath { path } => cells(path.iter().copied()),
        _ => "none".into(),
    };
    format!(
        "Exercise: reach the triggers in order ({}) along the shortest route.\n\
         {start}\n\
         Blocked cells: {obstacles}.\n\
         The accepted route visits exactly: {path}. Turning instead of side-stepping is fine as long as \
         the same cells are visited.\n\
         Every intermediate cell is checked; a step into a blocked cell or off the grid fails the attempt.\n\
         {MOVEMENT_RULE}",
        triggers.join(", "),
        start = start_line(t),
        obstacles = cells(t.obstacles.iter().copied()),
    )
}

fn mineral_template(t: &TaskSpec) -> String {
    format!(
        "Exercise: gather every mineral before the battery runs out.\n\
         {start} Starting energy: {energy}.\n\
         Minerals: {minerals}. Swamps: {swamps}. Blocked cells: {obstacles}.\n\
         Each cell entered costs 1 energy, a swamp costs 2 more. Collecting a mineral needs at least 1 energy, \
         costs 1 and then restores 3. A route passes only if all minerals are collected and at least 1 energy remains.\n\
         {MOVEMENT_RULE}",
        start = start_line(t),
        energy = t.energy.unwrap_or(0),
        minerals = cells(t.minerals.iter().copied()),
        swamps = cells(t.swamps.iter().copied()),
        obstacles = cells(t.obstacles.iter().copied()),
    )
}

fn river_template(t: &TaskSpec) -> String {
    let (l, r) = t.river_ends().unwrap_or((t.start.cell, t.start.cell));
    format!(
        "Exercise: ferry {items} across the river one at a time.\n\
         {start} The river runs from {l} to {r}; the robot carries at most one item.\n\
         Pick up from the left bank at {l} facing west, or from the right bank at {r} facing east. \
         Place drops the carried item on the bank next to the river end the robot stands on.\n\
         Never leave the wolf with the goat, or the goat with the cabbage, on a bank without the robot.\n\
         {MOVEMENT_RULE}",
        items = t.items.join(", "),
        start = start_line(t),
    )
}

fn knight_template(t: &TaskSpec) -> String {
    let goal = match &t.success {
        SuccessRule::KnightFullCover { goal, .. } => goal.to_string(),
        _ => "the goal".into(),
    };
    format!(
        "Exercise: a knight's tour over the free cells.\n\
         {start} Blocked cells: {obstacles}.\n\
         Only L-shaped knight moves are available: one leg of length 1 and one of length 2, taken sideways and \
         forward or backward relative to the robot's facing, in the chosen leg order. Every free cell must be \
         passed exactly once and the tour must end at {goal}. A move may neither land on a blocked cell nor turn its corner on one.",
        start = start_line(t),
        obstacles = cells(t.obstacles.iter().copied()),
    )
}

fn generic_template(t: &TaskSpec) -> String {
    let goal = match &t.success {
        SuccessRule::CoverAllCells { exceptions, .. } => {
            format!(
                "visit every cell except {}",
                cells(exceptions.iter().copied())
            )
        }
        SuccessRule::FollowExactCellPath { path } => {
            format!("visit exactly these cells: {}", cells(path.iter().copied()))
        }
        SuccessRule::CollectAllMinerals => {
            "collect every mineral and finish with energy of at least 1".into()
        }
        SuccessRule::TransportAllItems { to } => {
            format!("move every item to the bank next to {to}")
        }
        SuccessRule::KnightFullCover { goal, .. } => {
            format!("cover every free cell once with knight moves, ending at {goal}")
        }
    };
    format!(
        "Exercise: {title}.\n\
         {start}\n\
         Goal: {goal}.\n\
         Blocked cells: {obstacles}. Forbidden cells: {forbidden}.\n\
         {MOVEMENT_RULE}",
        title = t.title,
        start = start_line(t),
        obstacles = cells(t.obstacles.iter().copied()),
        forbidden = cells(t.forbidden.iter().copied()),
    )
}

/// Per-task instruction text; tasks without their own template fall back
/// to one generated from the task fields.
pub fn task_instructions(t: &TaskSpec) -> String {
    match t.id.as_str() {
        "tile-cleaning" => tile_template(t),
        "secret-realm" => secret_realm_template(t),
        "mineral-collection" => mineral_template(t),
        "river-crossing" => river_template(t),
        "knights-tour" => knight_template(t),
        _ => generic_template(t),
    }
}

pub fn build_prompt(t: &TaskSpec, s: &Session) -> PromptBundle {
    let mut ctx = String::new();
    ctx.push_str("Task definition:\n");
    ctx.push_str(&t.to_json());
    ctx.push_str("\n\nKnown blocks: ");
    ctx.push_str(&t.catalog.describe_json().to_string());
    ctx.push_str(&format!(
        "\n\nConversation so far ({} entries):\n",
        s.history.len()
    ));
    for h in s.history() {
        ctx.push_str(&format!("[{}] {}\n", h.role, h.text));
    }
    ctx.push_str("\nCurrent workspace XML:\n");
    ctx.push_str(s.last_workspace_xml.as_deref().unwrap_or("(empty)"));
    PromptBundle {
        role_preamble: ROLE_PREAMBLE.to_string(),
        task_instructions: task_instructions(t),
        context_block: ctx,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::TurnAngle;
    use crate::grid::Orientation;
    use crate::tasks::{self, builtin_tasks};

    const TILE: &str = r#"<xml xmlns="https://developers.google.com/blockly/xml">
  <block type="procedures_defnoreturn"><field name="NAME">clean_2_rows</field>
    <statement name="STACK">
      <block type="move_forward"><field name="SPEED">300</field><field name="DURATION">4</field>
      <next><block type="move_left"><field name="SPEED">300</field><field name="DURATION">1</field>
      <next><block type="move_backward"><field name="SPEED">300</field><field name="DURATION">4</field>
      <next><block type="move_left"><field name="SPEED">300</field><field name="DURATION">1</field></block></next>
      </block></next></block></next></block>
    </statement>
  </block>
  <block type="controls_repeat"><field name="TIMES">2</field>
    <statement name="DO"><block type="procedures_callnoreturn"><mutation name="clean_2_rows"/></block></statement>
    <next><block type="move_forward"><field name="SPEED">300</field><field name="DURATION">4</field></block></next>
  </block>
</xml>"#;

    fn selected(id: &str) -> (Session, Vec<TaskSpec>) {
        let reg = builtin_tasks();
        let mut s = Session::new("t");
        let out = handle_message(
            &mut s,
            &reg,
            ClientMessage::SelectTask { task_id: id.into() },
        );
        assert!(matches!(out[0], ServerMessage::Task { .. }));
        (s, reg)
    }

    #[test]
    fn wire_examples() {
        let one = ActionSequence(vec![Action::Translate {
            dir: RelDir::Forward,
            cells: 4,
        }]);
        assert_eq!(
            emit_wire(&one),
            vec![
                WireCommand::Move {
                    dir: RelDir::Forward,
                    cells: 4
                },
                WireCommand::End
            ]
        );
        assert_eq!(
            emit_wire(&ActionSequence::default()),
            vec![WireCommand::End]
        );
        let a = executor::lower(&parse_program(TILE).unwrap()).unwrap();
        assert_eq!(emit_wire(&a).len(), 10);
        let turn = ActionSequence(vec![Action::Rotate {
            side: Side::Left,
            angle: TurnAngle::Half,
        }]);
        assert_eq!(
            serde_json::to_string(&emit_wire(&turn)[0]).unwrap(),
            r#"{"op":"TURN","side":"left","degrees":180}"#
        );
    }

    #[test]
    fn wire_replay_matches_trace() {
        let t = tasks::tile_cleaning();
        let a = executor::lower(&parse_program(TILE).unwrap()).unwrap();
        let trace = executor::execute(&a, &t);
        let mut robot = WireInterpreter::new(t.start);
        robot.feed_all(&emit_wire(&a)).unwrap();
        assert_eq!(robot.visited(), trace.visited.as_slice());
        assert!(robot.ended());
        assert_eq!(robot.feed(&WireCommand::Place), Err(WireError::AfterEnd));
    }

    #[test]
    fn check_tile_reference() {
        let (mut s, reg) = selected("tile-cleaning");
        let out = handle_message(&mut s, &reg, ClientMessage::Check { xml: TILE.into() });
        assert_eq!(out.len(), 1);
        let ServerMessage::Verdict { verdict, .. } = &out[0] else {
            panic!("{out:?}")
        };
        assert_eq!(verdict["is_correct"], true);
        let run = handle_message(&mut s, &reg, ClientMessage::Run { xml: TILE.into() });
        assert_eq!(run.len(), 2);
        assert_eq!(run[0], out[0]);
        assert!(matches!(&run[1], ServerMessage::Wire { commands } if commands.len() == 10));
    }

    #[test]
    fn empty_program_run() {
        let (mut s, reg) = selected("tile-cleaning");
        let xml = format!("<xml xmlns=\"{}\"/>", crate::block_ast::BLOCKLY_XMLNS);
        let out = handle_message(&mut s, &reg, ClientMessage::Run { xml });
        let ServerMessage::Verdict { verdict, .. } = &out[0] else {
            panic!()
        };
        assert_eq!(verdict["is_correct"], false);
        assert_eq!(
            out[1],
            ServerMessage::Wire {
                commands: vec![WireCommand::End]
            }
        );
    }

    #[test]
    fn errors_leave_session_alone() {
        let reg = builtin_tasks();
        let mut s = Session::new("x");
        let out = handle_message(&mut s, &reg, ClientMessage::Check { xml: TILE.into() });
        assert!(matches!(&out[..], [ServerMessage::Error { code, .. }] if code == "NO_TASK"));

        let (mut s, reg) = selected("tile-cleaning");
        handle_message(
            &mut s,
            &reg,
            ClientMessage::Chat {
                role: "student".into(),
                text: "hi".into(),
            },
        );
        let before = (
            s.history.clone(),
            s.last_workspace_xml.clone(),
            s.task_id.clone(),
        );
        for msg in [
            ClientMessage::Run { xml: "<xml".into() },
            ClientMessage::Check {
                xml: TILE.replace("controls_repeat", "spin"),
            },
            ClientMessage::SelectTask {
                task_id: "nope".into(),
            },
            ClientMessage::Trace,
        ] {
            let out = handle_message(&mut s, &reg, msg);
            assert!(matches!(&out[..], [ServerMessage::Error { .. }]), "{out:?}");
            assert_eq!(
                (
                    s.history.clone(),
                    s.last_workspace_xml.clone(),
                    s.task_id.clone()
                ),
                before
            );
        }
    }

    #[test]
    fn catalog_is_enforced() {
        let (mut s, reg) = selected("knights-tour");
        let out = handle_message(&mut s, &reg, ClientMessage::Check { xml: TILE.into() });
        assert!(
            matches!(&out[..], [ServerMessage::Error { code, .. }] if code == "INVALID_PROGRAM")
        );
    }

    #[test]
    fn history_is_capped() {
        let mut s = Session::new("h");
        for i in 0..21 {
            s.push_history("student", format!("m{i}"));
        }
        assert_eq!(s.history().len(), 20);
        assert_eq!(s.history().next().unwrap().text, "m1");
    }

    #[test]
    fn frames_round_trip() {
        for m in [
            ClientMessage::Run {
                xml: "<xml/>".into(),
            },
            ClientMessage::SelectTask {
                task_id: "mineral".into(),
            },
            ClientMessage::Trace,
            ClientMessage::Chat {
                role: "teacher".into(),
                text: "hello".into(),
            },
        ] {
            assert_eq!(ClientMessage::from_text(&m.to_text()).unwrap(), m);
        }
        assert!(
            matches!(ClientMessage::from_text("{\"type\":\"FLY\"}"), Err(ServerMessage::Error { code, .. }) if code == "UNKNOWN_TYPE")
        );
        assert!(
            matches!(ClientMessage::from_text("nope"), Err(ServerMessage::Error { code, .. }) if code == "BAD_FRAME")
        );
        let e = ServerMessage::error("X", "y");
        assert_eq!(
            e.to_text(),
            r#"{"type":"ERROR","payload":{"code":"X","message":"y"}}"#
        );
        assert_eq!(
            serde_json::from_str::<ServerMessage>(&e.to_text()).unwrap(),
            e
        );
    }

    #[test]
    fn prompt_parts() {
        let (mut s, reg) = selected("tile-cleaning");
        let t = find_task(&reg, "tile-cleaning").unwrap();
        let b = build_prompt(t, &s);
        assert!(b
            .role_preamble
            .contains("encouraging AI assistant that returns structured JSON outputs"));
        assert!(b.task_instructions.contains("round(T × X / 300)"));
        assert!(b.context_block.contains("(empty)"));
        for i in 0..25 {
            s.push_history("student", format!("entry-{i}"));
        }
        let b = build_prompt(t, &s);
        let n = b
            .context_block
            .lines()
            .filter(|l| l.starts_with("[student] entry-"))
            .count();
        assert_eq!(n, 20);
        assert!(!b.context_block.contains("entry-4\n"));

        let custom = TaskSpec::empty(
            "custom",
            Pose::new(0, 0, Orientation::North),
            SuccessRule::CollectAllMinerals,
        );
        assert!(build_prompt(&custom, &s)
            .task_instructions
            .contains("collect every mineral"));
        for t in &reg {
            assert!(!task_instructions(t).is_empty());
        }
    }
}
