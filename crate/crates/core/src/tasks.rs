//! Task definitions: world layout, admissible blocks, success rule and
//! simulation policies. Five tasks are built in; more can be loaded from
//! JSON task files.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block_ast::{BlockCatalog, BlockKind};
use crate::grid::{Cell, Orientation, Pose, RelDir};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    pub label: String,
    pub cell: Cell,
}

/// One step of the required helper-procedure shape: a move in `dir`
/// covering exactly `cells` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternStep {
    pub dir: RelDir,
    pub cells: u32,
}

/// Program-structure requirements checked on the AST, not the trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StructuralChecks {
    /// Body of the required procedure, any name.
    pub procedure: Vec<PatternStep>,
    /// Repeat count of the loop that calls it.
    pub loop_times: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum SuccessRule {
    #[serde(rename_all = "camelCase")]
    CoverAllCells {
        #[serde(default)]
        exceptions: BTreeSet<Cell>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        structural: Option<StructuralChecks>,
    },
    FollowExactCellPath {
        path: Vec<Cell>,
    },
    CollectAllMinerals,
    TransportAllItems {
        to: Cell,
    },
    #[serde(rename_all = "camelCase")]
    KnightFullCover {
        goal: Cell,
        #[serde(default)]
        exceptions: BTreeSet<Cell>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Policies {
    /// Interior cells of a knight leg count towards coverage and revisits.
    pub knight_intermediates_count: bool,
    /// Obstacles also block interior cells of a knight leg, not just the
    /// corner and landing cells.
    pub knight_intermediates_blocked: bool,
    /// Evaluate wolf/goat/cabbage safety on the unattended bank.
    pub safety_rules: bool,
    /// Stop the run at the first out-of-bounds step.
    pub halt_on_out_of_bounds: bool,
}

impl Default for Policies {
    fn default() -> Self {
        Policies {
            knight_intermediates_count: true,
            knight_intermediates_blocked: false,
            safety_rules: true,
            halt_on_out_of_bounds: true,
        }
    }
}

/// Partial policy overrides, as read from a `--policies` file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PolicyOverrides {
    pub knight_intermediates_count: Option<bool>,
    pub knight_intermediates_blocked: Option<bool>,
    pub safety_rules: Option<bool>,
    pub halt_on_out_of_bounds: Option<bool>,
}

impl PolicyOverrides {
    pub fn apply(&self, p: &mut Policies) {
        if let Some(v) = self.knight_intermediates_count {
            p.knight_intermediates_count = v;
        }
        if let Some(v) = self.knight_intermediates_blocked {
            p.knight_intermediates_blocked = v;
        }
        if let Some(v) = self.safety_rules {
            p.safety_rules = v;
        }
        if let Some(v) = self.halt_on_out_of_bounds {
            p.halt_on_out_of_bounds = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub id: String,
    pub title: String,
    pub start: Pose,
    pub obstacles: BTreeSet<Cell>,
    pub minerals: BTreeSet<Cell>,
    pub swamps: BTreeSet<Cell>,
    /// Activated in list order.
    pub triggers: Vec<Trigger>,
    pub river: BTreeSet<Cell>,
    /// Items initially on the left bank.
    pub items: Vec<String>,
    pub right_bank: Option<Cell>,
    pub forbidden: BTreeSet<Cell>,
    pub energy: Option<i64>,
    pub catalog: BlockCatalog,
    pub success: SuccessRule,
    pub policies: Policies,
}

impl TaskSpec {
    /// Minimal task on an empty grid; fields are filled in by the caller.
    pub fn empty(id: impl Into<String>, start: Pose, success: SuccessRule) -> Self {
        let id = id.into();
        TaskSpec {
            title: id.clone(),
            id,
            start,
            obstacles: BTreeSet::new(),
            minerals: BTreeSet::new(),
            swamps: BTreeSet::new(),
            triggers: Vec::new(),
            river: BTreeSet::new(),
            items: Vec::new(),
            right_bank: None,
            forbidden: BTreeSet::new(),
            energy: None,
            catalog: BlockCatalog::full(),
            success,
            policies: Policies::default(),
        }
    }

    pub fn is_knight_task(&self) -> bool {
        matches!(self.success, SuccessRule::KnightFullCover { .. })
    }

    /// River ends: the cell next to the left bank and the one next to the
    /// right bank. The river runs along a row.
    pub fn river_ends(&self) -> Option<(Cell, Cell)> {
        Some((*self.river.iter().min()?, *self.river.iter().max()?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TaskFile::from(self)).expect("task file serializes")
    }

    pub fn check_geometry(&self) -> Result<(), TaskError> {
        let off =
            |what: &str, c: Cell| TaskError::GeometryInvalid(format!("{what} {c} is off the grid"));
        let cells = std::iter::once(("start", self.start.cell))
            .chain(self.obstacles.iter().map(|c| ("obstacle", *c)))
            .chain(self.minerals.iter().map(|c| ("mineral", *c)))
            .chain(self.swamps.iter().map(|c| ("swamp", *c)))
            .chain(self.triggers.iter().map(|t| ("trigger", t.cell)))
            .chain(self.river.iter().map(|c| ("river cell", *c)))
            .chain(self.right_bank.iter().map(|c| ("right bank", *c)))
            .chain(self.forbidden.iter().map(|c| ("forbidden cell", *c)));
        for (what, c) in cells {
            if !c.on_grid() {
                return Err(off(what, c));
            }
        }
        let conflict = |msg: String| Err(TaskError::GeometryInvalid(msg));
        if self.obstacles.contains(&self.start.cell) {
            return conflict(format!("start {} is an obstacle", self.start.cell));
        }
        for c in self
            .minerals
            .iter()
            .chain(self.triggers.iter().map(|t| &t.cell))
        {
            if self.obstacles.contains(c) {
                return conflict(format!("{c} is both an obstacle and a mineral/trigger"));
            }
        }
        if !self.river.is_empty() {
            let rows: BTreeSet<i32> = self.river.iter().map(|c| c.y).collect();
            let (lo, hi) = self.river_ends().expect("non-empty river");
            if rows.len() != 1 || (hi.x - lo.x + 1) as usize != self.river.len() {
                return conflict("river cells must be one contiguous row segment".into());
            }
        }
        let mut seen = BTreeSet::new();
        for item in &self.items {
            if !seen.insert(item) {
                return conflict(format!("item `{item}` listed twice"));
            }
        }
        if self.energy.is_some_and(|e| e < 0) {
            return conflict("initial energy must not be negative".into());
        }
        match &self.success {
            SuccessRule::CoverAllCells { exceptions, .. } => {
                if let Some(c) = exceptions.iter().find(|c| !c.on_grid()) {
                    return Err(off("exception", *c));
                }
            }
            SuccessRule::FollowExactCellPath { path } => {
                if let Some(c) = path.iter().find(|c| !c.on_grid()) {
                    return Err(off("path cell", *c));
                }
                if path.first() != Some(&self.start.cell) {
                    return conflict("path must begin at the start cell".into());
                }
                if let Some(w) = path.windows(2).find(|w| !w[0].is_adjacent(w[1])) {
                    return conflict(format!("path cells {} and {} are not adjacent", w[0], w[1]));
                }
                if let Some(c) = path.iter().find(|c| self.obstacles.contains(c)) {
                    return conflict(format!("path crosses obstacle {c}"));
                }
            }
            SuccessRule::CollectAllMinerals => {
                if self.energy.is_none() {
                    return conflict("mineral collection requires an initial energy".into());
                }
            }
            SuccessRule::TransportAllItems { to } => {
                if !to.on_grid() {
                    return Err(off("transport target", *to));
                }
                if self.river.is_empty() {
                    return conflict("item transport requires river cells".into());
                }
            }
            SuccessRule::KnightFullCover { goal, exceptions } => {
                if let Some(c) = std::iter::once(goal)
                    .chain(exceptions)
                    .find(|c| !c.on_grid())
                {
                    return Err(off("knight cell", *c));
                }
                if self.obstacles.contains(goal) {
                    return conflict(format!("goal {goal} is an obstacle"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("task file does not match the schema: {0}")]
    SchemaViolation(String),
    #[error("invalid task geometry: {0}")]
    GeometryInvalid(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartPose {
    pub x: i32,
    pub y: i32,
    pub orientation: Orientation,
}

/// On-disk task document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TaskFile {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub start: StartPose,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub obstacles: BTreeSet<Cell>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub minerals: BTreeSet<Cell>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub swamps: BTreeSet<Cell>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triggers: Vec<Trigger>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub river: BTreeSet<Cell>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_bank: Option<Cell>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub forbidden: BTreeSet<Cell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<i64>,
    pub success: SuccessRule,
    #[serde(default)]
    pub policies: Policies,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<Vec<String>>,
}

impl From<&TaskSpec> for TaskFile {
    fn from(t: &TaskSpec) -> Self {
        TaskFile {
            id: t.id.clone(),
            title: Some(t.title.clone()),
            start: StartPose {
                x: t.start.cell.x,
                y: t.start.cell.y,
                orientation: t.start.orientation,
            },
            obstacles: t.obstacles.clone(),
            minerals: t.minerals.clone(),
            swamps: t.swamps.clone(),
            triggers: t.triggers.clone(),
            river: t.river.clone(),
            items: t.items.clone(),
            right_bank: t.right_bank,
            forbidden: t.forbidden.clone(),
            energy: t.energy,
            success: t.success.clone(),
            policies: t.policies,
            catalog: Some(
                t.catalog
                    .type_names()
                    .into_iter()
                    .map(String::from)
                    .collect(),
            ),
        }
    }
}

impl TryFrom<TaskFile> for TaskSpec {
    type Error = TaskError;

    fn try_from(f: TaskFile) -> Result<Self, TaskError> {
        let catalog = match f.catalog {
            None => BlockCatalog::full(),
            Some(names) => {
                let kinds = names
                    .iter()
                    .map(|n| {
                        BlockKind::from_type_name(n).ok_or_else(|| {
                            TaskError::SchemaViolation(format!(
                                "unknown block type `{n}` in catalog"
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                BlockCatalog::new(kinds)
            }
        };
        let spec = TaskSpec {
            title: f.title.unwrap_or_else(|| f.id.clone()),
            id: f.id,
            start: Pose::new(f.start.x, f.start.y, f.start.orientation),
            obstacles: f.obstacles,
            minerals: f.minerals,
            swamps: f.swamps,
            triggers: f.triggers,
            river: f.river,
            items: f.items,
            right_bank: f.right_bank,
            forbidden: f.forbidden,
            energy: f.energy,
            catalog,
            success: f.success,
            policies: f.policies,
        };
        spec.check_geometry()?;
        Ok(spec)
    }
}

pub fn load_task(document: &str) -> Result<TaskSpec, TaskError> {
    let file: TaskFile =
        serde_json::from_str(document).map_err(|e| TaskError::SchemaViolation(e.to_string()))?;
    TaskSpec::try_from(file)
}

fn cells(list: &[(i32, i32)]) -> BTreeSet<Cell> {
    list.iter().map(|&(x, y)| Cell::new(x, y)).collect()
}

fn motion_catalog(extra: &[BlockKind]) -> BlockCatalog {
    let base = [
        BlockKind::MoveForward,
        BlockKind::MoveBackward,
        BlockKind::MoveLeft,
        BlockKind::MoveRight,
        BlockKind::TurnLeft,
        BlockKind::TurnRight,
        BlockKind::Repeat,
        BlockKind::ProcedureDef,
        BlockKind::ProcedureCall,
    ];
    BlockCatalog::new(base.into_iter().chain(extra.iter().copied()))
}

pub fn tile_cleaning() -> TaskSpec {
    let structural = StructuralChecks {
        procedure: vec![
            PatternStep {
                dir: RelDir::Forward,
                cells: 4,
            },
            PatternStep {
                dir: RelDir::Left,
                cells: 1,
            },
            PatternStep {
                dir: RelDir::Backward,
                cells: 4,
            },
            PatternStep {
                dir: RelDir::Left,
                cells: 1,
            },
        ],
        loop_times: 2,
    };
    TaskSpec {
        title: "Tile Cleaning".into(),
        catalog: motion_catalog(&[]),
        ..TaskSpec::empty(
            "tile-cleaning",
            Pose::new(0, 0, Orientation::East),
            SuccessRule::CoverAllCells {
                exceptions: BTreeSet::new(),
                structural: Some(structural),
            },
        )
    }
}

/// The cell-by-cell route of the secret realm task.
pub const SECRET_REALM_PATH: [(i32, i32); 8] = [
    (1, 1),
    (1, 2),
    (2, 2),
    (3, 2),
    (4, 2),
    (4, 3),
    (4, 2),
    (4, 1),
];

pub fn secret_realm() -> TaskSpec {
    TaskSpec {
        title: "Adventure in the Secret Realm".into(),
        obstacles: cells(&[(0, 4), (0, 2), (1, 3), (2, 1), (3, 1), (3, 3)]),
        triggers: [("A", (4, 3)), ("B", (4, 1)), ("C", (4, 2))]
            .into_iter()
            .map(|(l, (x, y))| Trigger {
                label: l.into(),
                cell: Cell::new(x, y),
            })
            .collect(),
        catalog: motion_catalog(&[]),
        ..TaskSpec::empty(
            "secret-realm",
            Pose::new(1, 1, Orientation::North),
            SuccessRule::FollowExactCellPath {
                path: SECRET_REALM_PATH
                    .iter()
                    .map(|&(x, y)| Cell::new(x, y))
                    .collect(),
            },
        )
    }
}

pub fn mineral_collection() -> TaskSpec {
    TaskSpec {
        title: "Mineral Collection".into(),
        minerals: cells(&[(1, 0), (1, 3), (3, 3)]),
        swamps: cells(&[(0, 2), (2, 2), (2, 3), (2, 4)]),
        energy: Some(6),
        catalog: motion_catalog(&[]),
        ..TaskSpec::empty(
            "mineral-collection",
            Pose::new(0, 0, Orientation::North),
            SuccessRule::CollectAllMinerals,
        )
    }
}

pub fn river_crossing() -> TaskSpec {
    TaskSpec {
        title: "Wolf, Goat, and Cabbage".into(),
        river: cells(&[(0, 0), (1, 0), (2, 0)]),
        items: vec!["wolf".into(), "goat".into(), "cabbage".into()],
        right_bank: Some(Cell::new(3, 0)),
        forbidden: cells(&[(3, 0)]),
        catalog: motion_catalog(&[BlockKind::PickItem, BlockKind::PlaceItem]),
        ..TaskSpec::empty(
            "river-crossing",
            Pose::new(0, 0, Orientation::West),
            SuccessRule::TransportAllItems {
                to: Cell::new(3, 0),
            },
        )
    }
}

pub fn knights_tour() -> TaskSpec {
    let obstacles = cells(&[(3, 1), (4, 3), (4, 4)]);
    TaskSpec {
        title: "Knight's Tour".into(),
        obstacles: obstacles.clone(),
        catalog: BlockCatalog::new([
            BlockKind::MoveKnight,
            BlockKind::TurnLeft,
            BlockKind::TurnRight,
            BlockKind::Repeat,
            BlockKind::ProcedureDef,
            BlockKind::ProcedureCall,
        ]),
        ..TaskSpec::empty(
            "knights-tour",
            Pose::new(0, 0, Orientation::North),
            SuccessRule::KnightFullCover {
                goal: Cell::new(3, 0),
                exceptions: obstacles,
            },
        )
    }
}

/// The five built-in tasks, beginner to advanced.
pub fn builtin_tasks() -> Vec<TaskSpec> {
    vec![
        tile_cleaning(),
        secret_realm(),
        mineral_collection(),
        river_crossing(),
        knights_tour(),
    ]
}

/// Looks a task up by exact id, falling back to a unique id prefix
/// (`mineral` finds `mineral-collection`).
pub fn find_task<'a>(tasks: &'a [TaskSpec], id: &str) -> Result<&'a TaskSpec, TaskError> {
    if let Some(t) = tasks.iter().find(|t| t.id == id) {
        return Ok(t);
    }
    let mut matches = tasks.iter().filter(|t| t.id.starts_with(id));
    match (matches.next(), matches.next()) {
        (Some(t), None) if !id.is_empty() => Ok(t),
        _ => Err(TaskError::UnknownTask(id.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_layouts() {
        let tasks = builtin_tasks();
        assert_eq!(tasks.len(), 5);
        assert_eq!(
            tasks[1].triggers,
            vec![
                Trigger {
                    label: "A".into(),
                    cell: Cell::new(4, 3)
                },
                Trigger {
                    label: "B".into(),
                    cell: Cell::new(4, 1)
                },
                Trigger {
                    label: "C".into(),
                    cell: Cell::new(4, 2)
                },
            ]
        );
        assert_eq!(tasks[2].energy, Some(6));
        assert_eq!(tasks[4].obstacles, cells(&[(3, 1), (4, 3), (4, 4)]));
        assert_eq!(tasks[0].start, Pose::new(0, 0, Orientation::East));
        assert_eq!(tasks[3].start, Pose::new(0, 0, Orientation::West));
        for t in &tasks {
            t.check_geometry().unwrap();
        }
    }

    #[test]
    fn secret_path_avoids_obstacles() {
        let t = secret_realm();
        let SuccessRule::FollowExactCellPath { path } = &t.success else {
            panic!()
        };
        assert_eq!(path.len(), 8);
        assert!(path.iter().all(|c| !t.obstacles.contains(c)));
        assert!(path.windows(2).all(|w| w[0].is_adjacent(w[1])));
    }

    #[test]
    fn knight_free_cells() {
        let t = knights_tour();
        assert_eq!(Cell::all().filter(|c| !t.obstacles.contains(c)).count(), 22);
    }

    #[test]
    fn builtins_round_trip_through_task_files() {
        for t in builtin_tasks() {
            assert_eq!(load_task(&t.to_json()).unwrap(), t, "{}", t.id);
        }
    }

    #[test]
    fn load_rejects_bad_documents() {
        let doc = r#"{"id":"m","start":{"x":0,"y":0,"orientation":"North"},"minerals":[[7,7]],
                      "energy":3,"success":{"kind":"collectAllMinerals"}}"#;
        assert!(matches!(load_task(doc), Err(TaskError::GeometryInvalid(_))));

        let doc = r#"{"id":"m","start":{"x":0,"y":0,"orientation":"North"}}"#;
        assert!(matches!(load_task(doc), Err(TaskError::SchemaViolation(_))));

        let doc = r#"{"id":"m","start":{"x":0,"y":0,"orientation":"North"},"obstacles":[[0,0]],
                      "success":{"kind":"coverAllCells"}}"#;
        assert!(matches!(load_task(doc), Err(TaskError::GeometryInvalid(_))));

        let doc = r#"{"id":"m","start":{"x":0,"y":0,"orientation":"North"},"catalog":["fly_up"],
                      "success":{"kind":"coverAllCells"}}"#;
        assert!(matches!(load_task(doc), Err(TaskError::SchemaViolation(_))));
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let doc = r#"{"id":"free","start":{"x":2,"y":2,"orientation":"South"},"success":{"kind":"coverAllCells"}}"#;
        let t = load_task(doc).unwrap();
        assert_eq!(t.title, "free");
        assert_eq!(t.catalog, BlockCatalog::full());
        assert_eq!(t.policies, Policies::default());
    }

    #[test]
    fn lookup_by_prefix() {
        let tasks = builtin_tasks();
        assert_eq!(
            find_task(&tasks, "mineral").unwrap().id,
            "mineral-collection"
        );
        assert_eq!(
            find_task(&tasks, "secret-realm").unwrap().id,
            "secret-realm"
        );
        assert!(find_task(&tasks, "").is_err());
        assert!(find_task(&tasks, "x").is_err());
    }
}
