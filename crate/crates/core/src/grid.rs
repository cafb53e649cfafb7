//! Grid-world kinematics: cells, orientations, relative translations and
//! boundary enforcement on the square task grid.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Side length of the built-in grid, in cells.
pub const GRID_SIZE: i32 = 5;
/// Physical side length of one cell, in millimetres.
pub const CELL_SIZE_MM: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConstants {
    pub size: i32,
    pub cell_size_mm: f64,
}

impl Default for GridConstants {
    fn default() -> Self {
        GridConstants {
            size: GRID_SIZE,
            cell_size_mm: CELL_SIZE_MM,
        }
    }
}

/// A grid cell as `(column, row)`. Row 0 is the bottom edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn on_grid(self) -> bool {
        (0..GRID_SIZE).contains(&self.x) && (0..GRID_SIZE).contains(&self.y)
    }

    pub fn offset(self, d: Delta) -> Cell {
        Cell::new(self.x + d.dx, self.y + d.dy)
    }

    /// The up-to-four on-grid orthogonal neighbours, in E, N, W, S order.
    pub fn neighbours(self) -> impl Iterator<Item = Cell> {
        [(1, 0), (0, 1), (-1, 0), (0, -1)]
            .into_iter()
            .map(move |(dx, dy)| Cell::new(self.x + dx, self.y + dy))
            .filter(|c| c.on_grid())
    }

    pub fn is_adjacent(self, other: Cell) -> bool {
        (self.x - other.x).abs() + (self.y - other.y).abs() == 1
    }

    /// Every cell of the grid in row-major order from the bottom-left.
    pub fn all() -> impl Iterator<Item = Cell> {
        (0..GRID_SIZE).flat_map(|y| (0..GRID_SIZE).map(move |x| Cell::new(x, y)))
    }
}

impl From<[i32; 2]> for Cell {
    fn from([x, y]: [i32; 2]) -> Self {
        Cell::new(x, y)
    }
}

impl From<Cell> for [i32; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(alias = "north")]
    North,
    #[serde(alias = "east")]
    East,
    #[serde(alias = "south")]
    South,
    #[serde(alias = "west")]
    West,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::North,
        Orientation::East,
        Orientation::South,
        Orientation::West,
    ];

    /// Number of clockwise quarter turns from North.
    fn quarter_turns(self) -> i32 {
        match self {
            Orientation::North => 0,
            Orientation::East => 1,
            Orientation::South => 2,
            Orientation::West => 3,
        }
    }

    fn from_quarter_turns(q: i32) -> Self {
        Orientation::ALL[q.rem_euclid(4) as usize]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::North => "North",
            Orientation::East => "East",
            Orientation::South => "South",
            Orientation::West => "West",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "north" | "n" | "up" => Some(Orientation::North),
            "east" | "e" | "right" => Some(Orientation::East),
            "south" | "s" | "down" => Some(Orientation::South),
            "west" | "w" | "left" => Some(Orientation::West),
            _ => None,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Translation direction relative to the robot's facing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelDir {
    Forward,
    Backward,
    Left,
    Right,
}

impl RelDir {
    pub const ALL: [RelDir; 4] = [
        RelDir::Forward,
        RelDir::Backward,
        RelDir::Left,
        RelDir::Right,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelDir::Forward => "forward",
            RelDir::Backward => "backward",
            RelDir::Left => "left",
            RelDir::Right => "right",
        }
    }

    pub fn opposite(self) -> RelDir {
        match self {
            RelDir::Forward => RelDir::Backward,
            RelDir::Backward => RelDir::Forward,
            RelDir::Left => RelDir::Right,
            RelDir::Right => RelDir::Left,
        }
    }
}

impl fmt::Display for RelDir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Signed displacement in whole cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Delta {
    pub dx: i32,
    pub dy: i32,
}

impl Delta {
    pub const fn new(dx: i32, dy: i32) -> Self {
        Delta { dx, dy }
    }

    pub fn manhattan(self) -> i32 {
        self.dx.abs() + self.dy.abs()
    }
}

impl std::ops::Neg for Delta {
    type Output = Delta;
    fn neg(self) -> Delta {
        Delta::new(-self.dx, -self.dy)
    }
}

impl std::ops::Add for Delta {
    type Output = Delta;
    fn add(self, o: Delta) -> Delta {
        Delta::new(self.dx + o.dx, self.dy + o.dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pose {
    pub cell: Cell,
    pub orientation: Orientation,
}

impl Pose {
    pub const fn new(x: i32, y: i32, orientation: Orientation) -> Self {
        Pose {
            cell: Cell::new(x, y),
            orientation,
        }
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.cell.x, self.cell.y, self.orientation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum KinematicsError {
    #[error("speed and duration must be positive finite numbers (got speed={speed}, duration={duration})")]
    NonPositiveInput { speed: f64, duration: f64 },
    #[error("unsupported rotation angle {0} (only 90 and 180 are allowed)")]
    UnsupportedAngle(u32),
    #[error("out of bounds at {0}")]
    OutOfBounds(Cell),
}

/// Cells travelled by a move block: `round(duration * speed / 300)` with
/// halves rounded away from zero.
pub fn displacement_cells(speed: f64, duration: f64) -> Result<u32, KinematicsError> {
    if !(speed.is_finite() && duration.is_finite() && speed > 0.0 && duration > 0.0) {
        return Err(KinematicsError::NonPositiveInput { speed, duration });
    }
    // f64::round is half-away-from-zero.
    let cells = (duration * speed / CELL_SIZE_MM).round();
    Ok(cells.min(u32::MAX as f64) as u32)
}

/// Unit vector of a relative direction for a robot facing North, rotated
/// clockwise by the orientation's quarter turns.
fn unit_vector(o: Orientation, rel: RelDir) -> Delta {
    let north = match rel {
        RelDir::Forward => Delta::new(0, 1),
        RelDir::Backward => Delta::new(0, -1),
        RelDir::Left => Delta::new(-1, 0),
        RelDir::Right => Delta::new(1, 0),
    };
    // Clockwise quarter turn maps (x, y) -> (y, -x).
    (0..o.quarter_turns()).fold(north, |d, _| Delta::new(d.dy, -d.dx))
}

pub fn relative_to_global(o: Orientation, rel: RelDir, n: u32) -> Delta {
    let u = unit_vector(o, rel);
    let n = n as i32;
    Delta::new(u.dx * n, u.dy * n)
}

/// Unit steps along a single-axis (or L-free) delta, axis x first.
pub(crate) fn unit_steps(d: Delta) -> impl Iterator<Item = Delta> {
    let sx = Delta::new(d.dx.signum(), 0);
    let sy = Delta::new(0, d.dy.signum());
    std::iter::repeat_n(sx, d.dx.unsigned_abs() as usize)
        .chain(std::iter::repeat_n(sy, d.dy.unsigned_abs() as usize))
}

/// Translate `p` by `d`, one cell at a time. Fails on the first cell that
/// leaves the grid; the input pose is never modified.
pub fn apply_delta(p: Pose, d: Delta) -> Result<Pose, KinematicsError> {
    let mut cell = p.cell;
    for step in unit_steps(d) {
        cell = cell.offset(step);
        if !cell.on_grid() {
            return Err(KinematicsError::OutOfBounds(cell));
        }
    }
    Ok(Pose {
        cell,
        orientation: p.orientation,
    })
}

pub fn rotate(o: Orientation, side: Side, degrees: u32) -> Result<Orientation, KinematicsError> {
    let quarters = match degrees {
        90 => 1,
        180 => 2,
        other => return Err(KinematicsError::UnsupportedAngle(other)),
    };
    let signed = match side {
        Side::Right => quarters,
        Side::Left => -quarters,
    };
    Ok(Orientation::from_quarter_turns(o.quarter_turns() + signed))
}
