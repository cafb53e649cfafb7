//! Typed AST for the Blockly-XML subset used by the robot studio, with a
//! strict parser, a canonical serializer and catalog validation.
//!
//! Only the elements `xml`, `block`, `field`, `next`, `statement` and
//! `mutation` are understood. Attributes other than `type`/`name` are
//! ignored, any other element is rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{RelDir, Side};

pub const BLOCKLY_XMLNS: &str = "https://developers.google.com/blockly/xml";

/// Vertical component of a knight move, relative to the robot's facing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vertical {
    Forward,
    Backward,
}

impl Vertical {
    pub fn as_str(self) -> &'static str {
        match self {
            Vertical::Forward => "forward",
            Vertical::Backward => "backward",
        }
    }

    pub fn rel(self) -> RelDir {
        match self {
            Vertical::Forward => RelDir::Forward,
            Vertical::Backward => RelDir::Backward,
        }
    }
}

/// Which leg of a knight move is walked first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum LegOrder {
    #[default]
    #[serde(rename = "x-first")]
    XFirst,
    #[serde(rename = "y-first")]
    YFirst,
}

impl LegOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            LegOrder::XFirst => "x-first",
            LegOrder::YFirst => "y-first",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "x-first" | "x" => Some(LegOrder::XFirst),
            "y-first" | "y" => Some(LegOrder::YFirst),
            _ => None,
        }
    }
}

/// An L-shaped move: a lateral leg and a forward/backward leg, both relative
/// to the current orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KnightMove {
    pub dir_x: Side,
    pub steps_x: u32,
    pub dir_y: Vertical,
    pub steps_y: u32,
    pub leg_order: LegOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Move {
        dir: RelDir,
        speed: f64,
        duration: f64,
    },
    Turn {
        side: Side,
        degrees: u32,
    },
    Knight(KnightMove),
    Pick {
        item: String,
    },
    Place,
    Repeat {
        times: i64,
        body: Vec<Statement>,
    },
    Call {
        name: String,
    },
}

impl Statement {
    pub fn kind(&self) -> BlockKind {
        match self {
            Statement::Move { dir, .. } => match dir {
                RelDir::Forward => BlockKind::MoveForward,
                RelDir::Backward => BlockKind::MoveBackward,
                RelDir::Left => BlockKind::MoveLeft,
                RelDir::Right => BlockKind::MoveRight,
            },
            Statement::Turn {
                side: Side::Left, ..
            } => BlockKind::TurnLeft,
            Statement::Turn {
                side: Side::Right, ..
            } => BlockKind::TurnRight,
            Statement::Knight(_) => BlockKind::MoveKnight,
            Statement::Pick { .. } => BlockKind::PickItem,
            Statement::Place => BlockKind::PlaceItem,
            Statement::Repeat { .. } => BlockKind::Repeat,
            Statement::Call { .. } => BlockKind::ProcedureCall,
        }
    }

    /// Number of block elements this statement occupies, nested bodies included.
    pub fn block_count(&self) -> usize {
        match self {
            Statement::Repeat { body, .. } => 1 + count_blocks(body),
            _ => 1,
        }
    }
}

pub(crate) fn count_blocks(stmts: &[Statement]) -> usize {
    stmts.iter().map(Statement::block_count).sum()
}

/// A parsed block program: named procedures plus the main chain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockProgram {
    pub procedures: BTreeMap<String, Vec<Statement>>,
    pub main: Vec<Statement>,
}

impl BlockProgram {
    pub fn new(main: Vec<Statement>) -> Self {
        BlockProgram {
            procedures: BTreeMap::new(),
            main,
        }
    }

    pub fn with_procedure(mut self, name: impl Into<String>, body: Vec<Statement>) -> Self {
        self.procedures.insert(name.into(), body);
        self
    }

    /// Total block elements, counting each procedure definition once.
    pub fn block_count(&self) -> usize {
        self.procedures.len()
            + self
                .procedures
                .values()
                .map(|b| count_blocks(b))
                .sum::<usize>()
            + count_blocks(&self.main)
    }

    /// Checks call targets and acyclicity of the call graph.
    pub fn check_calls(&self) -> Result<(), ParseError> {
        for body in self.procedures.values().chain(std::iter::once(&self.main)) {
            for name in calls_in(body) {
                if !self.procedures.contains_key(name) {
                    return Err(ParseError::DanglingCall(name.to_string()));
                }
            }
        }
        if let Some(name) = self.find_recursion() {
            return Err(ParseError::RecursiveProcedure(name));
        }
        Ok(())
    }

    fn find_recursion(&self) -> Option<String> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        fn visit<'a>(
            p: &'a BlockProgram,
            name: &'a str,
            marks: &mut BTreeMap<&'a str, Mark>,
        ) -> Option<String> {
            match marks.get(name) {
                Some(Mark::Active) => return Some(name.to_string()),
                Some(Mark::Done) => return None,
                None => {}
            }
            marks.insert(name, Mark::Active);
            if let Some(body) = p.procedures.get(name) {
                for callee in calls_in(body) {
                    if let Some(r) = visit(p, callee, marks) {
                        return Some(r);
                    }
                }
            }
            marks.insert(name, Mark::Done);
            None
        }
        let mut marks = BTreeMap::new();
        self.procedures
            .keys()
            .find_map(|name| visit(self, name, &mut marks))
    }
}

fn calls_in(stmts: &[Statement]) -> Vec<&str> {
    let mut out = Vec::new();
    fn walk<'a>(stmts: &'a [Statement], out: &mut Vec<&'a str>) {
        for s in stmts {
            match s {
                Statement::Call { name } => out.push(name),
                Statement::Repeat { body, .. } => walk(body, out),
                _ => {}
            }
        }
    }
    walk(stmts, &mut out);
    out
}

/// Every block type the parser understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockKind {
    MoveForward,
    MoveBackward,
    MoveLeft,
    MoveRight,
    TurnLeft,
    TurnRight,
    MoveKnight,
    PickItem,
    PlaceItem,
    Repeat,
    ProcedureDef,
    ProcedureCall,
}

impl BlockKind {
    pub const ALL: [BlockKind; 12] = [
        BlockKind::MoveForward,
        BlockKind::MoveBackward,
        BlockKind::MoveLeft,
        BlockKind::MoveRight,
        BlockKind::TurnLeft,
        BlockKind::TurnRight,
        BlockKind::MoveKnight,
        BlockKind::PickItem,
        BlockKind::PlaceItem,
        BlockKind::Repeat,
        BlockKind::ProcedureDef,
        BlockKind::ProcedureCall,
    ];

    pub fn type_name(self) -> &'static str {
        match self {
            BlockKind::MoveForward => "move_forward",
            BlockKind::MoveBackward => "move_backward",
            BlockKind::MoveLeft => "move_left",
            BlockKind::MoveRight => "move_right",
            BlockKind::TurnLeft => "turn_left",
            BlockKind::TurnRight => "turn_right",
            BlockKind::MoveKnight => "move_knight",
            BlockKind::PickItem => "pick_item",
            BlockKind::PlaceItem => "place_item",
            BlockKind::Repeat => "controls_repeat",
            BlockKind::ProcedureDef => "procedures_defnoreturn",
            BlockKind::ProcedureCall => "procedures_callnoreturn",
        }
    }

    pub fn from_type_name(name: &str) -> Option<Self> {
        BlockKind::ALL.into_iter().find(|k| k.type_name() == name)
    }

    /// Field names that must be present on the block. Calls carry their
    /// target in `<mutation name=..>` instead (a NAME field is also accepted).
    pub fn required_fields(self) -> &'static [&'static str] {
        match self {
            BlockKind::MoveForward
            | BlockKind::MoveBackward
            | BlockKind::MoveLeft
            | BlockKind::MoveRight => &["SPEED", "DURATION"],
            BlockKind::TurnLeft | BlockKind::TurnRight => &["DEGREES"],
            BlockKind::MoveKnight => &["DIR_X", "DIR_Y", "STEPS_X", "STEPS_Y"],
            BlockKind::PickItem => &["ITEM"],
            BlockKind::PlaceItem | BlockKind::ProcedureCall => &[],
            BlockKind::Repeat => &["TIMES"],
            BlockKind::ProcedureDef => &["NAME"],
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.type_name())
    }
}

/// The block types a task admits.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockCatalog {
    blocks: BTreeSet<BlockKind>,
}

impl BlockCatalog {
    pub fn new(blocks: impl IntoIterator<Item = BlockKind>) -> Self {
        BlockCatalog {
            blocks: blocks.into_iter().collect(),
        }
    }

    /// Every known block.
    pub fn full() -> Self {
        BlockCatalog::new(BlockKind::ALL)
    }

    pub fn contains(&self, kind: BlockKind) -> bool {
        self.blocks.contains(&kind)
    }

    pub fn iter(&self) -> impl Iterator<Item = BlockKind> + '_ {
        self.blocks.iter().copied()
    }

    pub fn type_names(&self) -> Vec<&'static str> {
        self.iter().map(BlockKind::type_name).collect()
    }

    /// Catalog as a JSON array of `{type, fields}` descriptors.
    pub fn describe_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.iter()
                .map(
                    |k| serde_json::json!({ "type": k.type_name(), "fields": k.required_fields() }),
                )
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed XML: {0}")]
    XmlMalformed(String),
    #[error("unknown block type `{0}`")]
    UnknownBlockType(String),
    #[error("unsupported element <{0}>")]
    UnknownElement(String),
    #[error("block `{block}` is missing a valid {field} field{}", found.as_ref().map(|v| format!(" (found {v:?})")).unwrap_or_default())]
    MissingField {
        block: String,
        field: String,
        found: Option<String>,
    },
    #[error("call to undefined procedure `{0}`")]
    DanglingCall(String),
    #[error("procedure `{0}` calls itself")]
    RecursiveProcedure(String),
    #[error("invalid block structure: {0}")]
    InvalidStructure(String),
}

pub fn parse_program(xml_text: &str) -> Result<BlockProgram, ParseError> {
    let doc = roxmltree::Document::parse(xml_text)
        .map_err(|e| ParseError::XmlMalformed(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "xml" {
        return Err(ParseError::UnknownElement(
            root.tag_name().name().to_string(),
        ));
    }

    let mut program = BlockProgram::default();
    for child in elements(root) {
        if child.tag_name().name() != "block" {
            return Err(ParseError::UnknownElement(
                child.tag_name().name().to_string(),
            ));
        }
        if block_type(child)? == BlockKind::ProcedureDef {
            let (name, body) = parse_procedure_def(child)?;
            if program.procedures.insert(name.clone(), body).is_some() {
                return Err(ParseError::InvalidStructure(format!(
                    "procedure `{name}` is defined twice"
                )));
            }
        } else {
            program.main.extend(parse_chain(child)?);
        }
    }
    program.check_calls()?;
    Ok(program)
}

fn elements<'a, 'i>(
    node: roxmltree::Node<'a, 'i>,
) -> impl Iterator<Item = roxmltree::Node<'a, 'i>> {
    node.children().filter(|n| n.is_element())
}

fn block_type(node: roxmltree::Node) -> Result<BlockKind, ParseError> {
    let ty = node
        .attribute("type")
        .ok_or_else(|| ParseError::InvalidStructure("block without a type attribute".into()))?;
    BlockKind::from_type_name(ty).ok_or_else(|| ParseError::UnknownBlockType(ty.to_string()))
}

/// The parts of a `<block>` element, split by child element kind.
#[derive(Default)]
struct BlockParts<'a, 'i> {
    fields: BTreeMap<String, String>,
    statements: BTreeMap<String, roxmltree::Node<'a, 'i>>,
    next: Option<roxmltree::Node<'a, 'i>>,
    mutation_name: Option<String>,
}

fn split_block<'a, 'i>(node: roxmltree::Node<'a, 'i>) -> Result<BlockParts<'a, 'i>, ParseError> {
    let mut parts = BlockParts::default();
    for child in elements(node) {
        match child.tag_name().name() {
            "field" => {
                let name = child.attribute("name").unwrap_or_default().to_string();
                parts
                    .fields
                    .insert(name, child.text().unwrap_or_default().to_string());
            }
            "statement" => {
                let name = child.attribute("name").unwrap_or_default().to_string();
                let inner = single_block(child)?;
                if let Some(inner) = inner {
                    parts.statements.insert(name, inner);
                }
            }
            "next" => {
                if parts.next.is_some() {
                    return Err(ParseError::InvalidStructure(
                        "block has two <next> elements".into(),
                    ));
                }
                parts.next = single_block(child)?;
            }
            "mutation" => {
                parts.mutation_name = child.attribute("name").map(str::to_string);
            }
            other => return Err(ParseError::UnknownElement(other.to_string())),
        }
    }
    Ok(parts)
}

/// The block wrapped by a `<next>` or `<statement>` element, if any.
fn single_block<'a, 'i>(
    wrapper: roxmltree::Node<'a, 'i>,
) -> Result<Option<roxmltree::Node<'a, 'i>>, ParseError> {
    let mut found = None;
    for child in elements(wrapper) {
        if child.tag_name().name() != "block" {
            return Err(ParseError::UnknownElement(
                child.tag_name().name().to_string(),
            ));
        }
        if found.replace(child).is_some() {
            return Err(ParseError::InvalidStructure(format!(
                "<{}> holds more than one block",
                wrapper.tag_name().name()
            )));
        }
    }
    Ok(found)
}

fn parse_procedure_def(node: roxmltree::Node) -> Result<(String, Vec<Statement>), ParseError> {
    let parts = split_block(node)?;
    let name = required(&parts, BlockKind::ProcedureDef, "NAME")?
        .trim()
        .to_string();
    if name.is_empty() {
        return Err(missing(
            BlockKind::ProcedureDef,
            "NAME",
            Some(String::new()),
        ));
    }
    if parts.next.is_some() {
        return Err(ParseError::InvalidStructure(format!(
            "procedure definition `{name}` cannot have a next block"
        )));
    }
    let body = match parts.statements.get("STACK") {
        Some(first) => parse_chain(*first)?,
        None => Vec::new(),
    };
    Ok((name, body))
}

/// Parses a block and everything reachable through its `<next>` links.
fn parse_chain(first: roxmltree::Node) -> Result<Vec<Statement>, ParseError> {
    let mut out = Vec::new();
    let mut cursor = Some(first);
    while let Some(node) = cursor {
        let kind = block_type(node)?;
        let parts = split_block(node)?;
        out.push(parse_statement(kind, &parts)?);
        cursor = parts.next;
    }
    Ok(out)
}

fn missing(kind: BlockKind, field: &str, found: Option<String>) -> ParseError {
    ParseError::MissingField {
        block: kind.type_name().to_string(),
        field: field.to_string(),
        found,
    }
}

fn required<'p>(
    parts: &'p BlockParts,
    kind: BlockKind,
    field: &str,
) -> Result<&'p str, ParseError> {
    parts
        .fields
        .get(field)
        .map(String::as_str)
        .ok_or_else(|| missing(kind, field, None))
}

fn number(parts: &BlockParts, kind: BlockKind, field: &str) -> Result<f64, ParseError> {
    let raw = required(parts, kind, field)?;
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| missing(kind, field, Some(raw.to_string())))
}

fn integer<T: std::str::FromStr>(
    parts: &BlockParts,
    kind: BlockKind,
    field: &str,
) -> Result<T, ParseError> {
    let raw = required(parts, kind, field)?;
    raw.trim()
        .parse::<T>()
        .map_err(|_| missing(kind, field, Some(raw.to_string())))
}

fn parse_statement(kind: BlockKind, parts: &BlockParts) -> Result<Statement, ParseError> {
    let mv = |dir| -> Result<Statement, ParseError> {
        Ok(Statement::Move {
            dir,
            speed: number(parts, kind, "SPEED")?,
            duration: number(parts, kind, "DURATION")?,
        })
    };
    let turn = |side| -> Result<Statement, ParseError> {
        Ok(Statement::Turn {
            side,
            degrees: integer(parts, kind, "DEGREES")?,
        })
    };
    match kind {
        BlockKind::MoveForward => mv(RelDir::Forward),
        BlockKind::MoveBackward => mv(RelDir::Backward),
        BlockKind::MoveLeft => mv(RelDir::Left),
        BlockKind::MoveRight => mv(RelDir::Right),
        BlockKind::TurnLeft => turn(Side::Left),
        BlockKind::TurnRight => turn(Side::Right),
        BlockKind::MoveKnight => {
            let dir_x = match required(parts, kind, "DIR_X")?
                .trim()
                .to_ascii_lowercase()
                .as_str()
            {
                "left" => Side::Left,
                "right" => Side::Right,
                other => return Err(missing(kind, "DIR_X", Some(other.to_string()))),
            };
            let dir_y = match required(parts, kind, "DIR_Y")?
                .trim()
                .to_ascii_lowercase()
                .as_str()
            {
                "forward" => Vertical::Forward,
                "backward" => Vertical::Backward,
                other => return Err(missing(kind, "DIR_Y", Some(other.to_string()))),
            };
            let leg_order = match parts.fields.get("LEG_ORDER") {
                None => LegOrder::default(),
                Some(raw) => LegOrder::parse(raw)
                    .ok_or_else(|| missing(kind, "LEG_ORDER", Some(raw.clone())))?,
            };
            Ok(Statement::Knight(KnightMove {
                dir_x,
                steps_x: integer(parts, kind, "STEPS_X")?,
                dir_y,
                steps_y: integer(parts, kind, "STEPS_Y")?,
                leg_order,
            }))
        }
        BlockKind::PickItem => Ok(Statement::Pick {
            item: required(parts, kind, "ITEM")?.trim().to_string(),
        }),
        BlockKind::PlaceItem => Ok(Statement::Place),
        BlockKind::Repeat => {
            let times = integer(parts, kind, "TIMES")?;
            let body = match parts.statements.get("DO") {
                Some(first) => parse_chain(*first)?,
                None => Vec::new(),
            };
            Ok(Statement::Repeat { times, body })
        }
        BlockKind::ProcedureCall => {
            let name = parts
                .mutation_name
                .clone()
                .or_else(|| parts.fields.get("NAME").cloned())
                .map(|n| n.trim().to_string())
                .filter(|n| !n.is_empty())
                .ok_or_else(|| missing(kind, "NAME", None))?;
            Ok(Statement::Call { name })
        }
        BlockKind::ProcedureDef => Err(ParseError::InvalidStructure(
            "procedure definitions must be top-level blocks".into(),
        )),
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

struct Writer {
    out: String,
    depth: usize,
}

impl Writer {
    fn line(&mut self, s: &str) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn field(&mut self, name: &str, value: &str) {
        self.line(&format!("<field name=\"{name}\">{}</field>", escape(value)));
    }

    fn open_block(&mut self, kind: BlockKind) {
        self.line(&format!("<block type=\"{}\">", kind.type_name()));
        self.depth += 1;
    }

    fn chain(&mut self, stmts: &[Statement]) {
        // Each following block nests inside its predecessor's <next>.
        for (i, s) in stmts.iter().enumerate() {
            if i > 0 {
                self.line("<next>");
                self.depth += 1;
            }
            self.open_block(s.kind());
            self.statement_body(s);
        }
        for i in (0..stmts.len()).rev() {
            self.depth -= 1;
            self.line("</block>");
            if i > 0 {
                self.depth -= 1;
                self.line("</next>");
            }
        }
    }

    fn wrapped_chain(&mut self, name: &str, stmts: &[Statement]) {
        if stmts.is_empty() {
            return;
        }
        self.line(&format!("<statement name=\"{name}\">"));
        self.depth += 1;
        self.chain(stmts);
        self.depth -= 1;
        self.line("</statement>");
    }

    fn statement_body(&mut self, s: &Statement) {
        match s {
            Statement::Move {
                speed, duration, ..
            } => {
                self.field("SPEED", &speed.to_string());
                self.field("DURATION", &duration.to_string());
            }
            Statement::Turn { degrees, .. } => self.field("DEGREES", &degrees.to_string()),
            Statement::Knight(k) => {
                self.field("DIR_X", k.dir_x.as_str());
                self.field("DIR_Y", k.dir_y.as_str());
                self.field("STEPS_X", &k.steps_x.to_string());
                self.field("STEPS_Y", &k.steps_y.to_string());
                self.field("LEG_ORDER", k.leg_order.as_str());
            }
            Statement::Pick { item } => self.field("ITEM", item),
            Statement::Place => {}
            Statement::Repeat { times, body } => {
                self.field("TIMES", &times.to_string());
                self.wrapped_chain("DO", body);
            }
            Statement::Call { name } => {
                self.line(&format!("<mutation name=\"{}\"/>", escape(name)))
            }
        }
    }
}

/// Canonical Blockly-XML for a program: procedure definitions first (by
/// name), then the main chain.
pub fn serialize_program(p: &BlockProgram) -> String {
    if p.procedures.is_empty() && p.main.is_empty() {
        return format!("<xml xmlns=\"{BLOCKLY_XMLNS}\"/>\n");
    }
    let mut w = Writer {
        out: format!("<xml xmlns=\"{BLOCKLY_XMLNS}\">\n"),
        depth: 1,
    };
    for (name, body) in &p.procedures {
        w.open_block(BlockKind::ProcedureDef);
        w.field("NAME", name);
        w.wrapped_chain("STACK", body);
        w.depth -= 1;
        w.line("</block>");
    }
    w.chain(&p.main);
    w.out.push_str("</xml>\n");
    w.out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    BlockNotInCatalog(BlockKind),
    NegativeRepeat(i64),
    NonPositiveMotion,
    UnsupportedAngle(u32),
    DanglingCall(String),
    RecursiveProcedure(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Location such as `main[1].DO[0]` or `proc clean_2_rows[2]`.
    pub location: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::BlockNotInCatalog(k) => {
                write!(
                    f,
                    "{}: block `{k}` is not available in this task",
                    self.location
                )
            }
            ViolationKind::NegativeRepeat(n) => {
                write!(
                    f,
                    "{}: repeat count must not be negative (got {n})",
                    self.location
                )
            }
            ViolationKind::NonPositiveMotion => {
                write!(f, "{}: speed and duration must be positive", self.location)
            }
            ViolationKind::UnsupportedAngle(d) => {
                write!(
                    f,
                    "{}: turns must be 90 or 180 degrees (got {d})",
                    self.location
                )
            }
            ViolationKind::DanglingCall(n) => {
                write!(f, "{}: call to undefined procedure `{n}`", self.location)
            }
            ViolationKind::RecursiveProcedure(n) => {
                write!(f, "{}: procedure `{n}` calls itself", self.location)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_program(p: &BlockProgram, cat: &BlockCatalog) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |location: String, kind| violations.push(Violation { location, kind });

    fn walk(
        stmts: &[Statement],
        prefix: &str,
        p: &BlockProgram,
        cat: &BlockCatalog,
        push: &mut dyn FnMut(String, ViolationKind),
    ) {
        for (i, s) in stmts.iter().enumerate() {
            let loc = format!("{prefix}[{i}]");
            if !cat.contains(s.kind()) {
                push(loc.clone(), ViolationKind::BlockNotInCatalog(s.kind()));
            }
            match s {
                Statement::Move {
                    speed, duration, ..
                } => {
                    if !(speed.is_finite()
                        && duration.is_finite()
                        && *speed > 0.0
                        && *duration > 0.0)
                    {
                        push(loc, ViolationKind::NonPositiveMotion);
                    }
                }
                Statement::Turn { degrees, .. } if !matches!(degrees, 90 | 180) => {
                    push(loc, ViolationKind::UnsupportedAngle(*degrees));
                }
                Statement::Repeat { times, body } => {
                    if *times < 0 {
                        push(loc.clone(), ViolationKind::NegativeRepeat(*times));
                    }
                    walk(body, &format!("{loc}.DO"), p, cat, push);
                }
                Statement::Call { name } if !p.procedures.contains_key(name) => {
                    push(loc, ViolationKind::DanglingCall(name.clone()));
                }
                _ => {}
            }
        }
    }

    if !p.procedures.is_empty() && !cat.contains(BlockKind::ProcedureDef) {
        for name in p.procedures.keys() {
            push(
                format!("proc {name}"),
                ViolationKind::BlockNotInCatalog(BlockKind::ProcedureDef),
            );
        }
    }
    for (name, body) in &p.procedures {
        walk(body, &format!("proc {name}"), p, cat, &mut push);
    }
    walk(&p.main, "main", p, cat, &mut push);
    if let Some(name) = p.find_recursion() {
        push(
            format!("proc {name}"),
            ViolationKind::RecursiveProcedure(name),
        );
    }
    ValidationReport { violations }
}
