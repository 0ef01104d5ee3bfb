//! Grid environment: MovingAI map parsing, agent kinematics and the Manhattan metric.
//!
//! Cells are addressed row-major with `(0, 0)` at the top-left corner, so a
//! [`Cell`] index is `row * width + col`. Blocked cells are impassable and carry
//! no belief variables.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of an agent, `0..num_agents`.
pub type AgentId = usize;

/// Discrete mission time.
pub type Step = u32;

/// Row-major index of a grid cell.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cell(pub usize);

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// One of the four cardinal moves, or staying put.
///
/// The declaration order is the canonical action order used for every
/// deterministic tie-break in the planners.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Idle,
}

impl Action {
    /// All actions in canonical order.
    pub const ALL: [Action; 5] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::Idle];
    /// Movement actions in canonical order.
    pub const MOVES: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    /// Position of the action in the canonical order.
    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
            Action::Idle => (0, 0),
        }
    }
}

/// An agent's location at a given time.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentPose {
    pub agent: AgentId,
    pub cell: Cell,
    pub time: Step,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: expected {expected} glyphs, found {found}")]
    RowWidth { line: usize, expected: usize, found: usize },
    #[error("line {line}: unknown glyph {glyph:?}")]
    UnknownGlyph { line: usize, glyph: char },
    #[error("expected {expected} map rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("map dimensions must be at least 1x1")]
    Empty,
}

/// Immutable occupancy grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMap {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
    name: String,
}

impl GridMap {
    /// An obstacle-free `width` x `height` map.
    pub fn empty(width: usize, height: usize, name: impl Into<String>) -> Result<Self, MapError> {
        Self::from_blocked(width, height, vec![false; width * height], name)
    }

    pub fn from_blocked(
        width: usize,
        height: usize,
        blocked: Vec<bool>,
        name: impl Into<String>,
    ) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::Empty);
        }
        assert_eq!(blocked.len(), width * height, "blocked mask has wrong length");
        Ok(GridMap { width, height, blocked, name: name.into() })
    }

    /// Parses the MovingAI `.map` format.
    ///
    /// ```text
    /// type octile
    /// height H
    /// width W
    /// map
    /// <H rows of W glyphs>
    /// ```
    ///
    /// `'.'` and `'G'` are passable; `'@'`, `'O'` and `'T'` are blocked.
    pub fn parse(text: &str, name: impl Into<String>) -> Result<Self, MapError> {
        let mut lines = text.lines().map(|l| l.trim_end()).enumerate().map(|(i, l)| (i + 1, l));

        let mut header = |key: &str| -> Result<(usize, String), MapError> {
            let (line, content) = lines.next().ok_or(MapError::Malformed {
                line: 0,
                message: format!("missing `{key}` header"),
            })?;
            let mut parts = content.split_whitespace();
            match parts.next() {
                Some(k) if k == key => Ok((line, parts.collect::<Vec<_>>().join(" "))),
                _ => Err(MapError::Malformed { line, message: format!("expected `{key}` header") }),
            }
        };

        let (type_line, kind) = header("type")?;
        if kind.is_empty() {
            return Err(MapError::Malformed { line: type_line, message: "missing map type".into() });
        }
        let parse_dim = |(line, value): (usize, String)| {
            value.parse::<usize>().map_err(|_| MapError::Malformed {
                line,
                message: format!("invalid dimension {value:?}"),
            })
        };
        let height = parse_dim(header("height")?)?;
        let width = parse_dim(header("width")?)?;
        let (map_line, rest) = header("map")?;
        if !rest.is_empty() {
            return Err(MapError::Malformed { line: map_line, message: "unexpected text after `map`".into() });
        }
        if width == 0 || height == 0 {
            return Err(MapError::Empty);
        }

        let mut blocked = Vec::with_capacity(width * height);
        let mut rows = 0;
        for (line, row) in lines {
            if rows == height {
                if row.is_empty() {
                    continue;
                }
                return Err(MapError::RowCount { expected: height, found: rows + 1 });
            }
            let glyphs: Vec<char> = row.chars().collect();
            if glyphs.len() != width {
                return Err(MapError::RowWidth { line, expected: width, found: glyphs.len() });
            }
            for glyph in glyphs {
                blocked.push(match glyph {
                    '.' | 'G' => false,
                    '@' | 'O' | 'T' => true,
                    other => return Err(MapError::UnknownGlyph { line, glyph: other }),
                });
            }
            rows += 1;
        }
        if rows != height {
            return Err(MapError::RowCount { expected: height, found: rows });
        }
        Ok(GridMap { width, height, blocked, name: name.into() })
    }

    /// Serializes back to MovingAI text using `'.'` and `'@'`.
    pub fn to_map_string(&self) -> String {
        let mut out = format!("type octile\nheight {}\nwidth {}\nmap\n", self.height, self.width);
        for row in self.blocked.chunks(self.width) {
            out.extend(row.iter().map(|&b| if b { '@' } else { '.' }));
            out.push('\n');
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_cells(&self) -> usize {
        self.blocked.len()
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.0 < self.blocked.len()
    }

    pub fn is_passable(&self, cell: Cell) -> bool {
        self.contains(cell) && !self.blocked[cell.0]
    }

    /// `(row, col)` of a cell.
    pub fn coords(&self, cell: Cell) -> (usize, usize) {
        (cell.0 / self.width, cell.0 % self.width)
    }

    pub fn cell_at(&self, row: usize, col: usize) -> Option<Cell> {
        (row < self.height && col < self.width).then(|| Cell(row * self.width + col))
    }

    pub fn passable_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.blocked.iter().enumerate().filter(|(_, b)| !**b).map(|(i, _)| Cell(i))
    }

    /// The cell reached from `cell` by `action`, if in bounds and passable.
    pub fn step(&self, cell: Cell, action: Action) -> Option<Cell> {
        let (row, col) = self.coords(cell);
        let (dr, dc) = action.delta();
        let row = row.checked_add_signed(dr)?;
        let col = col.checked_add_signed(dc)?;
        self.cell_at(row, col).filter(|&c| self.is_passable(c))
    }

    /// Feasible actions at `cell` in canonical order. Idle is offered only
    /// when no move is possible.
    pub fn feasible_actions(&self, cell: Cell) -> Vec<Action> {
        let moves: Vec<Action> = Action::MOVES.into_iter().filter(|&a| self.step(cell, a).is_some()).collect();
        if moves.is_empty() {
            vec![Action::Idle]
        } else {
            moves
        }
    }

    /// `|Δrow| + |Δcol|` between two cells.
    pub fn manhattan(&self, a: Cell, b: Cell) -> usize {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        ra.abs_diff(rb) + ca.abs_diff(cb)
    }

    /// Squared Euclidean distance in cell units.
    pub fn squared_distance(&self, a: Cell, b: Cell) -> f64 {
        let (ra, ca) = self.coords(a);
        let (rb, cb) = self.coords(b);
        let dr = ra.abs_diff(rb) as f64;
        let dc = ca.abs_diff(cb) as f64;
        dr * dr + dc * dc
    }
}

/// Applies `action` to `pose`. Returns `None` if the target cell is outside
/// the map or blocked; the caller decides what to do instead.
pub fn apply_action(map: &GridMap, pose: AgentPose, action: Action) -> Option<AgentPose> {
    map.step(pose.cell, action).map(|cell| AgentPose { cell, time: pose.time + 1, ..pose })
}

pub fn manhattan_distance(map: &GridMap, p: &AgentPose, q: &AgentPose) -> usize {
    map.manhattan(p.cell, q.cell)
}
