//! Two-objective deep sea treasure.
//!
//! Reward channels: 0 = time (-1 every step), 1 = treasure value on the
//! step that enters a treasure cell. The submarine starts in the top-left
//! corner; moves into seabed or off the grid leave it in place.
//!
//! Layout files are plain text:
//!
//! ```text
//! # comment
//! format dst-layout 1
//! values 1 2 3 ...
//! grid
//! S.........
//! T.........
//! #T........
//! ```
//!
//! `.` is water, `#` seabed, `S` the start cell (water), `T` a treasure.
//! Treasure values are assigned to `T` cells in row-major order.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::{Encoder, Environment, RewardVector, Step};
use crate::error::{Error, Result};

pub const STANDARD_LAYOUT: &str = include_str!("../../data/deep_sea_treasure.layout");
pub const LAYOUT_FORMAT: &str = "dst-layout";
pub const LAYOUT_VERSION: u32 = 1;
pub const STEP_CAP: usize = 1000;

pub const TIME: usize = 0;
pub const TREASURE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Water,
    Seabed,
    Treasure(f32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DstLayout {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
    start: (usize, usize),
}

impl DstLayout {
    pub fn standard() -> Self {
        Self::parse(STANDARD_LAYOUT).expect("bundled layout is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let err = |line: usize, msg: &str| Error::Layout {
            line,
            msg: msg.to_string(),
        };
        let mut values: Option<Vec<f32>> = None;
        let mut format_seen = false;
        let mut grid: Vec<(usize, &str)> = Vec::new();
        let mut in_grid = false;

        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') && !in_grid {
                continue;
            }
            if in_grid {
                grid.push((line_no, line));
                continue;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("format") => {
                    let name = parts.next().ok_or_else(|| err(line_no, "missing format name"))?;
                    let version: u32 = parts
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| err(line_no, "missing format version"))?;
                    if name != LAYOUT_FORMAT || version != LAYOUT_VERSION {
                        return Err(err(line_no, &format!("unsupported format {name} {version}")));
                    }
                    format_seen = true;
                }
                Some("values") => {
                    let v = parts
                        .map(|t| t.parse::<f32>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| err(line_no, &format!("bad treasure value: {e}")))?;
                    values = Some(v);
                }
                Some("grid") => in_grid = true,
                Some(other) => return Err(err(line_no, &format!("unknown header `{other}`"))),
                None => {}
            }
        }

        if !format_seen {
            return Err(err(1, "missing `format` header"));
        }
        let values = values.ok_or_else(|| err(1, "missing `values` header"))?;
        if grid.is_empty() {
            return Err(err(1, "empty grid"));
        }
        let cols = grid[0].1.chars().count();
        let mut cells = Vec::with_capacity(grid.len() * cols);
        let mut start = None;
        let mut next_value = values.iter();
        for (r, (line_no, row)) in grid.iter().enumerate() {
            if row.chars().count() != cols {
                return Err(err(*line_no, "grid rows differ in length"));
            }
            for (c, ch) in row.chars().enumerate() {
                let cell = match ch {
                    '.' => Cell::Water,
                    '#' => Cell::Seabed,
                    'S' => {
                        if start.replace((r, c)).is_some() {
                            return Err(err(*line_no, "more than one start cell"));
                        }
                        Cell::Water
                    }
                    'T' => {
                        let v = next_value
                            .next()
                            .ok_or_else(|| err(*line_no, "more treasure cells than values"))?;
                        Cell::Treasure(*v)
                    }
                    other => return Err(err(*line_no, &format!("unknown cell `{other}`"))),
                };
                cells.push(cell);
            }
        }
        if next_value.next().is_some() {
            return Err(err(1, "more values than treasure cells"));
        }
        let start = start.ok_or_else(|| err(1, "no start cell"))?;
        Ok(Self {
            rows: grid.len(),
            cols,
            cells,
            start,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("format {LAYOUT_FORMAT} {LAYOUT_VERSION}\nvalues");
        for (_, v) in self.treasures() {
            write!(out, " {v}").unwrap();
        }
        out.push_str("\ngrid\n");
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(match self.cell(r, c) {
                    _ if (r, c) == self.start => 'S',
                    Cell::Water => '.',
                    Cell::Seabed => '#',
                    Cell::Treasure(_) => 'T',
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn start(&self) -> (usize, usize) {
        self.start
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.cols + col]
    }

    /// Treasure cells and their values, row-major.
    pub fn treasures(&self) -> Vec<((usize, usize), f32)> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match c {
                Cell::Treasure(v) => Some(((i / self.cols, i % self.cols), *v)),
                _ => None,
            })
            .collect()
    }

    /// Cell reached by `action` from `(row, col)`; blocked moves stay put.
    pub fn neighbour(&self, (row, col): (usize, usize), action: DstAction) -> (usize, usize) {
        let (r, c) = (row as isize, col as isize);
        let (nr, nc) = match action {
            DstAction::Up => (r - 1, c),
            DstAction::Down => (r + 1, c),
            DstAction::Left => (r, c - 1),
            DstAction::Right => (r, c + 1),
        };
        if nr < 0 || nc < 0 || nr >= self.rows as isize || nc >= self.cols as isize {
            return (row, col);
        }
        let (nr, nc) = (nr as usize, nc as usize);
        match self.cell(nr, nc) {
            Cell::Seabed => (row, col),
            _ => (nr, nc),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DstAction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl DstAction {
    pub const ALL: [DstAction; 4] = [DstAction::Up, DstAction::Down, DstAction::Left, DstAction::Right];

    pub fn from_index(a: usize) -> Option<Self> {
        Self::ALL.get(a).copied()
    }
}

pub fn encode(layout: &DstLayout, (row, col): (usize, usize), encoder: Encoder) -> Vec<f32> {
    match encoder {
        Encoder::Positional => {
            let rn = if layout.rows > 1 { row as f32 / (layout.rows - 1) as f32 } else { 0.0 };
            let cn = if layout.cols > 1 { col as f32 / (layout.cols - 1) as f32 } else { 0.0 };
            vec![rn, cn]
        }
        Encoder::OneHot => {
            let mut v = vec![0.0; layout.rows * layout.cols];
            v[row * layout.cols + col] = 1.0;
            v
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeepSeaConfig {
    pub step_cap: usize,
    pub encoder: Encoder,
}

impl Default for DeepSeaConfig {
    fn default() -> Self {
        Self {
            step_cap: STEP_CAP,
            encoder: Encoder::OneHot,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeepSeaTreasure {
    layout: Arc<DstLayout>,
    config: DeepSeaConfig,
    position: (usize, usize),
    step_count: usize,
    done: bool,
}

impl DeepSeaTreasure {
    pub fn new(layout: Arc<DstLayout>, config: DeepSeaConfig) -> Result<Self> {
        if config.step_cap == 0 {
            return Err(Error::config("step cap must be >= 1"));
        }
        let position = layout.start();
        Ok(Self {
            layout,
            config,
            position,
            step_count: 0,
            done: false,
        })
    }

    pub fn standard() -> Self {
        Self::new(Arc::new(DstLayout::standard()), DeepSeaConfig::default()).unwrap()
    }

    pub fn layout(&self) -> &DstLayout {
        &self.layout
    }

    pub fn position(&self) -> (usize, usize) {
        self.position
    }
}

impl Environment for DeepSeaTreasure {
    fn num_objectives(&self) -> usize {
        2
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn observation_dim(&self) -> usize {
        match self.config.encoder {
            Encoder::Positional => 2,
            Encoder::OneHot => self.layout.rows * self.layout.cols,
        }
    }

    fn observe(&self) -> Vec<f32> {
        encode(&self.layout, self.position, self.config.encoder)
    }

    fn reset(&mut self) {
        self.position = self.layout.start();
        self.step_count = 0;
        self.done = false;
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if self.done {
            return Err(Error::EpisodeState("deep sea episode already finished".into()));
        }
        let act = DstAction::from_index(action)
            .ok_or_else(|| Error::config(format!("deep sea action {action} out of range")))?;
        self.position = self.layout.neighbour(self.position, act);
        self.step_count += 1;
        let (treasure, terminal) = match self.layout.cell(self.position.0, self.position.1) {
            Cell::Treasure(v) => (v, true),
            _ => (0.0, false),
        };
        let truncated = !terminal && self.step_count >= self.config.step_cap;
        self.done = terminal || truncated;
        Ok(Step {
            rewards: RewardVector(vec![-1.0, treasure]),
            terminal,
            truncated,
        })
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn steps(&self) -> usize {
        self.step_count
    }
}
