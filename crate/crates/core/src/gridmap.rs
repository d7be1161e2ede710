//! Occupancy grid maps: representation, ASCII ingestion, random generation
//! and the neighbor queries shared by every planner.
//!
//! Coordinates follow the text layout of the map file: `x` is the column,
//! `y` is the row, the origin is the top-left cell and `y` grows downward.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

impl CellState {
    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '.' => Some(CellState::Free),
            '#' => Some(CellState::Occupied),
            '?' => Some(CellState::Unknown),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            CellState::Free => '.',
            CellState::Occupied => '#',
            CellState::Unknown => '?',
        }
    }
}

/// A cell coordinate. Signed so that candidate cells one step outside the
/// map can still be represented and rejected by bounds checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPose {
    pub x: i32,
    pub y: i32,
}

impl GridPose {
    pub const fn new(x: i32, y: i32) -> Self {
        GridPose { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        GridPose::new(self.x + dx, self.y + dy)
    }

    pub fn manhattan(self, other: GridPose) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn chebyshev(self, other: GridPose) -> u32 {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }

    pub fn euclidean(self, other: GridPose) -> f64 {
        let dx = f64::from(self.x - other.x);
        let dy = f64::from(self.y - other.y);
        dx.hypot(dy)
    }
}

impl fmt::Display for GridPose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl From<(i32, i32)> for GridPose {
    fn from((x, y): (i32, i32)) -> Self {
        GridPose::new(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

/// Cardinal offsets in the fixed expansion order up, right, left, down.
pub const FOUR_OFFSETS: [(i32, i32); 4] = [(0, -1), (1, 0), (-1, 0), (0, 1)];

/// Diagonal offsets in the order NE, SE, SW, NW.
pub const DIAGONAL_OFFSETS: [(i32, i32); 4] = [(1, -1), (1, 1), (-1, 1), (-1, -1)];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: row has {found} cells, expected {expected}")]
    RaggedRows { line: usize, expected: usize, found: usize },
    #[error("line {line}, column {column}: unknown map character {ch:?}")]
    UnknownCharacter { line: usize, column: usize, ch: char },
    #[error("expected {expected} map rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("invalid grid dimensions {width}x{height} at resolution {resolution}")]
    InvalidDimensions {
        width: usize,
        height: usize,
        resolution: f64,
    },
    #[error("density {0} is outside [0, 1]")]
    InvalidDensity(f64),
    #[error("cell {0} is outside the grid")]
    OutOfBounds(GridPose),
}

/// Immutable-by-convention occupancy grid; `cells` is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, resolution: f64, cells: Vec<CellState>) -> Result<Self, MapError> {
        if width == 0
            || height == 0
            || !(resolution > 0.0 && resolution.is_finite())
            || cells.len() != width * height
            || i32::try_from(width).is_err()
            || i32::try_from(height).is_err()
        {
            return Err(MapError::InvalidDimensions {
                width,
                height,
                resolution,
            });
        }
        Ok(OccupancyGrid {
            width,
            height,
            resolution,
            cells,
        })
    }

    pub fn filled(width: usize, height: usize, resolution: f64, state: CellState) -> Result<Self, MapError> {
        Self::new(width, height, resolution, vec![state; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn in_bounds(&self, p: GridPose) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as usize) < self.width && (p.y as usize) < self.height
    }

    fn index(&self, p: GridPose) -> Option<usize> {
        self.in_bounds(p).then(|| p.y as usize * self.width + p.x as usize)
    }

    pub fn get(&self, p: GridPose) -> Option<CellState> {
        self.index(p).map(|i| self.cells[i])
    }

    pub fn set(&mut self, p: GridPose, state: CellState) -> Result<(), MapError> {
        let i = self.index(p).ok_or(MapError::OutOfBounds(p))?;
        self.cells[i] = state;
        Ok(())
    }

    /// True only for in-bounds Free cells. Unknown is never traversable.
    pub fn is_free(&self, p: GridPose) -> bool {
        self.get(p) == Some(CellState::Free)
    }

    pub fn poses(&self) -> impl Iterator<Item = GridPose> + '_ {
        (0..self.height as i32).flat_map(move |y| (0..self.width as i32).map(move |x| GridPose::new(x, y)))
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    /// Traversable neighbors of `s`. Cardinal moves come first in the order
    /// up, right, left, down; `Eight` appends NE, SE, SW, NW. A diagonal is
    /// dropped when both cardinal cells it passes between are Occupied.
    pub fn neighbors(&self, s: GridPose, connectivity: Connectivity) -> Result<Vec<GridPose>, MapError> {
        if !self.in_bounds(s) {
            return Err(MapError::OutOfBounds(s));
        }
        let mut out = Vec::with_capacity(8);
        out.extend(
            FOUR_OFFSETS
                .iter()
                .map(|&(dx, dy)| s.offset(dx, dy))
                .filter(|&p| self.is_free(p)),
        );
        if connectivity == Connectivity::Eight {
            for &(dx, dy) in &DIAGONAL_OFFSETS {
                let p = s.offset(dx, dy);
                if !self.is_free(p) {
                    continue;
                }
                let side_a = self.get(s.offset(dx, 0)) == Some(CellState::Occupied);
                let side_b = self.get(s.offset(0, dy)) == Some(CellState::Occupied);
                if !(side_a && side_b) {
                    out.push(p);
                }
            }
        }
        Ok(out)
    }

    /// Marks every Free cell within Chebyshev distance `radius` of an
    /// Occupied cell as Occupied.
    pub fn inflate(&self, radius: u32) -> OccupancyGrid {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as i32;
        let mut out = self.clone();
        for p in self.poses().filter(|&p| self.get(p) == Some(CellState::Occupied)) {
            for dy in -r..=r {
                for dx in -r..=r {
                    let q = p.offset(dx, dy);
                    if self.is_free(q) {
                        // in bounds, checked by is_free
                        let _ = out.set(q, CellState::Occupied);
                    }
                }
            }
        }
        out
    }
}

/// Parses the ASCII map format: a `<width> <height> <resolution>` header line
/// followed by exactly `height` rows of `width` characters from `.#?`.
pub fn load_map(source: &str) -> Result<OccupancyGrid, MapError> {
    let mut lines = source.split('\n');
    let header = lines.next().unwrap_or("");
    let header = header.strip_suffix('\r').unwrap_or(header);
    let fields: Vec<&str> = header.split(' ').collect();
    let bad_header = |reason: &str| MapError::MalformedHeader {
        line: 1,
        reason: reason.to_string(),
    };
    if fields.len() != 3 {
        return Err(bad_header("expected `<width> <height> <resolution>`"));
    }
    let width: usize = fields[0]
        .parse()
        .map_err(|_| bad_header("width is not a decimal integer"))?;
    let height: usize = fields[1]
        .parse()
        .map_err(|_| bad_header("height is not a decimal integer"))?;
    let resolution: f64 = fields[2]
        .parse()
        .map_err(|_| bad_header("resolution is not a decimal number"))?;
    if width == 0 || height == 0 {
        return Err(bad_header("width and height must be at least 1"));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(bad_header("resolution must be positive and finite"));
    }

    let mut rows: Vec<&str> = lines.collect();
    // A single trailing newline is allowed.
    if rows.last() == Some(&"") {
        rows.pop();
    }

    let mut cells = Vec::with_capacity(width * height);
    for (i, row) in rows.iter().enumerate() {
        let line = i + 2;
        if i >= height {
            return Err(MapError::RowCount {
                expected: height,
                found: rows.len(),
            });
        }
        let found = row.chars().count();
        if found != width {
            return Err(MapError::RaggedRows {
                line,
                expected: width,
                found,
            });
        }
        for (col, ch) in row.chars().enumerate() {
            let state = CellState::from_char(ch).ok_or(MapError::UnknownCharacter {
                line,
                column: col + 1,
                ch,
            })?;
            cells.push(state);
        }
    }
    if rows.len() != height {
        return Err(MapError::RowCount {
            expected: height,
            found: rows.len(),
        });
    }
    OccupancyGrid::new(width, height, resolution, cells)
}

/// Inverse of [`load_map`]; always ends with a newline.
pub fn serialize_map(grid: &OccupancyGrid) -> String {
    let mut out = format!("{} {} {}\n", grid.width, grid.height, grid.resolution);
    for row in grid.cells.chunks(grid.width) {
        out.extend(row.iter().map(|c| c.to_char()));
        out.push('\n');
    }
    out
}

/// Seeded random map. Border cells stay Free; every interior cell is drawn
/// Occupied independently with probability `density`, in row-major order,
/// one `f64` draw per interior cell from a ChaCha8 stream.
pub fn random_map(width: usize, height: usize, density: f64, seed: u64) -> Result<OccupancyGrid, MapError> {
    random_map_with_resolution(width, height, density, seed, 1.0)
}

pub fn random_map_with_resolution(
    width: usize,
    height: usize,
    density: f64,
    seed: u64,
    resolution: f64,
) -> Result<OccupancyGrid, MapError> {
    if !(0.0..=1.0).contains(&density) {
        return Err(MapError::InvalidDensity(density));
    }
    let mut grid = OccupancyGrid::filled(width, height, resolution, CellState::Free)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for y in 1..height.saturating_sub(1) {
        for x in 1..width.saturating_sub(1) {
            if rng.gen::<f64>() < density {
                grid.cells[y * width + x] = CellState::Occupied;
            }
        }
    }
    Ok(grid)
}
