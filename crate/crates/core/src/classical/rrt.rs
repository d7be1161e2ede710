//! Rapidly-exploring random tree over the free space of an occupancy grid.
//!
//! Tree nodes live in continuous cell space, where cell `(i, j)` covers
//! `[i, i+1) x [j, j+1)` and its center is `(i + 0.5, j + 0.5)`. Each edge is
//! accepted only if every cell its segment touches is Free. The finished
//! tree path is re-discretized into a 4-connected cell sequence.
//!
//! Random stream (ChaCha8, seeded from `RrtParams::seed`), per iteration:
//! one `usize` draw picking a free cell, two `f64` draws for the offset inside
//! that cell, then one `f64` draw for the goal-bias coin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::astar::{check_endpoint, SearchError, SearchResult};
use super::path::PlannedPath;
use crate::gridmap::{GridPose, OccupancyGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrtParams {
    /// Maximum edge length in cells.
    pub step_size: f64,
    pub goal_bias: f64,
    pub max_iterations: usize,
    /// Distance in cells at which a node may connect straight to the goal.
    pub goal_tolerance: f64,
    pub seed: u64,
    /// Greedy line-of-sight shortcutting of the tree path. Off by default.
    pub shortcut: bool,
}

impl Default for RrtParams {
    fn default() -> Self {
        RrtParams {
            step_size: 3.0,
            goal_bias: 0.05,
            max_iterations: 5000,
            goal_tolerance: 1.0,
            seed: 0,
            shortcut: false,
        }
    }
}

impl RrtParams {
    pub fn with_seed(seed: u64) -> Self {
        RrtParams {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), RrtError> {
        let bad = |what: &str| Err(RrtError::InvalidParams(what.to_string()));
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size must be positive");
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return bad("goal_bias must lie in [0, 1]");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.goal_tolerance >= 0.0 && self.goal_tolerance.is_finite()) {
            return bad("goal_tolerance must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RrtError {
    #[error(transparent)]
    Endpoint(#[from] SearchError),
    #[error("invalid RRT parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn center_of(p: GridPose) -> Self {
        Point::new(f64::from(p.x) + 0.5, f64::from(p.y) + 0.5)
    }

    pub fn cell(self) -> GridPose {
        GridPose::new(self.x.floor() as i32, self.y.floor() as i32)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrtNode {
    pub point: Point,
    pub parent: Option<usize>,
}

/// Full record of one RRT call, kept for auditing edges in tests and plots.
#[derive(Debug, Clone, PartialEq)]
pub struct RrtRun {
    pub result: SearchResult,
    pub nodes: Vec<RrtNode>,
    /// Continuous vertices of the returned path, start to goal.
    pub path_points: Vec<Point>,
    pub iterations: usize,
}

impl RrtRun {
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.nodes
            .iter()
            .filter_map(|n| n.parent.map(|p| (self.nodes[p].point, n.point)))
    }
}

/// Cells visited by walking the segment `a -> b`. The walk is 4-connected;
/// where the segment crosses a cell corner exactly it steps in x first, and
/// the cell it skips is reported in `corners`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Raster {
    pub walk: Vec<GridPose>,
    pub corners: Vec<GridPose>,
}

impl Raster {
    /// Every cell the segment touches.
    pub fn supercover(&self) -> impl Iterator<Item = GridPose> + '_ {
        self.walk.iter().chain(self.corners.iter()).copied()
    }
}

pub fn rasterize(a: Point, b: Point) -> Raster {
    let mut cell = a.cell();
    let end = b.cell();
    let mut out = Raster {
        walk: vec![cell],
        corners: Vec::new(),
    };
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let step_x = if dx > 0.0 { 1 } else { -1 };
    let step_y = if dy > 0.0 { 1 } else { -1 };
    let boundary = |origin: f64, c: i32, d: f64| -> f64 {
        if d > 0.0 {
            (f64::from(c) + 1.0 - origin) / d
        } else if d < 0.0 {
            (origin - f64::from(c)) / -d
        } else {
            f64::INFINITY
        }
    };
    let mut t_max_x = boundary(a.x, cell.x, dx);
    let mut t_max_y = boundary(a.y, cell.y, dy);
    let t_delta_x = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };

    let max_steps = cell.x.abs_diff(end.x) + cell.y.abs_diff(end.y) + 2;
    const EPS: f64 = 1e-12;
    for _ in 0..max_steps {
        if cell == end {
            break;
        }
        if (t_max_x - t_max_y).abs() <= EPS {
            // exact corner crossing: both side cells are touched
            out.corners.push(GridPose::new(cell.x, cell.y + step_y));
            cell.x += step_x;
            out.walk.push(cell);
            cell.y += step_y;
            out.walk.push(cell);
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        } else if t_max_x < t_max_y {
            cell.x += step_x;
            t_max_x += t_delta_x;
            out.walk.push(cell);
        } else {
            cell.y += step_y;
            t_max_y += t_delta_y;
            out.walk.push(cell);
        }
    }
    out
}

/// True when every cell touched by the segment is Free.
pub fn segment_free(grid: &OccupancyGrid, a: Point, b: Point) -> bool {
    rasterize(a, b).supercover().all(|c| grid.is_free(c))
}

pub fn rrt(
    grid: &OccupancyGrid,
    start: GridPose,
    goal: GridPose,
    params: &RrtParams,
) -> Result<SearchResult, RrtError> {
    rrt_run(grid, start, goal, params).map(|run| run.result)
}

pub fn rrt_run(grid: &OccupancyGrid, start: GridPose, goal: GridPose, params: &RrtParams) -> Result<RrtRun, RrtError> {
    params.validate()?;
    check_endpoint(grid, start)?;
    check_endpoint(grid, goal)?;
    let start_pt = Point::center_of(start);
    let goal_pt = Point::center_of(goal);
    let mut nodes = vec![RrtNode {
        point: start_pt,
        parent: None,
    }];
    if start == goal {
        return Ok(RrtRun {
            result: SearchResult::Found(PlannedPath::new(vec![start], grid.resolution())),
            nodes,
            path_points: vec![start_pt],
            iterations: 0,
        });
    }

    let free_cells: Vec<GridPose> = grid.poses().filter(|&p| grid.is_free(p)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    for iteration in 1..=params.max_iterations {
        let cell = free_cells[rng.gen_range(0..free_cells.len())];
        let ox: f64 = rng.gen();
        let oy: f64 = rng.gen();
        let coin: f64 = rng.gen();
        let target = if coin < params.goal_bias {
            goal_pt
        } else {
            Point::new(f64::from(cell.x) + ox, f64::from(cell.y) + oy)
        };

        let (nearest, dist) = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, n.point.dist(target)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        if dist == 0.0 {
            continue;
        }
        let from = nodes[nearest].point;
        let scale = params.step_size.min(dist) / dist;
        let new_pt = Point::new(
            from.x + (target.x - from.x) * scale,
            from.y + (target.y - from.y) * scale,
        );
        if !segment_free(grid, from, new_pt) {
            continue;
        }
        nodes.push(RrtNode {
            point: new_pt,
            parent: Some(nearest),
        });
        let new_idx = nodes.len() - 1;

        if new_pt.dist(goal_pt) <= params.goal_tolerance && segment_free(grid, new_pt, goal_pt) {
            let goal_idx = if new_pt == goal_pt {
                new_idx
            } else {
                nodes.push(RrtNode {
                    point: goal_pt,
                    parent: Some(new_idx),
                });
                nodes.len() - 1
            };
            let mut path_points = vec![];
            let mut cur = Some(goal_idx);
            while let Some(i) = cur {
                path_points.push(nodes[i].point);
                cur = nodes[i].parent;
            }
            path_points.reverse();
            if params.shortcut {
                path_points = shortcut(grid, &path_points);
            }
            let path = discretize(&path_points, grid.resolution());
            return Ok(RrtRun {
                result: SearchResult::Found(path),
                nodes,
                path_points,
                iterations: iteration,
            });
        }
    }
    Ok(RrtRun {
        result: SearchResult::NoPath,
        nodes,
        path_points: Vec::new(),
        iterations: params.max_iterations,
    })
}

/// Greedy line-of-sight shortcutting: from each vertex jump to the farthest
/// later vertex with a collision-free segment.
pub fn shortcut(grid: &OccupancyGrid, points: &[Point]) -> Vec<Point> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut out = vec![points[0]];
    let mut i = 0;
    while i < points.len() - 1 {
        let mut j = points.len() - 1;
        while j > i + 1 && !segment_free(grid, points[i], points[j]) {
            j -= 1;
        }
        out.push(points[j]);
        i = j;
    }
    out
}

/// Concatenates the 4-connected walks of consecutive segments.
pub fn discretize(points: &[Point], resolution: f64) -> PlannedPath {
    let mut waypoints: Vec<GridPose> = Vec::new();
    for pair in points.windows(2) {
        for c in rasterize(pair[0], pair[1]).walk {
            if waypoints.last() != Some(&c) {
                waypoints.push(c);
            }
        }
    }
    if waypoints.is_empty() {
        if let Some(p) = points.first() {
            waypoints.push(p.cell());
        }
    }
    PlannedPath::new(waypoints, resolution)
}
