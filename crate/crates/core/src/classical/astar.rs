use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use super::path::PlannedPath;
use crate::gridmap::{Connectivity, GridPose, OccupancyGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("endpoint {0} is out of bounds or not free")]
    InvalidEndpoint(GridPose),
}

/// Outcome of a successful search call. `NoPath` is an ordinary result.
#[derive(Debug, Clone, PartialEq)]
pub enum SearchResult {
    Found(PlannedPath),
    NoPath,
}

impl SearchResult {
    pub fn path(&self) -> Option<&PlannedPath> {
        match self {
            SearchResult::Found(p) => Some(p),
            SearchResult::NoPath => None,
        }
    }

    pub fn into_path(self) -> Option<PlannedPath> {
        match self {
            SearchResult::Found(p) => Some(p),
            SearchResult::NoPath => None,
        }
    }
}

pub(crate) fn check_endpoint(grid: &OccupancyGrid, p: GridPose) -> Result<(), SearchError> {
    if grid.is_free(p) {
        Ok(())
    } else {
        Err(SearchError::InvalidEndpoint(p))
    }
}

pub fn heuristic(a: GridPose, b: GridPose, connectivity: Connectivity) -> f64 {
    let dx = f64::from(a.x.abs_diff(b.x));
    let dy = f64::from(a.y.abs_diff(b.y));
    match connectivity {
        Connectivity::Four => dx + dy,
        Connectivity::Eight => {
            let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
            hi + (std::f64::consts::SQRT_2 - 1.0) * lo
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    seq: u64,
    node: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // BinaryHeap is a max-heap: reverse so the lowest f, then lowest h, then
    // earliest insertion pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// A* over the grid with unit cardinal and sqrt(2) diagonal step costs.
/// Manhattan heuristic under `Four`, octile under `Eight`.
pub fn astar(
    grid: &OccupancyGrid,
    start: GridPose,
    goal: GridPose,
    connectivity: Connectivity,
) -> Result<SearchResult, SearchError> {
    check_endpoint(grid, start)?;
    check_endpoint(grid, goal)?;
    if start == goal {
        return Ok(SearchResult::Found(PlannedPath::new(vec![start], grid.resolution())));
    }

    let w = grid.width();
    let index = |p: GridPose| p.y as usize * w + p.x as usize;
    let pose = |i: usize| GridPose::new((i % w) as i32, (i / w) as i32);

    let n = grid.width() * grid.height();
    let mut g_score = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;

    let s = index(start);
    let goal_idx = index(goal);
    g_score[s] = 0.0;
    let h0 = heuristic(start, goal, connectivity);
    open.push(OpenEntry {
        f: h0,
        h: h0,
        seq,
        node: s,
    });

    while let Some(OpenEntry { node, .. }) = open.pop() {
        if closed[node] {
            continue;
        }
        if node == goal_idx {
            let mut waypoints = vec![goal];
            let mut cur = node;
            while cur != s {
                cur = parent[cur];
                waypoints.push(pose(cur));
            }
            waypoints.reverse();
            return Ok(SearchResult::Found(PlannedPath::new(waypoints, grid.resolution())));
        }
        closed[node] = true;
        let here = pose(node);
        // in bounds by construction
        let neighbors = grid.neighbors(here, connectivity).unwrap_or_default();
        for next in neighbors {
            let ni = index(next);
            if closed[ni] {
                continue;
            }
            let step = if next.x != here.x && next.y != here.y {
                std::f64::consts::SQRT_2
            } else {
                1.0
            };
            let tentative = g_score[node] + step;
            if tentative < g_score[ni] {
                g_score[ni] = tentative;
                parent[ni] = node;
                let h = heuristic(next, goal, connectivity);
                seq += 1;
                open.push(OpenEntry {
                    f: tentative + h,
                    h,
                    seq,
                    node: ni,
                });
            }
        }
    }
    Ok(SearchResult::NoPath)
}
