//! Baseline planners: A*, an exhaustive Dijkstra oracle, and RRT.

pub mod astar;
pub mod dijkstra;
pub mod path;
pub mod rrt;

pub use astar::{astar, heuristic, SearchError, SearchResult};
pub use dijkstra::dijkstra_oracle;
pub use path::{path_length, PathError, PlannedPath};
pub use rrt::{rrt, rrt_run, segment_free, Point, RrtError, RrtParams, RrtRun};
