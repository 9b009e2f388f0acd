//! Sampling-based search for executions that reach a goal region: an RRT
//! over hybrid states whose edges are constant-input simulations of fixed
//! length.

mod distance;
mod extract;
mod sampler;
mod search;
mod tree;

use thiserror::Error;

pub use distance::{circular_dist, distance, DistanceSpec};
pub use extract::extract_execution;
pub use sampler::{sample_state, search_box, PlannerRng, RangeClass, SamplerSpec};
pub use search::{
    build_tree, expand, nearest, select_new, simulate_edge, EdgeRun, ExpandStats, Executor,
    Feasibility, IterationRecord, PlannerConfig, PlannerOutcome, PlanningProblem, RunStats,
    TimingBreakdown, Unconstrained,
};
pub use tree::{Candidate, EdgeInput, GoalHit, SearchTree, TreeNode};

use crate::dae::DaeError;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error("every candidate of the nearest node was infeasible")]
    NoFeasibleCandidate,
    #[error("replay of node {node} failed: {reason}")]
    Replay { node: usize, reason: String },
    #[error(transparent)]
    Solver(#[from] DaeError),
}
