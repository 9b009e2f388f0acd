//! Hybrid automata `H = (Q, X, U, f, Init, E, G, R)` whose per-mode dynamics
//! are semi-explicit index-1 DAEs, plus hybrid time trajectories and
//! executions with their acceptance checks.

mod automaton;
mod execution;
mod state;
mod trajectory;

use thiserror::Error;

pub use automaton::{Edge, GoalRegion, Guard, HybridAutomaton, InitSet, Reset};
pub use execution::{
    validate_execution, ControlInput, Execution, ExecutionViolation, ResidualKind, Sample,
};
pub use state::{ContinuousState, DiscreteMode, HybridState, StateLayout, VarGroup, VarKind};
pub use trajectory::{validate_trajectory, HybridTimeTrajectory, TrajectoryViolation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HybridError {
    #[error("no edge from mode {from} to mode {to}")]
    EdgeAbsent { from: usize, to: usize },
    #[error("guard of edge {from} -> {to} rejects the current state")]
    GuardFailed { from: usize, to: usize },
    #[error("unknown mode {0}")]
    UnknownMode(usize),
    #[error("state dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid state layout: {0}")]
    Layout(String),
    #[error("invalid automaton: {0}")]
    Invalid(String),
    #[error("malformed execution document: {0}")]
    Format(String),
}
