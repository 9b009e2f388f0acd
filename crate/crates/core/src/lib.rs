//! Dynamic security analysis of power systems as a reachability problem on
//! hybrid automata, searched with a hybrid-extended RRT.
//!
//! * [`hybrid`]: automata, hybrid states, time trajectories, executions.
//! * [`dae`]: semi-explicit index-1 DAEs, Newton, trapezoidal integration.
//! * [`power`]: case data, power flow, classical-machine network DAEs.
//! * [`planner`]: sampling, distances, the search tree with its simulation
//!   cache, and execution extraction.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dae;
pub mod hybrid;
pub mod power;
pub mod planner;
