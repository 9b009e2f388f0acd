//! Transmission networks with classical synchronous machines.
//!
//! A [`PowerSystemCase`] is solved for its load-flow equilibrium, the
//! machines are back-solved from it, and every switching mode of the case
//! becomes one semi-explicit DAE of a hybrid automaton.

mod admittance;
pub mod case;
mod fault;
mod model;
mod powerflow;
mod system;
mod target;

use thiserror::Error;

use crate::dae::DaeError;
use crate::hybrid::HybridError;

pub use admittance::{build_admittance, Network};
pub use case::{
    apply_fault, clear_fault, load_case, save_case, Bus, BusKind, ControlSpec, Generator, Line,
    LineKind, LineStatus, LoadModel, ModeSpec, PowerSystemCase,
};
pub use fault::{fault_sequence, FaultEvent, FaultRun};
pub use model::{init_generators, GeneratorInit, PowerDae};
pub use powerflow::{power_flow, PowerFlowConfig, PowerFlowResult};
pub use system::PowerSystem;
pub use target::{
    avg_bus_phase, coi_angle, in_target_set, phase_spread, wrap_angle, OperatingLimits,
    TargetSetSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid case: {0}")]
    Validation(String),
    #[error("unknown bus {0}")]
    UnknownBus(u32),
    #[error("unknown mode {0}")]
    UnknownMode(String),
    #[error("bus {bus} is cut off from the slack bus in mode {mode}")]
    IslandedNetwork { mode: String, bus: u32 },
    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:e})")]
    PowerFlowDivergence { iterations: usize, mismatch: f64 },
    #[error(transparent)]
    Solver(#[from] DaeError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
}
