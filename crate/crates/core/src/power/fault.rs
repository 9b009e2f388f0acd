use serde::{Deserialize, Serialize};

use super::case::apply_fault;
use super::target::coi_angle;
use super::{PowerError, PowerSystem};
use crate::dae::{self, DaeState, SolverConfig, TrajectorySegment};
use crate::hybrid::HybridState;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEvent {
    pub bus: u32,
    pub t_on: f64,
    pub t_clear: f64,
}

impl FaultEvent {
    pub fn validate(&self) -> Result<(), PowerError> {
        if self.t_on >= 0.0 && self.t_on < self.t_clear && self.t_clear.is_finite() {
            Ok(())
        } else {
            Err(PowerError::Validation(format!(
                "fault needs 0 <= t_on < t_clear, got {} and {}",
                self.t_on, self.t_clear
            )))
        }
    }
}

/// Trajectory of the fault sequence and the state it leaves behind.
#[derive(Clone, Debug)]
pub struct FaultRun {
    /// Pre-fault hold (absent when `t_on = 0`), then the faulted period.
    pub segments: Vec<(String, TrajectorySegment)>,
    pub s_init: HybridState,
    pub t_init: f64,
}

/// Holds the equilibrium in the base mode until `t_on`, applies the fault
/// shunt until `t_clear`, then removes it and switches to `post_mode`.
pub fn fault_sequence(
    sys: &PowerSystem,
    fault: &FaultEvent,
    post_mode: usize,
    cfg: &SolverConfig,
) -> Result<FaultRun, PowerError> {
    fault.validate()?;
    let base = sys.mode_id(sys.base_mode())?;
    let x0 = sys.equilibrium();
    let mut state = DaeState::new(x0.y().to_vec(), x0.z().to_vec(), 0.0);
    let mut segments = Vec::new();

    if fault.t_on > 0.0 {
        let seg = dae::simulate(sys.dae(base).as_ref(), &state, 0.0, fault.t_on, cfg)?;
        state = seg.last().clone();
        segments.push(("pre-fault".to_string(), seg));
    }

    let faulted = sys.make_dae(&apply_fault(sys.case(), fault.bus)?, sys.base_mode())?;
    // The shunt pulls the faulted amplitude from ~1 to ~1e-5; Newton only
    // halves it per iteration until it gets close.
    let collapse = SolverConfig {
        newton_max_iter: cfg.newton_max_iter.max(100),
        ..cfg.clone()
    };
    let z = dae::solve_algebraic(&faulted, &state.y, &state.z, 0.0, &collapse)?;
    let start = DaeState::new(state.y.clone(), z, state.t);
    let seg = dae::simulate(&faulted, &start, 0.0, fault.t_clear - fault.t_on, cfg)?;
    let end = seg.last().clone();
    segments.push(("fault".to_string(), seg));

    // The faulted voltages sit near a collapsed low-voltage branch of the
    // post-fault equations, so seed with the pre-fault profile rotated by
    // the centre-of-inertia motion during the fault.
    let h = sys.inertia();
    let ng = h.len();
    let shift = coi_angle(&end.y[..ng], &h) - coi_angle(&state.y[..ng], &h);
    let nf = state.z.len() / 2;
    let mut guess = state.z.clone();
    for t in &mut guess[..nf] {
        *t += shift;
    }
    let post = sys.dae(post_mode);
    let z = dae::solve_algebraic(post.as_ref(), &end.y, &guess, 0.0, cfg)?;
    Ok(FaultRun {
        segments,
        s_init: HybridState::new(post_mode, sys.state(&end.y, &z)),
        t_init: end.t,
    })
}
