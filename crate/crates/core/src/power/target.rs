use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::hybrid::{ContinuousState, DiscreteMode, GoalRegion, HybridState, VarKind};

/// Inertia-weighted mean rotor angle.
pub fn coi_angle(deltas: &[f64], h: &[f64]) -> f64 {
    assert_eq!(deltas.len(), h.len(), "one inertia per angle");
    let total: f64 = h.iter().sum();
    deltas.iter().zip(h).map(|(d, hi)| hi * d).sum::<f64>() / total
}

pub fn avg_bus_phase(thetas: &[f64]) -> f64 {
    assert!(!thetas.is_empty(), "no bus phases");
    thetas.iter().sum::<f64>() / thetas.len() as f64
}

/// Reduces an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// `max θ − min θ` of the phases taken relative to their mean.
pub fn phase_spread(thetas: &[f64]) -> f64 {
    let avg = avg_bus_phase(thetas);
    let (lo, hi) = thetas
        .iter()
        .map(|t| wrap_angle(t - avg))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)));
    hi - lo
}

/// Synchronised operation in a given mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSetSpec {
    pub omega_tol: f64,
    pub phase_spread_max: f64,
    pub v_tol: f64,
    pub goal_mode: DiscreteMode,
}

impl TargetSetSpec {
    pub fn new(goal_mode: DiscreteMode) -> Self {
        Self {
            omega_tol: 0.01,
            phase_spread_max: PI / 6.0,
            v_tol: 0.2,
            goal_mode,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.omega_tol > 0.0 && self.phase_spread_max > 0.0 && self.v_tol > 0.0 {
            Ok(())
        } else {
            Err("target tolerances must be positive".into())
        }
    }
}

pub fn in_target_set(s: &HybridState, spec: &TargetSetSpec) -> bool {
    if s.mode != spec.goal_mode.id {
        return false;
    }
    let x = &s.x;
    let speeds_ok = x
        .select(VarKind::RotorSpeed)
        .iter()
        .all(|w| (w - 1.0).abs() <= spec.omega_tol);
    let amplitudes_ok = x
        .select(VarKind::BusMagnitude)
        .iter()
        .all(|v| (v - 1.0).abs() <= spec.v_tol);
    let thetas = x.select(VarKind::BusPhase);
    speeds_ok && amplitudes_ok && (thetas.is_empty() || phase_spread(&thetas) <= spec.phase_spread_max)
}

impl GoalRegion for TargetSetSpec {
    fn contains(&self, s: &HybridState) -> bool {
        in_target_set(s, self)
    }
}

/// Admissible region for planner segments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingLimits {
    pub v_min: f64,
    pub omega_dev_max: f64,
}

impl Default for OperatingLimits {
    fn default() -> Self {
        Self {
            v_min: 0.5,
            omega_dev_max: 0.1,
        }
    }
}

impl OperatingLimits {
    pub fn admits(&self, x: &ContinuousState) -> bool {
        let layout = x.layout();
        layout
            .indices(VarKind::BusMagnitude)
            .iter()
            .all(|&i| x[i] > self.v_min)
            && layout
                .indices(VarKind::RotorSpeed)
                .iter()
                .all(|&i| (x[i] - 1.0).abs() < self.omega_dev_max)
    }
}
