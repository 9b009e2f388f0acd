//! Semi-explicit index-1 DAEs
//!
//! ```text
//!     dy/dt = φ(y, z, u)
//!         0 = ψ(y, z, u)
//! ```
//!
//! with `∂ψ/∂z` nonsingular along every trajectory of interest. The module
//! provides residual evaluation, the index-1 test, damped Newton for the
//! algebraic block, and a fixed-step implicit trapezoidal integrator.
//! Everything here is a pure function of its inputs so simulations can run
//! concurrently and replay bit for bit.

mod integrate;
mod jacobian;
pub(crate) mod newton;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use integrate::{simulate, step_count, step_trapezoidal};
pub(crate) use integrate::trapezoid_defect;
pub use jacobian::{finite_diff_jacobian, jacobian_blocks};
use newton::norm_inf;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DaeError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("newton iteration failed after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("singular jacobian in newton iteration")]
    SingularJacobian,
    #[error("initial state is not consistent: algebraic residual {residual:e}")]
    InconsistentState { residual: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("integration failed at t = {t}")]
    StepFailed {
        t: f64,
        #[source]
        source: Box<DaeError>,
    },
}

/// Evaluators of a semi-explicit DAE.
///
/// Implementations may supply analytic Jacobian blocks; when they do not,
/// the solvers fall back to central finite differences.
pub trait SemiExplicitDae: Send + Sync {
    fn n_y(&self) -> usize;
    fn n_z(&self) -> usize;
    fn phi(&self, y: &[f64], z: &[f64], u: f64, out: &mut [f64]);
    fn psi(&self, y: &[f64], z: &[f64], u: f64, out: &mut [f64]);

    fn jacobian(&self, _y: &[f64], _z: &[f64], _u: f64) -> Option<JacobianBlocks> {
        None
    }
}

/// `∂φ/∂y`, `∂φ/∂z`, `∂ψ/∂y`, `∂ψ/∂z`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianBlocks {
    pub phi_y: DMatrix<f64>,
    pub phi_z: DMatrix<f64>,
    pub psi_y: DMatrix<f64>,
    pub psi_z: DMatrix<f64>,
}

impl JacobianBlocks {
    pub fn zeros(n_y: usize, n_z: usize) -> Self {
        Self {
            phi_y: DMatrix::zeros(n_y, n_y),
            phi_z: DMatrix::zeros(n_y, n_z),
            psi_y: DMatrix::zeros(n_z, n_y),
            psi_z: DMatrix::zeros(n_z, n_z),
        }
    }

    /// Largest entrywise deviation relative to `max(1, |reference|)`.
    pub fn max_rel_diff(&self, reference: &JacobianBlocks) -> f64 {
        let pairs = [
            (&self.phi_y, &reference.phi_y),
            (&self.phi_z, &reference.phi_z),
            (&self.psi_y, &reference.psi_y),
            (&self.psi_z, &reference.psi_z),
        ];
        pairs
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DaeState {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub t: f64,
}

impl DaeState {
    pub fn new(y: Vec<f64>, z: Vec<f64>, t: f64) -> Self {
        Self { y, z, t }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Internal integration step in seconds.
    pub h: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub algebraic_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            h: 0.01,
            newton_tol: 1e-10,
            newton_max_iter: 20,
            algebraic_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), DaeError> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(DaeError::InvalidConfig(format!("h must be > 0, got {}", self.h)));
        }
        if !(self.newton_tol > 0.0 && self.algebraic_tol > 0.0) {
            return Err(DaeError::InvalidConfig("tolerances must be > 0".into()));
        }
        if self.newton_max_iter == 0 {
            return Err(DaeError::InvalidConfig("newton_max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Output of one constant-input simulation over a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySegment {
    pub times: Vec<f64>,
    pub states: Vec<DaeState>,
    pub input: f64,
}

impl TrajectorySegment {
    pub fn last(&self) -> &DaeState {
        self.states.last().expect("segment always holds its initial state")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Index1Report {
    pub nonsingular: bool,
    pub condition_estimate: f64,
}

fn check_dims(model: &dyn SemiExplicitDae, y: &[f64], z: &[f64]) -> Result<(), DaeError> {
    if y.len() != model.n_y() {
        return Err(DaeError::DimensionMismatch {
            what: "y",
            expected: model.n_y(),
            got: y.len(),
        });
    }
    if z.len() != model.n_z() {
        return Err(DaeError::DimensionMismatch {
            what: "z",
            expected: model.n_z(),
            got: z.len(),
        });
    }
    Ok(())
}

/// `(ẏ − φ(y,z,u), ψ(y,z,u))`.
pub fn residual(
    model: &dyn SemiExplicitDae,
    y: &[f64],
    ydot: &[f64],
    z: &[f64],
    u: f64,
) -> Result<(Vec<f64>, Vec<f64>), DaeError> {
    check_dims(model, y, z)?;
    if ydot.len() != model.n_y() {
        return Err(DaeError::DimensionMismatch {
            what: "ydot",
            expected: model.n_y(),
            got: ydot.len(),
        });
    }
    let mut r_diff = vec![0.0; model.n_y()];
    model.phi(y, z, u, &mut r_diff);
    for (r, d) in r_diff.iter_mut().zip(ydot) {
        *r = d - *r;
    }
    let mut r_alg = vec![0.0; model.n_z()];
    model.psi(y, z, u, &mut r_alg);
    Ok((r_diff, r_alg))
}

/// `‖ψ(y,z,u)‖∞`.
pub fn algebraic_residual(model: &dyn SemiExplicitDae, y: &[f64], z: &[f64], u: f64) -> f64 {
    let mut r = vec![0.0; model.n_z()];
    model.psi(y, z, u, &mut r);
    norm_inf(&r)
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn norm_inf_mat(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Tests whether `∂ψ/∂z` is nonsingular at `(y, z, u)`.
///
/// The matrix is LU-factorised with partial pivoting; it counts as singular
/// when any pivot falls below `1e-12·‖∂ψ/∂z‖∞`. The condition estimate is
/// the 1-norm condition number computed from the explicit inverse.
pub fn index1_check(model: &dyn SemiExplicitDae, y: &[f64], z: &[f64], u: f64) -> Index1Report {
    if model.n_z() == 0 {
        return Index1Report {
            nonsingular: true,
            condition_estimate: 1.0,
        };
    }
    let a = jacobian_blocks(model, y, z, u).psi_z;
    let scale = norm_inf_mat(&a);
    let lu = a.clone().lu();
    let min_pivot = lu
        .u()
        .diagonal()
        .iter()
        .map(|p| p.abs())
        .fold(f64::INFINITY, f64::min);
    let nonsingular = scale > 0.0 && min_pivot > 1e-12 * scale;
    let condition_estimate = if nonsingular {
        lu.try_inverse()
            .map(|inv| norm1(&a) * norm1(&inv))
            .unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    Index1Report {
        nonsingular,
        condition_estimate,
    }
}

/// Solve `ψ(y, z, u) = 0` for `z` with `y` held fixed.
pub fn solve_algebraic(
    model: &dyn SemiExplicitDae,
    y: &[f64],
    z_guess: &[f64],
    u: f64,
    cfg: &SolverConfig,
) -> Result<Vec<f64>, DaeError> {
    check_dims(model, y, z_guess)?;
    if model.n_z() == 0 {
        return Ok(Vec::new());
    }
    let out = newton::solve(
        z_guess.to_vec(),
        cfg.newton_tol.min(cfg.algebraic_tol),
        cfg.algebraic_tol,
        cfg.newton_max_iter,
        |z, r| model.psi(y, z, u, r),
        |z| jacobian_blocks(model, y, z, u).psi_z,
    )?;
    Ok(out.x)
}

#[cfg(test)]
pub(crate) mod test_models {
    use super::*;

    /// φ = −y, ψ = z − y.
    pub struct Decay;

    impl SemiExplicitDae for Decay {
        fn n_y(&self) -> usize {
            1
        }
        fn n_z(&self) -> usize {
            1
        }
        fn phi(&self, y: &[f64], _z: &[f64], _u: f64, out: &mut [f64]) {
            out[0] = -y[0];
        }
        fn psi(&self, y: &[f64], z: &[f64], _u: f64, out: &mut [f64]) {
            out[0] = z[0] - y[0];
        }
        fn jacobian(&self, _y: &[f64], _z: &[f64], _u: f64) -> Option<JacobianBlocks> {
            let mut j = JacobianBlocks::zeros(1, 1);
            j.phi_y[(0, 0)] = -1.0;
            j.psi_y[(0, 0)] = -1.0;
            j.psi_z[(0, 0)] = 1.0;
            Some(j)
        }
    }

    /// ψ = 0·z − y: the algebraic block is singular everywhere.
    pub struct Degenerate;

    impl SemiExplicitDae for Degenerate {
        fn n_y(&self) -> usize {
            1
        }
        fn n_z(&self) -> usize {
            1
        }
        fn phi(&self, y: &[f64], _z: &[f64], _u: f64, out: &mut [f64]) {
            out[0] = -y[0];
        }
        fn psi(&self, y: &[f64], z: &[f64], _u: f64, out: &mut [f64]) {
            out[0] = 0.0 * z[0] - y[0];
        }
    }
}
