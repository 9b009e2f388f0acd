use nalgebra::DMatrix;

use super::newton::{self, norm_inf};
use super::{
    algebraic_residual, check_dims, jacobian_blocks, DaeError, DaeState, SemiExplicitDae,
    SolverConfig, TrajectorySegment,
};

/// One implicit trapezoidal step of length `h` on the coupled `(y₊, z₊)` system.
pub fn step_trapezoidal(
    model: &dyn SemiExplicitDae,
    state: &DaeState,
    u: f64,
    h: f64,
    cfg: &SolverConfig,
) -> Result<DaeState, DaeError> {
    check_dims(model, &state.y, &state.z)?;
    let (n_y, n_z) = (model.n_y(), model.n_z());
    let n = n_y + n_z;
    let half = 0.5 * h;

    let mut phi0 = vec![0.0; n_y];
    model.phi(&state.y, &state.z, u, &mut phi0);

    // explicit Euler predictor for y, previous z
    let mut w0 = Vec::with_capacity(n);
    w0.extend(state.y.iter().zip(&phi0).map(|(y, f)| y + h * f));
    w0.extend_from_slice(&state.z);

    let mut phi_buf = vec![0.0; n_y];
    let residual = |w: &[f64], r: &mut [f64]| {
        let (y1, z1) = w.split_at(n_y);
        model.phi(y1, z1, u, &mut phi_buf);
        for i in 0..n_y {
            r[i] = y1[i] - state.y[i] - half * (phi0[i] + phi_buf[i]);
        }
        model.psi(y1, z1, u, &mut r[n_y..]);
    };
    let jacobian = |w: &[f64]| {
        let (y1, z1) = w.split_at(n_y);
        let b = jacobian_blocks(model, y1, z1, u);
        let mut j = DMatrix::zeros(n, n);
        for c in 0..n_y {
            for r in 0..n_y {
                j[(r, c)] = -half * b.phi_y[(r, c)];
            }
            j[(c, c)] += 1.0;
            for r in 0..n_z {
                j[(n_y + r, c)] = b.psi_y[(r, c)];
            }
        }
        for c in 0..n_z {
            for r in 0..n_y {
                j[(r, n_y + c)] = -half * b.phi_z[(r, c)];
            }
            for r in 0..n_z {
                j[(n_y + r, n_y + c)] = b.psi_z[(r, c)];
            }
        }
        j
    };

    let out = newton::solve(
        w0,
        cfg.newton_tol,
        cfg.algebraic_tol,
        cfg.newton_max_iter,
        residual,
        jacobian,
    )?;
    let mut w = out.x;
    let z = w.split_off(n_y);
    Ok(DaeState::new(w, z, state.t + h))
}

/// Number of steps of length at most `h` covering `duration`.
///
/// A ratio within rounding of an integer counts as that integer, so
/// `1.26 / 0.01` gives 126 steps rather than 127.
pub fn step_count(duration: f64, h: f64) -> usize {
    let ratio = duration / h;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest.max(1.0) as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Integrate from `state0` for `duration` seconds with constant input `u`.
///
/// Grid points are `t₀ + k·h`; the final point is exactly `t₀ + duration`,
/// so the last step may be shorter than `h`.
pub fn simulate(
    model: &dyn SemiExplicitDae,
    state0: &DaeState,
    u: f64,
    duration: f64,
    cfg: &SolverConfig,
) -> Result<TrajectorySegment, DaeError> {
    cfg.validate()?;
    check_dims(model, &state0.y, &state0.z)?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(DaeError::InvalidConfig(format!(
            "duration must be > 0, got {duration}"
        )));
    }
    let r0 = algebraic_residual(model, &state0.y, &state0.z, u);
    if !(r0 <= cfg.algebraic_tol) {
        return Err(DaeError::InconsistentState { residual: r0 });
    }

    let steps = step_count(duration, cfg.h);
    let t0 = state0.t;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(state0.clone());

    for k in 1..=steps {
        let t_next = if k == steps {
            t0 + duration
        } else {
            t0 + k as f64 * cfg.h
        };
        let prev = states.last().expect("non-empty");
        let h = t_next - prev.t;
        let mut next = step_trapezoidal(model, prev, u, h, cfg).map_err(|e| DaeError::StepFailed {
            t: prev.t,
            source: Box::new(e),
        })?;
        next.t = t_next;
        times.push(t_next);
        states.push(next);
    }
    Ok(TrajectorySegment {
        times,
        states,
        input: u,
    })
}

/// Largest trapezoidal defect `‖(y₁ − y₀)/h − (φ₀ + φ₁)/2‖∞` between two samples.
pub(crate) fn trapezoid_defect(
    model: &dyn SemiExplicitDae,
    a: &DaeState,
    b: &DaeState,
    u: f64,
) -> f64 {
    let h = b.t - a.t;
    let n_y = model.n_y();
    let mut fa = vec![0.0; n_y];
    let mut fb = vec![0.0; n_y];
    model.phi(&a.y, &a.z, u, &mut fa);
    model.phi(&b.y, &b.z, u, &mut fb);
    let d: Vec<f64> = (0..n_y)
        .map(|i| (b.y[i] - a.y[i]) / h - 0.5 * (fa[i] + fb[i]))
        .collect();
    norm_inf(&d)
}
