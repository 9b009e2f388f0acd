use nalgebra::{DMatrix, DVector};

use super::DaeError;

const MAX_HALVINGS: usize = 10;

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

fn finite_norm(v: &[f64]) -> f64 {
    let n = norm_inf(v);
    if n.is_finite() {
        n
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Damped Newton iteration on `f(x) = 0`.
///
/// Stops once `‖f‖∞ ≤ tol`. When the iteration runs out of budget or
/// stagnates, a residual at or below `accept_tol` is still accepted.
/// A full step that fails to reduce the residual is halved up to ten
/// times.
pub(crate) fn solve<F, J>(
    x0: Vec<f64>,
    tol: f64,
    accept_tol: f64,
    max_iter: usize,
    mut f: F,
    mut jac: J,
) -> Result<NewtonOutcome, DaeError>
where
    F: FnMut(&[f64], &mut [f64]),
    J: FnMut(&[f64]) -> DMatrix<f64>,
{
    let n = x0.len();
    let mut x = x0;
    let mut r = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    f(&x, &mut r);
    let mut norm = finite_norm(&r);

    for iter in 0..=max_iter {
        if norm <= tol {
            return Ok(NewtonOutcome {
                x,
                iterations: iter,
                residual: norm,
            });
        }
        if iter == max_iter {
            break;
        }
        let lu = jac(&x).lu();
        let rhs = DVector::from_iterator(n, r.iter().map(|v| -v));
        let dx = lu.solve(&rhs).ok_or(DaeError::SingularJacobian)?;
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(DaeError::SingularJacobian);
        }

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            for i in 0..n {
                trial[i] = x[i] + lambda * dx[i];
            }
            f(&trial, &mut r_trial);
            let trial_norm = finite_norm(&r_trial);
            if trial_norm < norm {
                std::mem::swap(&mut x, &mut trial);
                std::mem::swap(&mut r, &mut r_trial);
                norm = trial_norm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // No descent left: either we are at the rounding floor or stuck.
            if norm <= accept_tol {
                return Ok(NewtonOutcome {
                    x,
                    iterations: iter + 1,
                    residual: norm,
                });
            }
            return Err(DaeError::NewtonDivergence {
                iterations: iter + 1,
                residual: norm,
            });
        }
    }

    if norm <= accept_tol {
        Ok(NewtonOutcome {
            x,
            iterations: max_iter,
            residual: norm,
        })
    } else {
        Err(DaeError::NewtonDivergence {
            iterations: max_iter,
            residual: norm,
        })
    }
}
