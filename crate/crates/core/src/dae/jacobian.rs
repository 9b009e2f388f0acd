use super::{JacobianBlocks, SemiExplicitDae};

/// Analytic blocks when the model provides them, central differences otherwise.
pub fn jacobian_blocks(model: &dyn SemiExplicitDae, y: &[f64], z: &[f64], u: f64) -> JacobianBlocks {
    model
        .jacobian(y, z, u)
        .unwrap_or_else(|| finite_diff_jacobian(model, y, z, u, 1e-6))
}

/// Central-difference Jacobian blocks.
///
/// The perturbation of variable `i` is `eps·max(1, |x_i|)`.
pub fn finite_diff_jacobian(
    model: &dyn SemiExplicitDae,
    y: &[f64],
    z: &[f64],
    u: f64,
    eps: f64,
) -> JacobianBlocks {
    let (n_y, n_z) = (model.n_y(), model.n_z());
    let mut out = JacobianBlocks::zeros(n_y, n_z);
    let mut yp = y.to_vec();
    let mut zp = z.to_vec();
    let mut fp = vec![0.0; n_y];
    let mut fm = vec![0.0; n_y];
    let mut gp = vec![0.0; n_z];
    let mut gm = vec![0.0; n_z];

    for j in 0..n_y {
        let step = eps * y[j].abs().max(1.0);
        yp[j] = y[j] + step;
        model.phi(&yp, z, u, &mut fp);
        model.psi(&yp, z, u, &mut gp);
        yp[j] = y[j] - step;
        model.phi(&yp, z, u, &mut fm);
        model.psi(&yp, z, u, &mut gm);
        yp[j] = y[j];
        for i in 0..n_y {
            out.phi_y[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
        for i in 0..n_z {
            out.psi_y[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    for j in 0..n_z {
        let step = eps * z[j].abs().max(1.0);
        zp[j] = z[j] + step;
        model.phi(y, &zp, u, &mut fp);
        model.psi(y, &zp, u, &mut gp);
        zp[j] = z[j] - step;
        model.phi(y, &zp, u, &mut fm);
        model.psi(y, &zp, u, &mut gm);
        zp[j] = z[j];
        for i in 0..n_y {
            out.phi_z[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
        for i in 0..n_z {
            out.psi_z[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::test_models::Decay;
    use super::*;

    /// φ = (sin y0 · z0, y1²), ψ = (z0³ − y0, z1 + y1·z0).
    struct Curved;

    impl SemiExplicitDae for Curved {
        fn n_y(&self) -> usize {
            2
        }
        fn n_z(&self) -> usize {
            2
        }
        fn phi(&self, y: &[f64], z: &[f64], _u: f64, out: &mut [f64]) {
            out[0] = y[0].sin() * z[0];
            out[1] = y[1] * y[1];
        }
        fn psi(&self, y: &[f64], z: &[f64], _u: f64, out: &mut [f64]) {
            out[0] = z[0].powi(3) - y[0];
            out[1] = z[1] + y[1] * z[0];
        }
        fn jacobian(&self, y: &[f64], z: &[f64], _u: f64) -> Option<JacobianBlocks> {
            let mut j = JacobianBlocks::zeros(2, 2);
            j.phi_y[(0, 0)] = y[0].cos() * z[0];
            j.phi_y[(1, 1)] = 2.0 * y[1];
            j.phi_z[(0, 0)] = y[0].sin();
            j.psi_y[(0, 0)] = -1.0;
            j.psi_y[(1, 1)] = z[0];
            j.psi_z[(0, 0)] = 3.0 * z[0] * z[0];
            j.psi_z[(1, 0)] = y[1];
            j.psi_z[(1, 1)] = 1.0;
            Some(j)
        }
    }

    #[test]
    fn linear_model_matches_exactly() {
        let fd = finite_diff_jacobian(&Decay, &[0.3], &[-1.2], 0.0, 1e-6);
        let exact = Decay.jacobian(&[0.3], &[-1.2], 0.0).unwrap();
        assert!(fd.max_rel_diff(&exact) < 1e-9);
    }

    #[test]
    fn eps_sweep_is_v_shaped() {
        let (y, z) = ([0.7, -1.3], [0.9, 0.4]);
        let exact = Curved.jacobian(&y, &z, 0.0).unwrap();
        let errs: Vec<f64> = [1e-1, 1e-3, 1e-5, 1e-7, 1e-9, 1e-11, 1e-13]
            .iter()
            .map(|&eps| finite_diff_jacobian(&Curved, &y, &z, 0.0, eps).max_rel_diff(&exact))
            .collect();
        let (best, _) = errs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        // truncation dominates on the left, rounding on the right
        assert!(best > 0 && best < errs.len() - 1, "errors {errs:?}");
        assert!(errs[0] > errs[best] * 100.0);
        assert!(errs[errs.len() - 1] > errs[best] * 100.0);
        assert!(errs[best] < 1e-8);
    }

    #[test]
    fn fallback_uses_finite_differences() {
        struct NoJac;
        impl SemiExplicitDae for NoJac {
            fn n_y(&self) -> usize {
                1
            }
            fn n_z(&self) -> usize {
                1
            }
            fn phi(&self, y: &[f64], z: &[f64], _u: f64, out: &mut [f64]) {
                out[0] = y[0] * z[0];
            }
            fn psi(&self, _y: &[f64], z: &[f64], _u: f64, out: &mut [f64]) {
                out[0] = 2.0 * z[0];
            }
        }
        let j = jacobian_blocks(&NoJac, &[3.0], &[5.0], 0.0);
        assert!((j.phi_y[(0, 0)] - 5.0).abs() < 1e-8);
        assert!((j.phi_z[(0, 0)] - 3.0).abs() < 1e-8);
        assert!((j.psi_z[(0, 0)] - 2.0).abs() < 1e-8);
    }
}
