use dsa_core::dae::{
    self, algebraic_residual, finite_diff_jacobian, index1_check, jacobian_blocks, step_count,
    DaeError, DaeState, JacobianBlocks, SemiExplicitDae, SolverConfig,
};
use proptest::prelude::*;

/// `y' = a·y + b·z + u`, `0 = z − c·y`.
struct Linear {
    a: f64,
    b: f64,
    c: f64,
}

impl SemiExplicitDae for Linear {
    fn n_y(&self) -> usize {
        1
    }
    fn n_z(&self) -> usize {
        1
    }
    fn phi(&self, y: &[f64], z: &[f64], u: f64, out: &mut [f64]) {
        out[0] = self.a * y[0] + self.b * z[0] + u;
    }
    fn psi(&self, y: &[f64], z: &[f64], _u: f64, out: &mut [f64]) {
        out[0] = z[0] - self.c * y[0];
    }
}

/// Constraint independent of `z`: not index 1.
struct Degenerate;

impl SemiExplicitDae for Degenerate {
    fn n_y(&self) -> usize {
        1
    }
    fn n_z(&self) -> usize {
        1
    }
    fn phi(&self, _y: &[f64], z: &[f64], _u: f64, out: &mut [f64]) {
        out[0] = z[0];
    }
    fn psi(&self, y: &[f64], _z: &[f64], _u: f64, out: &mut [f64]) {
        out[0] = y[0] - 1.0;
    }
}

/// Pendulum-like oscillator with a cubic constraint: `y₁' = y₂`,
/// `y₂' = −z`, `0 = z + z³ − y₁ − y₁³`.
struct Cubic;

impl SemiExplicitDae for Cubic {
    fn n_y(&self) -> usize {
        2
    }
    fn n_z(&self) -> usize {
        1
    }
    fn phi(&self, y: &[f64], z: &[f64], _u: f64, out: &mut [f64]) {
        out[0] = y[1];
        out[1] = -z[0];
    }
    fn psi(&self, y: &[f64], z: &[f64], _u: f64, out: &mut [f64]) {
        out[0] = z[0] + z[0].powi(3) - y[0] - y[0].powi(3);
    }
}

fn decay() -> Linear {
    Linear { a: 0.0, b: -1.0, c: 1.0 }
}

#[test]
fn exponential_decay_at_one_second() {
    let seg = dae::simulate(&decay(), &DaeState::new(vec![1.0], vec![1.0], 0.0), 0.0, 1.0, &SolverConfig::default())
        .unwrap();
    assert_eq!(seg.len(), 101);
    assert!((seg.last().y[0] - (-1.0f64).exp()).abs() <= 1e-4);
}

#[test]
fn segment_grid_for_planner_step() {
    assert_eq!(step_count(1.26, 0.01), 126);
    assert_eq!(step_count(0.3, 0.01), 30);
    assert_eq!(step_count(0.015, 0.01), 2);
    let seg = dae::simulate(&decay(), &DaeState::new(vec![1.0], vec![1.0], 2.0), 0.0, 1.26, &SolverConfig::default())
        .unwrap();
    assert_eq!(seg.times.len(), 127);
    assert_eq!(seg.times[0], 2.0);
    assert_eq!(*seg.times.last().unwrap(), 2.0 + 1.26);
}

#[test]
fn inconsistent_start_rejected() {
    let err = dae::simulate(&decay(), &DaeState::new(vec![1.0], vec![0.5], 0.0), 0.0, 1.0, &SolverConfig::default())
        .unwrap_err();
    assert!(matches!(err, DaeError::InconsistentState { .. }));
}

#[test]
fn dimension_mismatch_reported() {
    let err = dae::simulate(&decay(), &DaeState::new(vec![1.0, 2.0], vec![1.0], 0.0), 0.0, 1.0, &SolverConfig::default())
        .unwrap_err();
    assert!(matches!(err, DaeError::DimensionMismatch { what: "y", .. }));
}

#[test]
fn singular_constraint_detected() {
    assert!(!index1_check(&Degenerate, &[1.0], &[0.0], 0.0).nonsingular);
    let r = index1_check(&decay(), &[1.0], &[1.0], 0.0);
    assert!(r.nonsingular);
    assert!((r.condition_estimate - 1.0).abs() < 1e-12);
}

#[test]
fn nonlinear_constraint_tracks_manifold() {
    let cfg = SolverConfig::default();
    let z0 = dae::solve_algebraic(&Cubic, &[0.5, 0.0], &[0.0], 0.0, &cfg).unwrap();
    // z = y₁ is the unique real root of z + z³ = y₁ + y₁³
    assert!((z0[0] - 0.5).abs() < 1e-10);
    let seg = dae::simulate(&Cubic, &DaeState::new(vec![0.5, 0.0], z0, 0.0), 0.0, 5.0, &cfg).unwrap();
    for s in &seg.states {
        assert!(algebraic_residual(&Cubic, &s.y, &s.z, 0.0) <= cfg.algebraic_tol);
        assert!(index1_check(&Cubic, &s.y, &s.z, 0.0).nonsingular);
    }
    // harmonic oscillator in disguise: y₁ = 0.5 cos t
    let want = 0.5 * 5.0f64.cos();
    assert!((seg.last().y[0] - want).abs() < 1e-3);
}

#[test]
fn finite_differences_match_hand_derivatives() {
    let (y, z) = ([0.4, -0.2], [0.3]);
    let mut want = JacobianBlocks::zeros(2, 1);
    want.phi_y[(0, 1)] = 1.0;
    want.phi_z[(1, 0)] = -1.0;
    want.psi_y[(0, 0)] = -1.0 - 3.0 * y[0] * y[0];
    want.psi_z[(0, 0)] = 1.0 + 3.0 * z[0] * z[0];
    assert!(finite_diff_jacobian(&Cubic, &y, &z, 0.0, 1e-6).max_rel_diff(&want) < 1e-8);
    assert_eq!(jacobian_blocks(&Cubic, &y, &z, 0.0), finite_diff_jacobian(&Cubic, &y, &z, 0.0, 1e-6));
}

proptest! {
    #[test]
    fn linear_dae_matches_closed_form(a in -1.0f64..0.5, b in -1.0f64..1.0, c in -1.0f64..1.0, y0 in -2.0f64..2.0) {
        // reduces to y' = (a + b c) y
        let m = Linear { a, b, c };
        let cfg = SolverConfig { h: 0.005, ..SolverConfig::default() };
        let seg = dae::simulate(&m, &DaeState::new(vec![y0], vec![c * y0], 0.0), 0.0, 1.0, &cfg).unwrap();
        let exact = y0 * (a + b * c).exp();
        prop_assert!((seg.last().y[0] - exact).abs() <= 1e-4 * (1.0 + exact.abs()));
        for s in &seg.states {
            prop_assert!((s.z[0] - c * s.y[0]).abs() <= cfg.algebraic_tol);
        }
    }

    #[test]
    fn simulation_is_deterministic_and_ends_on_time(duration in 0.001f64..3.0, h in 0.001f64..0.1) {
        let cfg = SolverConfig { h, ..SolverConfig::default() };
        let s0 = DaeState::new(vec![1.0], vec![1.0], 0.25);
        let a = dae::simulate(&decay(), &s0, 0.0, duration, &cfg).unwrap();
        let b = dae::simulate(&decay(), &s0, 0.0, duration, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(*a.times.last().unwrap(), 0.25 + duration);
        prop_assert_eq!(a.len(), step_count(duration, h) + 1);
        prop_assert!(a.times.windows(2).all(|w| w[1] > w[0]));
    }
}
