use std::f64::consts::PI;

use crate::hybrid::{HybridState, StateLayout};

/// Arc length between two angles, in `[0, π]`.
pub fn circular_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % (2.0 * PI);
    d.min(2.0 * PI - d)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceSpec {
    pub nonlinear: Vec<usize>,
    pub linear: Vec<usize>,
    pub w_nonlinear: f64,
    pub w_linear: f64,
}

impl DistanceSpec {
    /// Angles are nonlinear, every other non-excluded variable linear.
    pub fn from_layout(layout: &StateLayout, excluded: &[usize]) -> Self {
        let mut nonlinear = Vec::new();
        let mut linear = Vec::new();
        for i in 0..layout.dim() {
            if excluded.contains(&i) {
                continue;
            }
            if layout.kind_of(i).is_some_and(|k| k.is_circular()) {
                nonlinear.push(i);
            } else {
                linear.push(i);
            }
        }
        Self {
            nonlinear,
            linear,
            w_nonlinear: 1.0,
            w_linear: 1.0,
        }
    }
}

/// `ρ(x_n, x'_n) + ρ(x_l, x'_l)`; the modes do not contribute.
pub fn distance(a: &HybridState, b: &HybridState, spec: &DistanceSpec) -> f64 {
    let (xa, xb) = (a.x.values(), b.x.values());
    let circ: f64 = spec
        .nonlinear
        .iter()
        .map(|&i| circular_dist(xa[i], xb[i]).powi(2))
        .sum();
    let lin: f64 = spec.linear.iter().map(|&i| (xa[i] - xb[i]).powi(2)).sum();
    spec.w_nonlinear * circ.sqrt() + spec.w_linear * lin.sqrt()
}
