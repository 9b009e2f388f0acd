use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::admittance::{build_admittance, Network};
use super::case::BusKind;
use super::{PowerError, PowerSystemCase};
use crate::dae::{newton, DaeError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerFlowConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Start from the amplitudes and phases stored in the case instead of
    /// `v = 1`, `θ = 0`.
    #[serde(default)]
    pub warm_start: bool,
}

impl Default for PowerFlowConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 20,
            warm_start: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerFlowResult {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    /// Net injections into the network.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub iterations: usize,
    /// `‖mismatch‖∞` at the returned point.
    pub mismatch: f64,
}

impl PowerFlowResult {
    /// Power delivered by the source at bus `k` (injection plus local load).
    pub fn generation(&self, case: &PowerSystemCase, k: usize) -> (f64, f64) {
        let b = &case.buses[k];
        (self.p[k] + b.p_load, self.q[k] + b.q_load)
    }
}

/// Unknown ordering: phases of all non-slack buses, then amplitudes of PQ buses.
struct Unknowns {
    theta: Vec<usize>,
    v: Vec<usize>,
}

pub fn power_flow(
    case: &PowerSystemCase,
    mode: &str,
    cfg: &PowerFlowConfig,
) -> Result<PowerFlowResult, PowerError> {
    let net = Network::new(&build_admittance(case, mode)?);
    let n = case.buses.len();
    let slack = case.slack_index();

    let mut v0 = vec![1.0; n];
    let mut theta0 = vec![0.0; n];
    for (k, b) in case.buses.iter().enumerate() {
        if cfg.warm_start {
            v0[k] = b.v;
            theta0[k] = b.theta;
        }
        if let Some(vs) = b.v_setpoint {
            v0[k] = vs;
        }
    }
    theta0[slack] = case.buses[slack].theta;

    let unknowns = Unknowns {
        theta: (0..n).filter(|&k| k != slack).collect(),
        v: (0..n).filter(|&k| case.buses[k].kind == BusKind::Pq).collect(),
    };
    let p_spec: Vec<f64> = case
        .buses
        .iter()
        .map(|b| if b.kind == BusKind::Pv { b.p_gen } else { 0.0 } - b.p_load)
        .collect();
    let q_spec: Vec<f64> = case.buses.iter().map(|b| -b.q_load).collect();

    let unpack = |x: &[f64]| {
        let mut v = v0.clone();
        let mut th = theta0.clone();
        for (j, &k) in unknowns.theta.iter().enumerate() {
            th[k] = x[j];
        }
        for (j, &k) in unknowns.v.iter().enumerate() {
            v[k] = x[unknowns.theta.len() + j];
        }
        (v, th)
    };
    let mismatch = |x: &[f64], r: &mut [f64]| {
        let (v, th) = unpack(x);
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        net.injections(&v, &th, &mut p, &mut q);
        for (j, &k) in unknowns.theta.iter().enumerate() {
            r[j] = p_spec[k] - p[k];
        }
        for (j, &k) in unknowns.v.iter().enumerate() {
            r[unknowns.theta.len() + j] = q_spec[k] - q[k];
        }
    };
    let jacobian = |x: &[f64]| {
        let (v, th) = unpack(x);
        let [dp_dt, dp_dv, dq_dt, dq_dv] = net.injection_jacobian(&v, &th);
        let nt = unknowns.theta.len();
        let m = nt + unknowns.v.len();
        let mut j = DMatrix::zeros(m, m);
        // residual is scheduled − calculated, hence the sign flip
        for (r, &i) in unknowns.theta.iter().enumerate() {
            for (c, &k) in unknowns.theta.iter().enumerate() {
                j[(r, c)] = -dp_dt[(i, k)];
            }
            for (c, &k) in unknowns.v.iter().enumerate() {
                j[(r, nt + c)] = -dp_dv[(i, k)];
            }
        }
        for (r, &i) in unknowns.v.iter().enumerate() {
            for (c, &k) in unknowns.theta.iter().enumerate() {
                j[(nt + r, c)] = -dq_dt[(i, k)];
            }
            for (c, &k) in unknowns.v.iter().enumerate() {
                j[(nt + r, nt + c)] = -dq_dv[(i, k)];
            }
        }
        j
    };

    let mut x0: Vec<f64> = unknowns.theta.iter().map(|&k| theta0[k]).collect();
    x0.extend(unknowns.v.iter().map(|&k| v0[k]));
    let out = newton::solve(x0, cfg.tol, cfg.tol, cfg.max_iter, mismatch, jacobian).map_err(
        |e| match e {
            DaeError::NewtonDivergence {
                iterations,
                residual,
            } => PowerError::PowerFlowDivergence {
                iterations,
                mismatch: residual,
            },
            _ => PowerError::PowerFlowDivergence {
                iterations: cfg.max_iter,
                mismatch: f64::INFINITY,
            },
        },
    )?;

    let (v, theta) = unpack(&out.x);
    if v.iter().any(|&vk| !(vk > 0.0)) {
        return Err(PowerError::PowerFlowDivergence {
            iterations: out.iterations,
            mismatch: out.residual,
        });
    }
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    net.injections(&v, &theta, &mut p, &mut q);
    Ok(PowerFlowResult {
        v,
        theta,
        p,
        q,
        iterations: out.iterations,
        mismatch: out.residual,
    })
}
