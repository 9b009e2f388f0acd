use num_complex::Complex64;

use super::admittance::Network;
use super::powerflow::PowerFlowResult;
use super::case::LoadModel;
use super::PowerSystemCase;
use crate::dae::{JacobianBlocks, SemiExplicitDae};

/// Internal state of a classical generator at an operating point.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorInit {
    pub e_p: f64,
    pub delta: f64,
    pub omega: f64,
    pub p_m: f64,
}

/// Back-solves `E'∠δ = V + j·xd'·I` from the terminal conditions.
pub fn init_generators(case: &PowerSystemCase, pf: &PowerFlowResult) -> Vec<GeneratorInit> {
    case.generators
        .iter()
        .map(|g| {
            let k = case.bus_index(g.bus).expect("validated generator bus");
            let (p, q) = pf.generation(case, k);
            let vt = Complex64::from_polar(pf.v[k], pf.theta[k]);
            let current = (Complex64::new(p, q) / vt).conj();
            let e = vt + Complex64::new(0.0, g.xd_p) * current;
            let (e_p, delta) = e.to_polar();
            GeneratorInit {
                e_p,
                delta,
                omega: 1.0,
                p_m: e_p * pf.v[k] * (delta - pf.theta[k]).sin() / g.xd_p,
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub(crate) struct MachineData {
    pub bus: usize,
    pub h: f64,
    pub d: f64,
    pub xd_p: f64,
    pub e_p: f64,
    pub p_m: f64,
}

/// Which buses carry algebraic unknowns and the values of the others.
#[derive(Clone, Debug)]
pub(crate) struct BusSplit {
    /// Position in the free list for each bus, `None` for fixed buses.
    pub free_pos: Vec<Option<usize>>,
    pub free: Vec<usize>,
    /// Fixed `(θ, v)` per bus; ignored for free buses.
    pub fixed_value: Vec<(f64, f64)>,
}

/// Classical multi-machine model in one network topology.
///
/// `y = (δ₁..δₙ, ω₁..ωₙ)`, `z = (θ_free, v_free)`. The algebraic rows are
/// active then reactive power balance at the free buses.
#[derive(Clone, Debug)]
pub struct PowerDae {
    omega_s: f64,
    machines: Vec<MachineData>,
    control: Option<usize>,
    net: Network,
    /// `(P₀, Q₀, v₀)` per bus, `v₀` the operating-point amplitude.
    loads: Vec<(f64, f64, f64)>,
    load_model: LoadModel,
    load_vmin: Option<f64>,
    split: BusSplit,
    /// Generator index per bus.
    machine_at: Vec<Option<usize>>,
}

impl PowerDae {
    pub(crate) fn new(
        case: &PowerSystemCase,
        net: Network,
        machines: Vec<MachineData>,
        control: Option<usize>,
        split: BusSplit,
        v_ref: &[f64],
    ) -> Self {
        let mut machine_at = vec![None; case.buses.len()];
        for (i, m) in machines.iter().enumerate() {
            machine_at[m.bus] = Some(i);
        }
        Self {
            omega_s: case.omega_s(),
            machines,
            control,
            net,
            loads: case
                .buses
                .iter()
                .zip(v_ref)
                .map(|(b, &v0)| (b.p_load, b.q_load, v0))
                .collect(),
            load_model: case.load_model,
            load_vmin: case.load_vmin,
            split,
            machine_at,
        }
    }

    pub fn n_gen(&self) -> usize {
        self.machines.len()
    }

    pub fn n_free(&self) -> usize {
        self.split.free.len()
    }

    pub fn mechanical_power(&self, i: usize, u: f64) -> f64 {
        self.machines[i].p_m + if self.control == Some(i) { u } else { 0.0 }
    }

    fn bus_voltages(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nf = self.n_free();
        let mut theta = Vec::with_capacity(self.net.len());
        let mut v = Vec::with_capacity(self.net.len());
        for (k, pos) in self.split.free_pos.iter().enumerate() {
            match pos {
                Some(p) => {
                    theta.push(z[*p]);
                    v.push(z[nf + p]);
                }
                None => {
                    theta.push(self.split.fixed_value[k].0);
                    v.push(self.split.fixed_value[k].1);
                }
            }
        }
        (theta, v)
    }

    /// Load drawn at amplitude `v` and its derivative.
    fn load(&self, k: usize, v: f64) -> (f64, f64, f64, f64) {
        let (p0, q0, v0) = self.loads[k];
        let vmin = match self.load_model {
            LoadModel::ConstantImpedance => Some(v0),
            LoadModel::ConstantPower => self.load_vmin.filter(|&vm| v < vm),
        };
        match vmin {
            Some(vm) => {
                let s = (v / vm) * (v / vm);
                let ds = 2.0 * v / (vm * vm);
                (p0 * s, q0 * s, p0 * ds, q0 * ds)
            }
            _ => (p0, q0, 0.0, 0.0),
        }
    }

    /// Electrical output of machine `i` at bus conditions `(θ, v)`.
    pub fn electrical_power(&self, i: usize, delta: f64, theta: f64, v: f64) -> f64 {
        let m = &self.machines[i];
        m.e_p * v * (delta - theta).sin() / m.xd_p
    }
}

impl SemiExplicitDae for PowerDae {
    fn n_y(&self) -> usize {
        2 * self.machines.len()
    }

    fn n_z(&self) -> usize {
        2 * self.split.free.len()
    }

    fn phi(&self, y: &[f64], z: &[f64], u: f64, out: &mut [f64]) {
        let ng = self.n_gen();
        let (theta, v) = self.bus_voltages(z);
        for (i, m) in self.machines.iter().enumerate() {
            let (delta, omega) = (y[i], y[ng + i]);
            let pe = self.electrical_power(i, delta, theta[m.bus], v[m.bus]);
            out[i] = self.omega_s * (omega - 1.0);
            out[ng + i] = (self.mechanical_power(i, u) - pe - m.d * (omega - 1.0)) / (2.0 * m.h);
        }
    }

    fn psi(&self, y: &[f64], z: &[f64], _u: f64, out: &mut [f64]) {
        let nf = self.n_free();
        let n = self.net.len();
        let (theta, v) = self.bus_voltages(z);
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        self.net.injections(&v, &theta, &mut p, &mut q);
        for (r, &k) in self.split.free.iter().enumerate() {
            let (pl, ql, _, _) = self.load(k, v[k]);
            let (mut pg, mut qg) = (0.0, 0.0);
            if let Some(i) = self.machine_at[k] {
                let m = &self.machines[i];
                let (s, c) = (y[i] - theta[k]).sin_cos();
                pg = m.e_p * v[k] * s / m.xd_p;
                qg = (m.e_p * v[k] * c - v[k] * v[k]) / m.xd_p;
            }
            out[r] = pg - pl - p[k];
            out[nf + r] = qg - ql - q[k];
        }
    }

    fn jacobian(&self, y: &[f64], z: &[f64], _u: f64) -> Option<JacobianBlocks> {
        let ng = self.n_gen();
        let nf = self.n_free();
        let (theta, v) = self.bus_voltages(z);
        let mut jb = JacobianBlocks::zeros(2 * ng, 2 * nf);

        for (i, m) in self.machines.iter().enumerate() {
            let k = m.bus;
            let (s, c) = (y[i] - theta[k]).sin_cos();
            let two_h = 2.0 * m.h;
            let dpe_ddelta = m.e_p * v[k] * c / m.xd_p;
            let dpe_dv = m.e_p * s / m.xd_p;
            jb.phi_y[(i, ng + i)] = self.omega_s;
            jb.phi_y[(ng + i, i)] = -dpe_ddelta / two_h;
            jb.phi_y[(ng + i, ng + i)] = -m.d / two_h;
            if let Some(pk) = self.split.free_pos[k] {
                jb.phi_z[(ng + i, pk)] = dpe_ddelta / two_h;
                jb.phi_z[(ng + i, nf + pk)] = -dpe_dv / two_h;
                jb.psi_y[(pk, i)] = dpe_ddelta;
                jb.psi_y[(nf + pk, i)] = -m.e_p * v[k] * s / m.xd_p;
            }
        }

        let [dp_dt, dp_dv, dq_dt, dq_dv] = self.net.injection_jacobian(&v, &theta);
        for (r, &i) in self.split.free.iter().enumerate() {
            for (c, &k) in self.split.free.iter().enumerate() {
                jb.psi_z[(r, c)] = -dp_dt[(i, k)];
                jb.psi_z[(r, nf + c)] = -dp_dv[(i, k)];
                jb.psi_z[(nf + r, c)] = -dq_dt[(i, k)];
                jb.psi_z[(nf + r, nf + c)] = -dq_dv[(i, k)];
            }
            let (_, _, dpl, dql) = self.load(i, v[i]);
            jb.psi_z[(r, nf + r)] -= dpl;
            jb.psi_z[(nf + r, nf + r)] -= dql;
            if let Some(g) = self.machine_at[i] {
                let m = &self.machines[g];
                let (s, c) = (y[g] - theta[i]).sin_cos();
                jb.psi_z[(r, r)] -= m.e_p * v[i] * c / m.xd_p;
                jb.psi_z[(r, nf + r)] += m.e_p * s / m.xd_p;
                jb.psi_z[(nf + r, r)] += m.e_p * v[i] * s / m.xd_p;
                jb.psi_z[(nf + r, nf + r)] += (m.e_p * c - 2.0 * v[i]) / m.xd_p;
            }
        }
        Some(jb)
    }
}
