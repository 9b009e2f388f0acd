use std::collections::VecDeque;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{PowerError, PowerSystemCase};

/// Bus admittance matrix in case bus order.
pub fn build_admittance(case: &PowerSystemCase, mode: &str) -> Result<DMatrix<Complex64>, PowerError> {
    let n = case.buses.len();
    let mut y = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut adjacency = vec![Vec::new(); n];

    for line in &case.lines {
        if !case.line_closed(line, mode)? {
            continue;
        }
        let f = case.bus_index(line.from).ok_or(PowerError::UnknownBus(line.from))?;
        let t = case.bus_index(line.to).ok_or(PowerError::UnknownBus(line.to))?;
        let ys = Complex64::new(line.r, line.x).inv();
        let charging = Complex64::new(0.0, 0.5 * line.b);
        let tap = line.tap;
        y[(f, f)] += (ys + charging) / (tap * tap);
        y[(t, t)] += ys + charging;
        y[(f, t)] -= ys / tap;
        y[(t, f)] -= ys / tap;
        adjacency[f].push(t);
        adjacency[t].push(f);
    }
    for (k, bus) in case.buses.iter().enumerate() {
        y[(k, k)] += Complex64::new(bus.gs, bus.bs + bus.fault.unwrap_or(0.0));
    }

    // every bus must hang together with the slack
    let slack = case.slack_index();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([slack]);
    seen[slack] = true;
    while let Some(k) = queue.pop_front() {
        for &m in &adjacency[k] {
            if !seen[m] {
                seen[m] = true;
                queue.push_back(m);
            }
        }
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(PowerError::IslandedNetwork {
            mode: mode.to_string(),
            bus: case.buses[k].id,
        });
    }
    Ok(y)
}

/// Real and imaginary parts of `Y` with a sparse row pattern, for fast
/// evaluation of bus injections.
#[derive(Clone, Debug)]
pub struct Network {
    pub g: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Column indices of non-zero entries per row, diagonal included.
    pub rows: Vec<Vec<usize>>,
}

impl Network {
    pub fn new(y: &DMatrix<Complex64>) -> Self {
        let n = y.nrows();
        let g = y.map(|c| c.re);
        let b = y.map(|c| c.im);
        let rows = (0..n)
            .map(|i| (0..n).filter(|&k| k == i || y[(i, k)] != Complex64::new(0.0, 0.0)).collect())
            .collect();
        Self { g, b, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Net injections `P_i`, `Q_i` into the network at every bus.
    pub fn injections(&self, v: &[f64], theta: &[f64], p: &mut [f64], q: &mut [f64]) {
        for i in 0..self.len() {
            let (mut pi, mut qi) = (0.0, 0.0);
            for &k in &self.rows[i] {
                let (s, c) = (theta[i] - theta[k]).sin_cos();
                let (g, b) = (self.g[(i, k)], self.b[(i, k)]);
                pi += v[k] * (g * c + b * s);
                qi += v[k] * (g * s - b * c);
            }
            p[i] = v[i] * pi;
            q[i] = v[i] * qi;
        }
    }

    /// Partial derivatives of the injections, each `n × n`, in the order
    /// `∂P/∂θ`, `∂P/∂v`, `∂Q/∂θ`, `∂Q/∂v`.
    pub fn injection_jacobian(&self, v: &[f64], theta: &[f64]) -> [DMatrix<f64>; 4] {
        let n = self.len();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        self.injections(v, theta, &mut p, &mut q);
        let mut dp_dt = DMatrix::zeros(n, n);
        let mut dp_dv = DMatrix::zeros(n, n);
        let mut dq_dt = DMatrix::zeros(n, n);
        let mut dq_dv = DMatrix::zeros(n, n);
        for i in 0..n {
            for &k in &self.rows[i] {
                if k == i {
                    continue;
                }
                let (s, c) = (theta[i] - theta[k]).sin_cos();
                let (g, b) = (self.g[(i, k)], self.b[(i, k)]);
                let gs_bc = g * s - b * c;
                let gc_bs = g * c + b * s;
                dp_dt[(i, k)] = v[i] * v[k] * gs_bc;
                dp_dv[(i, k)] = v[i] * gc_bs;
                dq_dt[(i, k)] = -v[i] * v[k] * gc_bs;
                dq_dv[(i, k)] = v[i] * gs_bc;
            }
            let (gii, bii) = (self.g[(i, i)], self.b[(i, i)]);
            dp_dt[(i, i)] = -q[i] - bii * v[i] * v[i];
            dp_dv[(i, i)] = p[i] / v[i] + gii * v[i];
            dq_dt[(i, i)] = p[i] - gii * v[i] * v[i];
            dq_dv[(i, i)] = q[i] / v[i] - bii * v[i];
        }
        [dp_dt, dp_dv, dq_dt, dq_dv]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::case::{Bus, BusKind, Line, LineKind, LineStatus, ModeSpec};
    use std::collections::BTreeMap;

    fn bus(id: u32, kind: BusKind) -> Bus {
        Bus {
            id,
            kind,
            p_load: 0.0,
            q_load: 0.0,
            gs: 0.0,
            bs: 0.0,
            p_gen: 0.0,
            v_setpoint: (kind != BusKind::Pq).then_some(1.0),
            v: 1.0,
            theta: 0.0,
            vmin: None,
            vmax: None,
            fault: None,
        }
    }

    fn line(id: &str, from: u32, to: u32, x: f64) -> Line {
        Line {
            id: id.into(),
            from,
            to,
            r: 0.0,
            x,
            b: 0.0,
            tap: 1.0,
            kind: LineKind::Line,
            status: LineStatus::Closed,
        }
    }

    fn case(lines: Vec<Line>, n: u32) -> PowerSystemCase {
        let mut buses = vec![bus(1, BusKind::Slack)];
        buses.extend((2..=n).map(|i| bus(i, BusKind::Pq)));
        let mut modes = BTreeMap::new();
        modes.insert("base".to_string(), ModeSpec::default());
        modes.insert("cut".to_string(), ModeSpec { open: vec!["A".into()] });
        PowerSystemCase {
            name: "t".into(),
            source: String::new(),
            base_mva: 100.0,
            freq_hz: 60.0,
            load_model: Default::default(),
            load_vmin: None,
            buses,
            lines,
            generators: vec![],
            modes,
            control: None,
        }
    }

    #[test]
    fn single_line_entries() {
        let y = build_admittance(&case(vec![line("A", 1, 2, 0.5)], 2), "base").unwrap();
        assert!((y[(0, 1)] - Complex64::new(0.0, 2.0)).norm() < 1e-15);
        assert!((y[(1, 0)] - Complex64::new(0.0, 2.0)).norm() < 1e-15);
        assert!((y[(0, 0)] - Complex64::new(0.0, -2.0)).norm() < 1e-15);
        assert!((y[(1, 1)] - Complex64::new(0.0, -2.0)).norm() < 1e-15);
    }

    #[test]
    fn opening_bridge_islands() {
        let c = case(vec![line("A", 1, 2, 0.5), line("B", 2, 3, 0.5)], 3);
        let err = build_admittance(&c, "cut").unwrap_err();
        assert!(matches!(err, PowerError::IslandedNetwork { bus: 2, .. }), "{err}");
    }

    #[test]
    fn off_nominal_tap() {
        let mut l = line("A", 1, 2, 0.5);
        l.tap = 2.0;
        let y = build_admittance(&case(vec![l], 2), "base").unwrap();
        // from-side diagonal scales with 1/tap², mutual terms with 1/tap
        assert!((y[(0, 0)] - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((y[(0, 1)] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((y[(1, 1)] - Complex64::new(0.0, -2.0)).norm() < 1e-15);
    }

    #[test]
    fn jacobian_against_differences() {
        let mut lines = vec![line("A", 1, 2, 0.3), line("B", 2, 3, 0.2), line("C", 1, 3, 0.4)];
        lines[1].r = 0.05;
        lines[2].b = 0.1;
        let net = Network::new(&build_admittance(&case(lines, 3), "base").unwrap());
        let v = [1.02, 0.97, 0.99];
        let th = [0.0, -0.1, 0.05];
        let [dp_dt, dp_dv, dq_dt, dq_dv] = net.injection_jacobian(&v, &th);
        let eps = 1e-7;
        let eval = |v: &[f64], th: &[f64]| {
            let (mut p, mut q) = ([0.0; 3], [0.0; 3]);
            net.injections(v, th, &mut p, &mut q);
            (p, q)
        };
        for k in 0..3 {
            let (mut tp, mut tm) = (th, th);
            tp[k] += eps;
            tm[k] -= eps;
            let ((pp, qp), (pm, qm)) = (eval(&v, &tp), eval(&v, &tm));
            let (mut vp, mut vm) = (v, v);
            vp[k] += eps;
            vm[k] -= eps;
            let ((pvp, qvp), (pvm, qvm)) = (eval(&vp, &th), eval(&vm, &th));
            for i in 0..3 {
                assert!((dp_dt[(i, k)] - (pp[i] - pm[i]) / (2.0 * eps)).abs() < 1e-6);
                assert!((dq_dt[(i, k)] - (qp[i] - qm[i]) / (2.0 * eps)).abs() < 1e-6);
                assert!((dp_dv[(i, k)] - (pvp[i] - pvm[i]) / (2.0 * eps)).abs() < 1e-6);
                assert!((dq_dv[(i, k)] - (qvp[i] - qvm[i]) / (2.0 * eps)).abs() < 1e-6);
            }
        }
    }
}
