use std::sync::Arc;

use super::admittance::{build_admittance, Network};
use super::case::BusKind;
use super::model::{init_generators, BusSplit, GeneratorInit, MachineData, PowerDae};
use super::powerflow::{power_flow, PowerFlowConfig, PowerFlowResult};
use super::{PowerError, PowerSystemCase};
use crate::dae::SemiExplicitDae;
use crate::hybrid::{
    ContinuousState, DiscreteMode, Edge, HybridAutomaton, StateLayout, VarGroup, VarKind,
};

/// A case initialised at its power-flow equilibrium, with one DAE per mode.
///
/// The slack bus is held fixed only when no machine is attached to it
/// (an infinite bus); otherwise every bus voltage is an algebraic unknown
/// and the machines alone set the angle reference.
#[derive(Clone, Debug)]
pub struct PowerSystem {
    case: PowerSystemCase,
    base_mode: String,
    pf: PowerFlowResult,
    gens: Vec<GeneratorInit>,
    split: BusSplit,
    layout: Arc<StateLayout>,
    modes: Vec<DiscreteMode>,
    dynamics: Vec<Arc<PowerDae>>,
}

impl PowerSystem {
    pub fn new(
        case: PowerSystemCase,
        base_mode: &str,
        pf_cfg: &PowerFlowConfig,
    ) -> Result<Self, PowerError> {
        case.validate()?;
        if !case.modes.contains_key(base_mode) {
            return Err(PowerError::UnknownMode(base_mode.to_string()));
        }
        let pf = power_flow(&case, base_mode, pf_cfg)?;
        let gens = init_generators(&case, &pf);

        let n = case.buses.len();
        let slack = case.slack_index();
        let slack_fixed = case.generator_at(case.buses[slack].id).is_none();
        let mut free_pos = vec![None; n];
        let mut free = Vec::new();
        let mut fixed_value = vec![(0.0, 0.0); n];
        for k in 0..n {
            if slack_fixed && k == slack {
                fixed_value[k] = (pf.theta[k], pf.v[k]);
            } else {
                free_pos[k] = Some(free.len());
                free.push(k);
            }
        }
        let split = BusSplit {
            free_pos,
            free,
            fixed_value,
        };
        let layout = Arc::new(Self::make_layout(case.generators.len(), n, &split)?);
        let modes: Vec<DiscreteMode> = case
            .mode_labels()
            .into_iter()
            .enumerate()
            .map(|(i, l)| DiscreteMode::new(i, l))
            .collect();

        let mut sys = Self {
            case,
            base_mode: base_mode.to_string(),
            pf,
            gens,
            split,
            layout,
            modes,
            dynamics: Vec::new(),
        };
        let mut dynamics = Vec::new();
        for m in &sys.modes {
            dynamics.push(Arc::new(sys.make_dae(&sys.case, &m.label)?));
        }
        sys.dynamics = dynamics;

        if let Some(vm) = sys.case.load_vmin {
            if let Some(k) = sys.pf.v.iter().position(|&v| v < vm) {
                return Err(PowerError::Validation(format!(
                    "equilibrium voltage at bus {} is below load_vmin",
                    sys.case.buses[k].id
                )));
            }
        }
        Ok(sys)
    }

    fn make_layout(ng: usize, n: usize, split: &BusSplit) -> Result<StateLayout, PowerError> {
        let nf = split.free.len();
        let nfix = n - nf;
        let y = 2 * ng;
        let mut phase = Vec::with_capacity(n);
        let mut magnitude = Vec::with_capacity(n);
        let mut fixed_seen = 0;
        for pos in &split.free_pos {
            match pos {
                Some(p) => {
                    phase.push(y + p);
                    magnitude.push(y + nf + p);
                }
                None => {
                    phase.push(y + 2 * nf + fixed_seen);
                    magnitude.push(y + 2 * nf + nfix + fixed_seen);
                    fixed_seen += 1;
                }
            }
        }
        Ok(StateLayout::new(
            y,
            2 * nf,
            2 * nfix,
            vec![
                VarGroup {
                    name: "delta".into(),
                    kind: VarKind::RotorAngle,
                    indices: (0..ng).collect(),
                },
                VarGroup {
                    name: "omega".into(),
                    kind: VarKind::RotorSpeed,
                    indices: (ng..2 * ng).collect(),
                },
                VarGroup {
                    name: "theta".into(),
                    kind: VarKind::BusPhase,
                    indices: phase,
                },
                VarGroup {
                    name: "v".into(),
                    kind: VarKind::BusMagnitude,
                    indices: magnitude,
                },
            ],
        )?)
    }

    /// The classical-machine DAE of `case` (possibly faulted) in `mode`,
    /// using the machine parameters found at the equilibrium.
    pub fn make_dae(&self, case: &PowerSystemCase, mode: &str) -> Result<PowerDae, PowerError> {
        let net = Network::new(&build_admittance(case, mode)?);
        let machines = case
            .generators
            .iter()
            .zip(&self.gens)
            .map(|(g, init)| MachineData {
                bus: case.bus_index(g.bus).expect("validated generator bus"),
                h: g.h,
                d: g.d,
                xd_p: g.xd_p,
                e_p: init.e_p,
                p_m: init.p_m,
            })
            .collect();
        let control = case
            .control
            .as_ref()
            .and_then(|c| case.generator_index(c.target));
        Ok(PowerDae::new(case, net, machines, control, self.split.clone(), &self.pf.v))
    }

    pub fn case(&self) -> &PowerSystemCase {
        &self.case
    }

    pub fn base_mode(&self) -> &str {
        &self.base_mode
    }

    pub fn powerflow(&self) -> &PowerFlowResult {
        &self.pf
    }

    pub fn generators(&self) -> &[GeneratorInit] {
        &self.gens
    }

    pub fn layout(&self) -> &Arc<StateLayout> {
        &self.layout
    }

    pub fn modes(&self) -> &[DiscreteMode] {
        &self.modes
    }

    pub fn mode_id(&self, label: &str) -> Result<usize, PowerError> {
        self.modes
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| PowerError::UnknownMode(label.to_string()))
    }

    pub fn dae(&self, mode: usize) -> Arc<PowerDae> {
        self.dynamics[mode].clone()
    }

    pub fn inertia(&self) -> Vec<f64> {
        self.case.generators.iter().map(|g| g.h).collect()
    }

    pub fn inputs(&self) -> Vec<f64> {
        self.case
            .control
            .as_ref()
            .map(|c| c.inputs.clone())
            .unwrap_or_else(|| vec![0.0])
    }

    /// Whether bus `k` carries algebraic unknowns.
    pub fn is_free_bus(&self, k: usize) -> bool {
        self.split.free_pos[k].is_some()
    }

    /// Assembles `[y; z; fixed]`.
    pub fn state(&self, y: &[f64], z: &[f64]) -> ContinuousState {
        let mut values = Vec::with_capacity(self.layout.dim());
        values.extend_from_slice(y);
        values.extend_from_slice(z);
        let fixed: Vec<usize> = (0..self.case.buses.len())
            .filter(|&k| !self.is_free_bus(k))
            .collect();
        values.extend(fixed.iter().map(|&k| self.split.fixed_value[k].0));
        values.extend(fixed.iter().map(|&k| self.split.fixed_value[k].1));
        ContinuousState::new(values, self.layout.clone()).expect("layout dimension")
    }

    /// The power-flow operating point with machines at rest.
    pub fn equilibrium(&self) -> ContinuousState {
        let ng = self.gens.len();
        let mut y = vec![0.0; 2 * ng];
        for (i, g) in self.gens.iter().enumerate() {
            y[i] = g.delta;
            y[ng + i] = g.omega;
        }
        let nf = self.split.free.len();
        let mut z = vec![0.0; 2 * nf];
        for (p, &k) in self.split.free.iter().enumerate() {
            z[p] = self.pf.theta[k];
            z[nf + p] = self.pf.v[k];
        }
        self.state(&y, &z)
    }

    /// Declared amplitude bounds of bus `k`.
    pub fn voltage_bounds(&self, k: usize) -> Option<(f64, f64)> {
        let b = &self.case.buses[k];
        match (b.vmin, b.vmax) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            _ => None,
        }
    }

    /// Automaton over all case modes with unconditional identity-reset
    /// edges between every ordered pair of distinct modes. `Init` admits
    /// any continuous state in `initial_mode`.
    pub fn automaton(&self, initial_mode: usize) -> Result<HybridAutomaton, PowerError> {
        let dynamics: Vec<Arc<dyn SemiExplicitDae>> = self
            .dynamics
            .iter()
            .map(|d| d.clone() as Arc<dyn SemiExplicitDae>)
            .collect();
        let mut h = HybridAutomaton::new(
            self.modes.clone(),
            self.layout.clone(),
            self.inputs(),
            dynamics,
        )?
        .with_init(Arc::new(move |s| s.mode == initial_mode));
        for a in 0..self.modes.len() {
            for b in 0..self.modes.len() {
                if a != b {
                    h = h.with_edge(Edge::unconditional(a, b))?;
                }
            }
        }
        Ok(h)
    }

    pub fn bus_kind(&self, k: usize) -> BusKind {
        self.case.buses[k].kind
    }
}
