use std::fmt;
use std::sync::Arc;

use super::{ContinuousState, DiscreteMode, HybridError, HybridState, StateLayout};
use crate::dae::{self, DaeError, DaeState, SemiExplicitDae, SolverConfig};

pub type Guard = Arc<dyn Fn(&ContinuousState) -> bool + Send + Sync>;
pub type Reset = Arc<dyn Fn(&ContinuousState) -> ContinuousState + Send + Sync>;
pub type InitSet = Arc<dyn Fn(&HybridState) -> bool + Send + Sync>;

/// A set of hybrid states the search tries to reach.
pub trait GoalRegion: Send + Sync {
    fn contains(&self, s: &HybridState) -> bool;
}

impl<F> GoalRegion for F
where
    F: Fn(&HybridState) -> bool + Send + Sync,
{
    fn contains(&self, s: &HybridState) -> bool {
        self(s)
    }
}

#[derive(Clone)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub guard: Guard,
    pub reset: Reset,
}

impl Edge {
    /// Guard `X`, reset the identity.
    pub fn unconditional(from: usize, to: usize) -> Self {
        Self {
            from,
            to,
            guard: Arc::new(|_| true),
            reset: Arc::new(|x| x.clone()),
        }
    }
}

impl fmt::Debug for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Edge({} -> {})", self.from, self.to)
    }
}

/// Hybrid automaton with one semi-explicit DAE per discrete mode.
///
/// Continuous vectors follow the `[y; z; fixed]` convention of
/// [`StateLayout`]; the mode's DAE acts on `y` and `z` only.
#[derive(Clone)]
pub struct HybridAutomaton {
    modes: Vec<DiscreteMode>,
    layout: Arc<StateLayout>,
    inputs: Vec<f64>,
    edges: Vec<Edge>,
    init: InitSet,
    dynamics: Vec<Arc<dyn SemiExplicitDae>>,
}

impl fmt::Debug for HybridAutomaton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HybridAutomaton")
            .field("modes", &self.modes)
            .field("dim", &self.layout.dim())
            .field("inputs", &self.inputs)
            .field("edges", &self.edges)
            .finish()
    }
}

impl HybridAutomaton {
    /// Builds an automaton with no edges and `Init = Q × X`.
    pub fn new(
        modes: Vec<DiscreteMode>,
        layout: Arc<StateLayout>,
        inputs: Vec<f64>,
        dynamics: Vec<Arc<dyn SemiExplicitDae>>,
    ) -> Result<Self, HybridError> {
        if modes.is_empty() {
            return Err(HybridError::Invalid("at least one mode required".into()));
        }
        for (i, m) in modes.iter().enumerate() {
            if m.id != i {
                return Err(HybridError::Invalid(format!(
                    "mode ids must be dense 0..|Q|, found {} at position {i}",
                    m.id
                )));
            }
        }
        if dynamics.len() != modes.len() {
            return Err(HybridError::Invalid(format!(
                "{} modes but {} dynamics",
                modes.len(),
                dynamics.len()
            )));
        }
        for (i, d) in dynamics.iter().enumerate() {
            if d.n_y() != layout.n_y || d.n_z() != layout.n_z {
                return Err(HybridError::Invalid(format!(
                    "dynamics of mode {i} has (n_y, n_z) = ({}, {}), layout says ({}, {})",
                    d.n_y(),
                    d.n_z(),
                    layout.n_y,
                    layout.n_z
                )));
            }
        }
        if inputs.is_empty() || inputs.iter().any(|u| !u.is_finite()) {
            return Err(HybridError::Invalid("input set must be finite and non-empty".into()));
        }
        Ok(Self {
            modes,
            layout,
            inputs,
            edges: Vec::new(),
            init: Arc::new(|_| true),
            dynamics,
        })
    }

    pub fn with_edge(mut self, edge: Edge) -> Result<Self, HybridError> {
        for q in [edge.from, edge.to] {
            if q >= self.modes.len() {
                return Err(HybridError::UnknownMode(q));
            }
        }
        self.edges.retain(|e| !(e.from == edge.from && e.to == edge.to));
        self.edges.push(edge);
        Ok(self)
    }

    pub fn with_init(mut self, init: InitSet) -> Self {
        self.init = init;
        self
    }

    pub fn modes(&self) -> &[DiscreteMode] {
        &self.modes
    }

    pub fn mode(&self, id: usize) -> Option<&DiscreteMode> {
        self.modes.get(id)
    }

    pub fn mode_by_label(&self, label: &str) -> Option<&DiscreteMode> {
        self.modes.iter().find(|m| m.label == label)
    }

    pub fn layout(&self) -> &Arc<StateLayout> {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&Edge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    pub fn dynamics(&self, mode: usize) -> &dyn SemiExplicitDae {
        self.dynamics[mode].as_ref()
    }

    pub fn dynamics_arc(&self, mode: usize) -> Arc<dyn SemiExplicitDae> {
        self.dynamics[mode].clone()
    }

    pub fn is_initial(&self, s: &HybridState) -> bool {
        (self.init)(s)
    }

    /// Discrete evolution along the edge `(s.mode, target)`.
    pub fn discrete_step(&self, s: &HybridState, target: usize) -> Result<HybridState, HybridError> {
        if target >= self.modes.len() {
            return Err(HybridError::UnknownMode(target));
        }
        let edge = self.edge(s.mode, target).ok_or(HybridError::EdgeAbsent {
            from: s.mode,
            to: target,
        })?;
        if !(edge.guard)(&s.x) {
            return Err(HybridError::GuardFailed {
                from: s.mode,
                to: target,
            });
        }
        let x = (edge.reset)(&s.x);
        if x.dim() != s.x.dim() {
            return Err(HybridError::Dimension {
                expected: s.x.dim(),
                got: x.dim(),
            });
        }
        Ok(HybridState::new(target, x))
    }

    pub fn to_dae_state(&self, x: &ContinuousState, t: f64) -> DaeState {
        DaeState::new(x.y().to_vec(), x.z().to_vec(), t)
    }

    /// Re-solves the algebraic block in `s.mode` with `y` held fixed, seeded
    /// with the current `z`. Used after a switch moves the constraint manifold.
    pub fn restore_consistency(
        &self,
        s: &HybridState,
        u: f64,
        cfg: &SolverConfig,
    ) -> Result<HybridState, DaeError> {
        let model = self.dynamics(s.mode);
        if dae::algebraic_residual(model, s.x.y(), s.x.z(), u) <= cfg.algebraic_tol {
            return Ok(s.clone());
        }
        let z = dae::solve_algebraic(model, s.x.y(), s.x.z(), u, cfg)?;
        Ok(HybridState::new(s.mode, s.x.with_z(&z)))
    }
}
