use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    validate_trajectory, ContinuousState, HybridAutomaton, HybridError, HybridState,
    HybridTimeTrajectory, StateLayout, TrajectoryViolation,
};
use crate::dae::{self, DaeState};

/// Input applied on one interval: a constant continuous input on intervals
/// of positive length, or the target mode on zero-length (switching)
/// intervals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlInput {
    Continuous(f64),
    Discrete(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
}

/// A finite execution `χ = (τ, q, x, u)` with states sampled on the
/// integrator grid of each interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Execution {
    pub tau: HybridTimeTrajectory,
    pub modes: Vec<usize>,
    pub inputs: Vec<ControlInput>,
    pub samples: Vec<Vec<Sample>>,
    pub layout: Arc<StateLayout>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExecutionDoc {
    intervals: Vec<(f64, f64)>,
    modes: Vec<usize>,
    inputs: Vec<ControlInput>,
    samples: Vec<SampleDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleDoc {
    interval: usize,
    t: f64,
    x: Vec<f64>,
}

impl Execution {
    pub fn new(layout: Arc<StateLayout>) -> Self {
        Self {
            tau: HybridTimeTrajectory::default(),
            modes: Vec::new(),
            inputs: Vec::new(),
            samples: Vec::new(),
            layout,
        }
    }

    pub fn push_interval(
        &mut self,
        interval: (f64, f64),
        mode: usize,
        input: ControlInput,
        samples: Vec<Sample>,
    ) {
        self.tau.intervals.push(interval);
        self.modes.push(mode);
        self.inputs.push(input);
        self.samples.push(samples);
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Number of intervals with positive length.
    pub fn continuous_intervals(&self) -> usize {
        self.tau.intervals.iter().filter(|(a, b)| b > a).count()
    }

    fn state_at(&self, interval: usize, sample: &Sample) -> HybridState {
        let x = ContinuousState::new(sample.x.clone(), self.layout.clone())
            .expect("sample dimension matches layout");
        HybridState::new(self.modes[interval], x)
    }

    /// `(q(τ₀), x(τ₀))`.
    pub fn first_state(&self) -> Option<HybridState> {
        let s = self.samples.first()?.first()?;
        Some(self.state_at(0, s))
    }

    /// `(q(τ'_N), x(τ'_N))`.
    pub fn last_state(&self) -> Option<HybridState> {
        let i = self.samples.len().checked_sub(1)?;
        let s = self.samples[i].last()?;
        Some(self.state_at(i, s))
    }

    /// Appends `next`, which must start where `self` ends.
    pub fn concat(mut self, next: Execution) -> Result<Execution, HybridError> {
        if self.layout != next.layout {
            return Err(HybridError::Format("layouts differ".into()));
        }
        if let (Some(end), Some(start)) = (self.tau.end(), next.tau.start()) {
            if end != start {
                return Err(HybridError::Format(format!(
                    "second execution starts at {start}, first ends at {end}"
                )));
            }
        }
        self.tau.intervals.extend(next.tau.intervals);
        self.modes.extend(next.modes);
        self.inputs.extend(next.inputs);
        self.samples.extend(next.samples);
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        let doc = ExecutionDoc {
            intervals: self.tau.intervals.clone(),
            modes: self.modes.clone(),
            inputs: self.inputs.clone(),
            samples: self
                .samples
                .iter()
                .enumerate()
                .flat_map(|(i, ss)| {
                    ss.iter().map(move |s| SampleDoc {
                        interval: i,
                        t: s.t,
                        x: s.x.clone(),
                    })
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("execution serialises")
    }

    pub fn from_json(text: &str, layout: Arc<StateLayout>) -> Result<Execution, HybridError> {
        let doc: ExecutionDoc =
            serde_json::from_str(text).map_err(|e| HybridError::Format(e.to_string()))?;
        let n = doc.intervals.len();
        if doc.modes.len() != n || doc.inputs.len() != n {
            return Err(HybridError::Format(format!(
                "{n} intervals, {} modes, {} inputs",
                doc.modes.len(),
                doc.inputs.len()
            )));
        }
        let mut samples = vec![Vec::new(); n];
        for s in doc.samples {
            let slot = samples.get_mut(s.interval).ok_or_else(|| {
                HybridError::Format(format!("sample refers to interval {}", s.interval))
            })?;
            slot.push(Sample { t: s.t, x: s.x });
        }
        Ok(Execution {
            tau: HybridTimeTrajectory::new(doc.intervals),
            modes: doc.modes,
            inputs: doc.inputs,
            samples,
            layout,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualKind {
    /// `‖ψ‖∞` at a sample.
    Algebraic,
    /// Trapezoidal defect between a sample and its predecessor.
    Differential,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExecutionViolation {
    Structure { interval: usize, reason: String },
    Trajectory(TrajectoryViolation),
    Input { interval: usize, reason: String },
    Init,
    Edge { boundary: usize, from: usize, to: usize },
    Guard { boundary: usize, from: usize, to: usize },
    Reset { boundary: usize, index: usize, deviation: f64 },
    Residual { interval: usize, sample: usize, kind: ResidualKind, value: f64 },
}

impl fmt::Display for ExecutionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Structure { interval, reason } => write!(f, "interval {interval}: {reason}"),
            Self::Trajectory(v) => write!(f, "time trajectory: {v}"),
            Self::Input { interval, reason } => write!(f, "input of interval {interval}: {reason}"),
            Self::Init => write!(f, "first state is not an initial state"),
            Self::Edge { boundary, from, to } => {
                write!(f, "boundary {boundary}: no edge {from} -> {to}")
            }
            Self::Guard { boundary, from, to } => {
                write!(f, "boundary {boundary}: guard of {from} -> {to} fails")
            }
            Self::Reset {
                boundary,
                index,
                deviation,
            } => write!(
                f,
                "boundary {boundary}: variable {index} deviates from the reset by {deviation:e}"
            ),
            Self::Residual {
                interval,
                sample,
                kind,
                value,
            } => write!(f, "interval {interval} sample {sample}: {kind:?} residual {value:e}"),
        }
    }
}

fn structure(interval: usize, reason: impl Into<String>) -> ExecutionViolation {
    ExecutionViolation::Structure {
        interval,
        reason: reason.into(),
    }
}

fn check_structure(h: &HybridAutomaton, chi: &Execution) -> Result<(), ExecutionViolation> {
    let n = chi.tau.len();
    if n == 0 {
        return Err(ExecutionViolation::Trajectory(TrajectoryViolation::Empty));
    }
    if chi.modes.len() != n || chi.inputs.len() != n || chi.samples.len() != n {
        return Err(structure(0, "intervals, modes, inputs and samples differ in length"));
    }
    if chi.layout.dim() != h.dim() {
        return Err(structure(0, "layout dimension differs from the automaton"));
    }
    for (i, ((&(a, b), ss), &q)) in chi
        .tau
        .intervals
        .iter()
        .zip(&chi.samples)
        .zip(&chi.modes)
        .enumerate()
    {
        if q >= h.modes().len() {
            return Err(structure(i, format!("unknown mode {q}")));
        }
        if ss.is_empty() {
            return Err(structure(i, "empty state series"));
        }
        if b > a && ss.len() < 2 {
            return Err(structure(i, "positive-length interval needs at least two samples"));
        }
        if let Some(k) = ss.iter().position(|s| s.x.len() != h.dim()) {
            return Err(structure(i, format!("sample {k} has wrong dimension")));
        }
        if ss[0].t != a || ss[ss.len() - 1].t != b {
            return Err(structure(i, "samples do not span the interval"));
        }
        if ss.windows(2).any(|w| !(w[1].t >= w[0].t)) {
            return Err(structure(i, "sample times decrease"));
        }
    }
    Ok(())
}

fn check_inputs(h: &HybridAutomaton, chi: &Execution) -> Result<(), ExecutionViolation> {
    for (i, (&(a, b), input)) in chi.tau.intervals.iter().zip(&chi.inputs).enumerate() {
        let bad = |reason: String| ExecutionViolation::Input {
            interval: i,
            reason,
        };
        match (*input, b > a) {
            (ControlInput::Discrete(q), false) => {
                if q != chi.modes[i] {
                    return Err(bad(format!("discrete input {q} but interval mode {}", chi.modes[i])));
                }
            }
            (ControlInput::Continuous(u), true) => {
                if !h.inputs().contains(&u) {
                    return Err(bad(format!("{u} is not in the input set")));
                }
            }
            (ControlInput::Discrete(_), true) => {
                return Err(bad("discrete input on a positive-length interval".into()))
            }
            (ControlInput::Continuous(_), false) => {
                return Err(bad("continuous input on a zero-length interval".into()))
            }
        }
    }
    Ok(())
}

/// Checks that `h` accepts `chi`.
///
/// Boundaries between intervals of the same mode are treated as the
/// implicit stay transition (guard `X`, identity reset). At a boundary the
/// differential and fixed variables must match the reset image to `tol`;
/// algebraic variables are re-solved on the new constraint manifold and are
/// checked through `ψ` instead. Within each positive-length interval every
/// sample must satisfy `‖ψ‖∞ ≤ tol` and every consecutive pair the
/// trapezoidal relation to `tol`.
pub fn validate_execution(
    h: &HybridAutomaton,
    chi: &Execution,
    tol: f64,
) -> Result<(), ExecutionViolation> {
    check_structure(h, chi)?;
    validate_trajectory(&chi.tau).map_err(ExecutionViolation::Trajectory)?;
    check_inputs(h, chi)?;

    let first = chi.first_state().expect("structure checked");
    if !h.is_initial(&first) {
        return Err(ExecutionViolation::Init);
    }

    let layout = chi.layout.clone();
    for i in 0..chi.len().saturating_sub(1) {
        let (from, to) = (chi.modes[i], chi.modes[i + 1]);
        let before = ContinuousState::new(
            chi.samples[i].last().expect("non-empty").x.clone(),
            layout.clone(),
        )
        .expect("dimension checked");
        let expected = if from == to {
            before
        } else {
            let edge = h.edge(from, to).ok_or(ExecutionViolation::Edge {
                boundary: i,
                from,
                to,
            })?;
            if !(edge.guard)(&before) {
                return Err(ExecutionViolation::Guard {
                    boundary: i,
                    from,
                    to,
                });
            }
            (edge.reset)(&before)
        };
        let after = &chi.samples[i + 1][0].x;
        for (k, (e, a)) in expected.values().iter().zip(after).enumerate() {
            if layout.is_algebraic(k) {
                continue;
            }
            let dev = (e - a).abs();
            if !(dev <= tol) {
                return Err(ExecutionViolation::Reset {
                    boundary: i,
                    index: k,
                    deviation: dev,
                });
            }
        }
    }

    let (n_y, n_z) = (layout.n_y, layout.n_z);
    for (i, (&(a, b), ss)) in chi.tau.intervals.iter().zip(&chi.samples).enumerate() {
        if b <= a {
            continue;
        }
        let u = match chi.inputs[i] {
            ControlInput::Continuous(u) => u,
            ControlInput::Discrete(_) => unreachable!("inputs checked"),
        };
        let model = h.dynamics(chi.modes[i]);
        let states: Vec<DaeState> = ss
            .iter()
            .map(|s| DaeState::new(s.x[..n_y].to_vec(), s.x[n_y..n_y + n_z].to_vec(), s.t))
            .collect();
        for (k, st) in states.iter().enumerate() {
            let r = dae::algebraic_residual(model, &st.y, &st.z, u);
            if !(r <= tol) {
                return Err(ExecutionViolation::Residual {
                    interval: i,
                    sample: k,
                    kind: ResidualKind::Algebraic,
                    value: r,
                });
            }
            if k > 0 {
                if st.t == states[k - 1].t {
                    continue;
                }
                let d = dae::trapezoid_defect(model, &states[k - 1], st, u);
                if !(d <= tol) {
                    return Err(ExecutionViolation::Residual {
                        interval: i,
                        sample: k,
                        kind: ResidualKind::Differential,
                        value: d,
                    });
                }
            }
        }
    }
    Ok(())
}
