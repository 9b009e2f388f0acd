use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use super::distance::{distance, DistanceSpec};
use super::sampler::{sample_state, PlannerRng, SamplerSpec};
use super::tree::{Candidate, EdgeInput, GoalHit, SearchTree};
use super::PlannerError;
use crate::dae::{self, DaeState, SolverConfig};
use crate::hybrid::{ContinuousState, GoalRegion, HybridAutomaton, HybridState};
use crate::power::OperatingLimits;

/// State constraints a segment must respect at every sample.
pub trait Feasibility: Send + Sync {
    fn admits(&self, x: &ContinuousState) -> bool;
}

impl Feasibility for OperatingLimits {
    fn admits(&self, x: &ContinuousState) -> bool {
        OperatingLimits::admits(self, x)
    }
}

/// No constraints at all.
pub struct Unconstrained;

impl Feasibility for Unconstrained {
    fn admits(&self, _x: &ContinuousState) -> bool {
        true
    }
}

pub struct PlanningProblem<'a> {
    pub automaton: &'a HybridAutomaton,
    pub sampler: SamplerSpec,
    pub distance: DistanceSpec,
    pub goal: &'a dyn GoalRegion,
    pub feasibility: &'a dyn Feasibility,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub k: usize,
    pub dt: f64,
    pub seed: u64,
    #[serde(default = "yes")]
    pub stop_on_goal: bool,
    /// Worker threads for the simulations of one expansion.
    #[serde(default = "one")]
    pub threads: usize,
    /// Run the index-1 test on every state that enters the tree.
    #[serde(default)]
    pub check_index1: bool,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

impl PlannerConfig {
    pub fn new(k: usize, dt: f64, seed: u64) -> Self {
        Self {
            k,
            dt,
            seed,
            stop_on_goal: true,
            threads: 1,
            check_index1: false,
        }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PlannerError::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.threads == 0 {
            return Err(PlannerError::InvalidConfig("threads must be at least 1".into()));
        }
        Ok(())
    }
}

/// Runs the simulations of one expansion serially or on a private pool.
pub enum Executor {
    Serial,
    Pool(ThreadPool),
}

impl Executor {
    pub fn new(threads: usize) -> Result<Self, PlannerError> {
        if threads <= 1 {
            return Ok(Self::Serial);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map(Self::Pool)
            .map_err(|e| PlannerError::InvalidConfig(e.to_string()))
    }

    /// Maps `f` over `items`, keeping the input order.
    fn map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        match self {
            Self::Serial => items.iter().map(f).collect(),
            Self::Pool(pool) => pool.install(|| items.par_iter().map(f).collect()),
        }
    }
}

/// Trajectory of one `(mode, input)` pair from a tree state.
#[derive(Clone, Debug)]
pub struct EdgeRun {
    /// State after the optional switch, algebraic part restored.
    pub start: HybridState,
    pub switched: bool,
    pub times: Vec<f64>,
    pub states: Vec<HybridState>,
}

/// Switch to `mode` if needed, then hold `u` for `dt`.
pub fn simulate_edge(
    automaton: &HybridAutomaton,
    from: &HybridState,
    t: f64,
    mode: usize,
    u: f64,
    dt: f64,
    solver: &SolverConfig,
) -> Result<EdgeRun, String> {
    let switched = mode != from.mode;
    let start = if switched {
        let s = automaton.discrete_step(from, mode).map_err(|e| e.to_string())?;
        automaton
            .restore_consistency(&s, u, solver)
            .map_err(|e| e.to_string())?
    } else {
        from.clone()
    };
    let state0 = DaeState::new(start.x.y().to_vec(), start.x.z().to_vec(), t);
    let seg = dae::simulate(automaton.dynamics(mode), &state0, u, dt, solver)
        .map_err(|e| e.to_string())?;
    let states = seg
        .states
        .iter()
        .map(|s| HybridState::new(mode, start.x.with_yz(&s.y, &s.z)))
        .collect();
    Ok(EdgeRun {
        start,
        switched,
        times: seg.times,
        states,
    })
}

/// Counters of one `expand` call.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExpandStats {
    pub simulations: usize,
    pub failed: usize,
    pub infeasible: usize,
    pub index1_checks: usize,
    pub index1_failures: usize,
}

enum Outcome {
    /// Candidate plus `(states checked, singular)` from the index-1 test.
    Ok(Candidate, Option<(usize, usize)>),
    Failed,
    Infeasible,
}

fn evaluate(
    problem: &PlanningProblem<'_>,
    from: &HybridState,
    t: f64,
    (mode, input_index, u): (usize, usize, f64),
    cfg: &PlannerConfig,
    solver: &SolverConfig,
) -> Outcome {
    let Ok(run) = simulate_edge(problem.automaton, from, t, mode, u, cfg.dt, solver) else {
        return Outcome::Failed;
    };
    if !run.states.iter().all(|s| problem.feasibility.admits(&s.x)) {
        return Outcome::Infeasible;
    }
    // without a switch the first sample is the parent itself
    let first = usize::from(!run.switched);
    let goal = (first..run.states.len())
        .find(|&k| problem.goal.contains(&run.states[k]))
        .map(|k| GoalHit {
            sample: k,
            t: run.times[k],
            state: run.states[k].clone(),
        });
    let state = run.states.last().expect("segment has samples").clone();
    // every state the segment adds; the parent was checked when it arrived
    let index1 = cfg.check_index1.then(|| {
        let model = problem.automaton.dynamics(mode);
        run.states[first..].iter().fold((0, 0), |(n, bad), s| {
            let ok = dae::index1_check(model, s.x.y(), s.x.z(), u).nonsingular;
            (n + 1, bad + usize::from(!ok))
        })
    });
    Outcome::Ok(
        Candidate {
            mode,
            input_index,
            u,
            state,
            t: run.times[run.times.len() - 1],
            goal,
        },
        index1,
    )
}

/// `S_P(node)` over `Q × U` in enumeration order (modes ascending, inputs
/// as declared). The first call simulates and caches; later calls return
/// the cached list.
pub fn expand(
    tree: &mut SearchTree,
    node: usize,
    problem: &PlanningProblem<'_>,
    cfg: &PlannerConfig,
    solver: &SolverConfig,
    exec: &Executor,
) -> (Arc<[Candidate]>, ExpandStats) {
    if let Some(c) = tree.cached(node) {
        return (c, ExpandStats::default());
    }
    let from = tree.node(node).state.clone();
    let t = tree.node(node).t;
    let h = problem.automaton;
    let pairs: Vec<(usize, usize, f64)> = h
        .modes()
        .iter()
        .flat_map(|q| h.inputs().iter().enumerate().map(move |(j, &u)| (q.id, j, u)))
        .collect();
    let outcomes = exec.map(&pairs, |&p| evaluate(problem, &from, t, p, cfg, solver));

    let mut stats = ExpandStats {
        simulations: pairs.len(),
        ..ExpandStats::default()
    };
    let mut candidates = Vec::with_capacity(pairs.len());
    for o in outcomes {
        match o {
            Outcome::Ok(c, index1) => {
                if let Some((n, bad)) = index1 {
                    stats.index1_checks += n;
                    stats.index1_failures += bad;
                }
                candidates.push(c);
            }
            Outcome::Failed => stats.failed += 1,
            Outcome::Infeasible => stats.infeasible += 1,
        }
    }
    let candidates: Arc<[Candidate]> = candidates.into();
    tree.record_expansion(node, candidates.clone(), stats.simulations);
    (candidates, stats)
}

/// Linear scan; ties go to the lowest id. Returns the node and the number
/// of distance evaluations.
pub fn nearest(tree: &SearchTree, s_rand: &HybridState, spec: &DistanceSpec) -> (usize, usize) {
    let mut best = (0, f64::INFINITY);
    for n in tree.nodes() {
        let d = distance(&n.state, s_rand, spec);
        if d < best.1 {
            best = (n.id, d);
        }
    }
    (best.0, tree.len())
}

/// Candidate closest to `s_rand`; ties go to the earlier candidate.
pub fn select_new(
    candidates: &[Candidate],
    s_rand: &HybridState,
    spec: &DistanceSpec,
) -> Result<usize, PlannerError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let d = distance(&c.state, s_rand, spec);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|b| b.0).ok_or(PlannerError::NoFeasibleCandidate)
}

/// Seconds spent in each step of the loop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingBreakdown {
    pub step2: f64,
    pub step3: f64,
    pub step4: f64,
    pub step5: f64,
    /// Wall time of the whole loop, measured separately.
    pub total: f64,
}

impl TimingBreakdown {
    pub fn steps_sum(&self) -> f64 {
        self.step2 + self.step3 + self.step4 + self.step5
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub t_step2: f64,
    pub t_step3: f64,
    pub t_step4: f64,
    pub t_step5: f64,
    pub nodes: usize,
    pub sims_total: usize,
    pub comparisons: usize,
    pub rejected: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub iterations: usize,
    pub simulations: usize,
    pub comparisons: usize,
    pub rejected_iterations: usize,
    pub failed_candidates: usize,
    pub infeasible_candidates: usize,
    pub index1_checks: usize,
    pub index1_checks_failed: usize,
    pub expanded: usize,
    /// `|Q|·|U|·|S_N|`
    pub simulation_bound: usize,
}

#[derive(Clone, Debug)]
pub struct PlannerOutcome {
    pub tree: SearchTree,
    pub goal: Option<usize>,
    pub timing: TimingBreakdown,
    pub records: Vec<IterationRecord>,
    pub stats: RunStats,
}

/// The RRT loop: sample, nearest, expand, select and add, with the goal
/// tested on every sample of each arriving segment.
pub fn build_tree(
    problem: &PlanningProblem<'_>,
    s_init: HybridState,
    t_init: f64,
    cfg: &PlannerConfig,
    solver: &SolverConfig,
) -> Result<PlannerOutcome, PlannerError> {
    cfg.validate()?;
    solver.validate()?;
    let exec = Executor::new(cfg.threads)?;
    let mut rng = PlannerRng::new(cfg.seed);
    let mut tree = SearchTree::new(s_init, t_init);
    let mut timing = TimingBreakdown::default();
    let mut records = Vec::with_capacity(cfg.k);
    let mut stats = RunStats::default();
    let pairs = problem.automaton.modes().len() * problem.automaton.inputs().len();

    let mut goal = problem.goal.contains(&tree.root().state).then_some(0);
    let started = Instant::now();
    for iter in 1..=cfg.k {
        if goal.is_some() && cfg.stop_on_goal {
            break;
        }
        let t2 = Instant::now();
        let s_rand = sample_state(&problem.sampler, &mut rng);
        let t3 = Instant::now();
        let (near, comparisons) = nearest(&tree, &s_rand, &problem.distance);
        let t4 = Instant::now();
        let (candidates, es) = expand(&mut tree, near, problem, cfg, solver, &exec);
        let t5 = Instant::now();
        let rejected = match select_new(&candidates, &s_rand, &problem.distance) {
            Ok(i) => {
                let c = &candidates[i];
                let edge = EdgeInput { mode: c.mode, u: c.u };
                let (state, t) = match &c.goal {
                    Some(hit) => (hit.state.clone(), hit.t),
                    None => (c.state.clone(), c.t),
                };
                let id = tree.add_node(near, state, edge, t);
                if c.goal.is_some() && goal.is_none() {
                    goal = Some(id);
                }
                false
            }
            Err(_) => true,
        };
        let end = Instant::now();

        let rec = IterationRecord {
            iter,
            t_step2: (t3 - t2).as_secs_f64(),
            t_step3: (t4 - t3).as_secs_f64(),
            t_step4: (t5 - t4).as_secs_f64(),
            t_step5: (end - t5).as_secs_f64(),
            nodes: tree.len(),
            sims_total: tree.simulations(),
            comparisons,
            rejected,
        };
        timing.step2 += rec.t_step2;
        timing.step3 += rec.t_step3;
        timing.step4 += rec.t_step4;
        timing.step5 += rec.t_step5;
        stats.iterations = iter;
        stats.comparisons += comparisons;
        stats.rejected_iterations += usize::from(rejected);
        stats.failed_candidates += es.failed;
        stats.infeasible_candidates += es.infeasible;
        stats.index1_checks += es.index1_checks;
        stats.index1_checks_failed += es.index1_failures;
        records.push(rec);
    }
    timing.total = started.elapsed().as_secs_f64();
    stats.simulations = tree.simulations();
    stats.expanded = tree.expanded().len();
    stats.simulation_bound = pairs * stats.expanded;
    Ok(PlannerOutcome {
        tree,
        goal,
        timing,
        records,
        stats,
    })
}
