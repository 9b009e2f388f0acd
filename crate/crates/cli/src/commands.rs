use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use dsa_core::dae::{self, DaeState, TrajectorySegment};
use dsa_core::hybrid::{validate_execution, Execution, HybridAutomaton, HybridState, VarKind};
use dsa_core::planner::{
    build_tree, extract_execution, search_box, DistanceSpec, PlannerConfig, PlannerOutcome,
    PlanningProblem,
};
use dsa_core::power::{
    avg_bus_phase, coi_angle, fault_sequence, in_target_set, load_case, power_flow, BusKind,
    PowerSystem, PowerSystemCase, TargetSetSpec,
};

use crate::chart::{line_chart, Series};
use crate::scenario::{Scenario, ScenarioError};

/// Settings given on the command line that override the scenario.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// 0 is read as 1.
    pub threads: usize,
    pub k: Option<usize>,
}

impl RunOptions {
    fn out_dir(&self, sc: &Scenario) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| sc.output_dir());
        fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(dir)
    }

    fn seed(&self, sc: &Scenario) -> Result<u64> {
        self.seed.or(sc.planner.seed).ok_or_else(|| {
            ScenarioError("the planner needs a seed: set planner.seed or pass --seed".into()).into()
        })
    }

    fn threads(&self) -> usize {
        self.threads.max(1)
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn load(sc: &Scenario) -> Result<PowerSystemCase> {
    Ok(load_case(&sc.case)?)
}

fn system(sc: &Scenario) -> Result<PowerSystem> {
    let case = load(sc)?;
    Ok(PowerSystem::new(case, &sc.base_mode, &sc.powerflow)?)
}

pub struct PowerFlowReport {
    pub iterations: usize,
    pub mismatch: f64,
    pub rows: usize,
    pub out_dir: PathBuf,
}

/// Bus table of the base-mode load flow plus a convergence log.
pub fn powerflow(sc: &Scenario, opts: &RunOptions) -> Result<PowerFlowReport> {
    let case = load(sc)?;
    let dir = opts.out_dir(sc)?;
    let log_path = dir.join("powerflow.log");
    let mut log = format!("case: {}\nmode: {}\n", case.name, sc.base_mode);
    let pf = match power_flow(&case, &sc.base_mode, &sc.powerflow) {
        Ok(pf) => pf,
        Err(e) => {
            let _ = writeln!(log, "status: failed\nerror: {e}");
            write(&log_path, &log)?;
            return Err(e.into());
        }
    };
    let _ = writeln!(
        log,
        "status: converged\niterations: {}\nmismatch: {:e}",
        pf.iterations, pf.mismatch
    );
    write(&log_path, &log)?;

    let mut w = csv::Writer::from_path(dir.join("powerflow.csv"))?;
    w.write_record(["bus", "kind", "v", "theta", "p", "q"])?;
    for (k, b) in case.buses.iter().enumerate() {
        let kind = match b.kind {
            BusKind::Slack => "slack",
            BusKind::Pv => "PV",
            BusKind::Pq => "PQ",
        };
        w.write_record([
            b.id.to_string(),
            kind.to_string(),
            pf.v[k].to_string(),
            pf.theta[k].to_string(),
            pf.p[k].to_string(),
            pf.q[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(PowerFlowReport {
        iterations: pf.iterations,
        mismatch: pf.mismatch,
        rows: case.buses.len(),
        out_dir: dir,
    })
}

/// Columns `t, δ_i, ω_i, θ_j, v_j, δ_i − δ_COI, θ_j − θ_avg` for a list of
/// segments; boundary times appear once per segment.
pub struct TimeSeries {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub n_gen: usize,
    pub n_bus: usize,
}

impl TimeSeries {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    /// Rotor speeds of every generator in row `r`.
    pub fn speeds(&self, r: usize) -> &[f64] {
        &self.rows[r][1 + self.n_gen..1 + 2 * self.n_gen]
    }
}

pub fn time_series<'a>(
    sys: &PowerSystem,
    states: impl IntoIterator<Item = (f64, &'a [f64])>,
) -> TimeSeries {
    let case = sys.case();
    let mut header = vec!["t".to_string()];
    header.extend(case.generators.iter().map(|g| format!("delta_{}", g.id)));
    header.extend(case.generators.iter().map(|g| format!("omega_{}", g.id)));
    header.extend(case.buses.iter().map(|b| format!("theta_{}", b.id)));
    header.extend(case.buses.iter().map(|b| format!("v_{}", b.id)));
    header.extend(case.generators.iter().map(|g| format!("delta_coi_{}", g.id)));
    header.extend(case.buses.iter().map(|b| format!("theta_rel_{}", b.id)));

    let layout = sys.layout();
    let inertia = sys.inertia();
    let rows = states
        .into_iter()
        .map(|(t, x)| {
            let pick = |kind| layout.indices(kind).iter().map(|&i| x[i]).collect::<Vec<f64>>();
            let (delta, omega) = (pick(VarKind::RotorAngle), pick(VarKind::RotorSpeed));
            let (theta, v) = (pick(VarKind::BusPhase), pick(VarKind::BusMagnitude));
            let coi = coi_angle(&delta, &inertia);
            let avg = avg_bus_phase(&theta);
            let mut row = vec![t];
            row.extend(&delta);
            row.extend(&omega);
            row.extend(&theta);
            row.extend(&v);
            row.extend(delta.iter().map(|d| d - coi));
            row.extend(theta.iter().map(|th| th - avg));
            row
        })
        .collect();
    TimeSeries {
        header,
        rows,
        n_gen: case.generators.len(),
        n_bus: case.buses.len(),
    }
}

fn segment_states<'a>(
    sys: &'a PowerSystem,
    segments: &'a [TrajectorySegment],
) -> Vec<(f64, Vec<f64>)> {
    segments
        .iter()
        .flat_map(|seg| seg.states.iter())
        .map(|s| (s.t, sys.state(&s.y, &s.z).into_values()))
        .collect()
}

fn charts(dir: &Path, prefix: &str, ts: &TimeSeries) -> Result<()> {
    let groups = [
        ("omega", "omega_", "rotor speed (p.u.)"),
        ("delta_coi", "delta_coi_", "rotor angle minus COI angle (rad)"),
        ("v", "v_", "bus voltage amplitude (p.u.)"),
        ("theta_rel", "theta_rel_", "bus phase minus average phase (rad)"),
    ];
    for (file, col, label) in groups {
        let series: Vec<Series> = ts
            .header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.strip_prefix(col).is_some_and(|r| r.chars().all(|c| c.is_ascii_digit())))
            .map(|(c, h)| Series {
                label: h.clone(),
                points: ts.rows.iter().map(|r| (r[0], r[c])).collect(),
            })
            .collect();
        let svg = line_chart(&format!("{prefix}{file}"), "t (s)", label, &series);
        write(&dir.join(format!("{prefix}{file}.svg")), svg)?;
    }
    Ok(())
}

pub struct SimulateReport {
    pub series: TimeSeries,
    /// Index-1 test failures over every computed state.
    pub index1_failures: usize,
    pub states_checked: usize,
    pub out_dir: PathBuf,
}

/// Optional overrides of the scenario's `simulate` section.
#[derive(Clone, Debug, Default)]
pub struct SimulateOptions {
    pub mode: Option<String>,
    pub u: Option<f64>,
    pub duration: Option<f64>,
    pub no_fault: bool,
}

/// Time response from t = 0 to the configured end time, through the fault
/// sequence unless it is disabled.
pub fn simulate(sc: &Scenario, opts: &RunOptions, sim: &SimulateOptions) -> Result<SimulateReport> {
    let sys = system(sc)?;
    let label = sim
        .mode
        .clone()
        .or(sc.simulate.mode.clone())
        .unwrap_or_else(|| sc.initial_mode.clone());
    let mode = sys.mode_id(&label)?;
    let u = sim.u.unwrap_or(sc.simulate.u);
    let end = sim.duration.unwrap_or(sc.simulate.duration);
    let with_fault = sc.simulate.fault && !sim.no_fault;
    if !(end > 0.0) || (with_fault && end <= sc.fault.t_clear) {
        return Err(ScenarioError(format!("simulation end time {end} is too short")).into());
    }

    let mut segments = Vec::new();
    let mut modes = Vec::new();
    let (start, t0) = if with_fault {
        let run = fault_sequence(&sys, &sc.fault, mode, &sc.solver)?;
        for (_, seg) in run.segments {
            segments.push(seg);
            modes.push(None);
        }
        (run.s_init, run.t_init)
    } else {
        let eq = HybridState::new(mode, sys.equilibrium());
        let h = sys.automaton(mode)?;
        (h.restore_consistency(&eq, u, &sc.solver)?, 0.0)
    };
    let dae = sys.dae(mode);
    let state0 = DaeState::new(start.x.y().to_vec(), start.x.z().to_vec(), t0);
    segments.push(dae::simulate(dae.as_ref(), &state0, u, end - t0, &sc.solver)?);
    modes.push(Some(mode));

    let (mut checked, mut failures) = (0, 0);
    for (seg, m) in segments.iter().zip(&modes) {
        // the fault segments run on the faulted network, which the automaton does not carry
        if let Some(m) = m {
            let model = sys.dae(*m);
            for s in &seg.states {
                checked += 1;
                failures += usize::from(!dae::index1_check(model.as_ref(), &s.y, &s.z, u).nonsingular);
            }
        }
    }

    let states = segment_states(&sys, &segments);
    let series = time_series(&sys, states.iter().map(|(t, x)| (*t, x.as_slice())));
    let dir = opts.out_dir(sc)?;
    write_csv(&dir.join("simulate.csv"), &series.header, &series.rows)?;
    charts(&dir, "simulate_", &series)?;
    Ok(SimulateReport {
        series,
        index1_failures: failures,
        states_checked: checked,
        out_dir: dir,
    })
}

/// Everything the planner needs, built from a scenario.
pub struct Study {
    pub sys: PowerSystem,
    pub automaton: HybridAutomaton,
    pub s_init: HybridState,
    pub t_init: f64,
    pub goal: TargetSetSpec,
}

impl Study {
    pub fn new(sc: &Scenario) -> Result<Self> {
        let sys = system(sc)?;
        let initial = sys.mode_id(&sc.initial_mode)?;
        let goal_mode = sys.mode_id(&sc.goal.mode)?;
        let run = fault_sequence(&sys, &sc.fault, initial, &sc.solver)?;
        let automaton = sys.automaton(initial)?;
        let goal = TargetSetSpec {
            omega_tol: sc.goal.omega_tol,
            phase_spread_max: sc.goal.phase_spread_max,
            v_tol: sc.goal.v_tol,
            goal_mode: sys.modes()[goal_mode].clone(),
        };
        Ok(Self {
            sys,
            automaton,
            s_init: run.s_init,
            t_init: run.t_init,
            goal,
        })
    }

    pub fn run(&self, sc: &Scenario, cfg: &PlannerConfig) -> Result<PlannerOutcome> {
        let sampler = search_box(&self.sys, &self.sys.equilibrium());
        let problem = PlanningProblem {
            automaton: &self.automaton,
            distance: DistanceSpec::from_layout(self.sys.layout(), &sampler.excluded()),
            sampler,
            goal: &self.goal,
            feasibility: &sc.constraints,
        };
        Ok(build_tree(&problem, self.s_init.clone(), self.t_init, cfg, &sc.solver)?)
    }

    pub fn extract(&self, sc: &Scenario, out: &PlannerOutcome, node: usize) -> Result<Execution> {
        Ok(extract_execution(&self.automaton, &out.tree, node, sc.planner.dt, &sc.solver)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// A validated execution reaches the goal region.
    Secure,
    /// The budget ran out; nothing is proven either way.
    Undecided,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Secure => "SECURE",
            Verdict::Undecided => "UNDECIDED",
        }
    }
}

pub struct DsaReport {
    pub verdict: Verdict,
    pub outcome: PlannerOutcome,
    pub execution: Option<Execution>,
    pub summary: String,
    pub out_dir: PathBuf,
}

/// Execution check failed after the tree was written. Maps to exit code 5.
#[derive(Debug)]
pub struct InvalidExecution(pub String);

impl std::fmt::Display for InvalidExecution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "extracted execution rejected: {}", self.0)
    }
}

impl std::error::Error for InvalidExecution {}

pub fn planner_config(sc: &Scenario, opts: &RunOptions) -> Result<PlannerConfig> {
    Ok(PlannerConfig {
        k: opts.k.unwrap_or(sc.planner.k),
        dt: sc.planner.dt,
        seed: opts.seed(sc)?,
        stop_on_goal: sc.planner.stop_on_goal,
        threads: opts.threads(),
        check_index1: sc.planner.check_index1,
    })
}

fn metrics_csv(path: &Path, out: &PlannerOutcome) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["iter", "t_step2", "t_step3", "t_step4", "t_step5", "nodes", "sims_total"])?;
    for r in &out.records {
        w.write_record([
            r.iter.to_string(),
            r.t_step2.to_string(),
            r.t_step3.to_string(),
            r.t_step4.to_string(),
            r.t_step5.to_string(),
            r.nodes.to_string(),
            r.sims_total.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn summary_text(
    sc: &Scenario,
    cfg: &PlannerConfig,
    study: &Study,
    out: &PlannerOutcome,
    verdict: Verdict,
    execution: Option<&Execution>,
) -> String {
    let h = &study.automaton;
    let st = &out.stats;
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", sc.name);
    let _ = writeln!(s, "status: {}", verdict.as_str());
    let _ = writeln!(s, "seed: {}", cfg.seed);
    let _ = writeln!(s, "k: {}", cfg.k);
    let _ = writeln!(s, "dt: {}", cfg.dt);
    let _ = writeln!(s, "iterations: {}", st.iterations);
    let _ = writeln!(s, "nodes: {}", out.tree.len());
    let _ = writeln!(s, "expanded: {}", st.expanded);
    let _ = writeln!(s, "sims_total: {}", st.simulations);
    let _ = writeln!(
        s,
        "sims_bound: {} (|Q|={} x |U|={} x |S_N|={})",
        st.simulation_bound,
        h.modes().len(),
        h.inputs().len(),
        st.expanded
    );
    let _ = writeln!(s, "rejected_iterations: {}", st.rejected_iterations);
    let _ = writeln!(s, "infeasible_candidates: {}", st.infeasible_candidates);
    let _ = writeln!(s, "failed_candidates: {}", st.failed_candidates);
    if cfg.check_index1 {
        let _ = writeln!(
            s,
            "index1_checks: {} ({} singular)",
            st.index1_checks, st.index1_checks_failed
        );
    }
    match (out.goal, execution) {
        (Some(g), Some(chi)) => {
            let _ = writeln!(s, "goal_node: {g}");
            let _ = writeln!(s, "depth: {}", out.tree.node(g).depth);
            let _ = writeln!(s, "execution_intervals: {}", chi.len());
            let _ = writeln!(s, "goal_time: {}", out.tree.node(g).t);
        }
        _ => {
            let _ = writeln!(s, "goal_node: none");
        }
    }
    let t = &out.timing;
    let _ = writeln!(
        s,
        "time_s: total {:.3}, step2 {:.3}, step3 {:.3}, step4 {:.3}, step5 {:.3}",
        t.total, t.step2, t.step3, t.step4, t.step5
    );
    s
}

/// Builds the search tree from the post-fault state and writes tree.json,
/// metrics.csv, summary.txt and, when the goal is reached, execution.json.
pub fn dsa(sc: &Scenario, opts: &RunOptions) -> Result<DsaReport> {
    let cfg = planner_config(sc, opts)?;
    let study = Study::new(sc)?;
    let out = study.run(sc, &cfg)?;
    let dir = opts.out_dir(sc)?;
    write(&dir.join("tree.json"), out.tree.to_json())?;
    metrics_csv(&dir.join("metrics.csv"), &out)?;

    let mut execution = None;
    let mut rejection = None;
    if let Some(g) = out.goal {
        let chi = study.extract(sc, &out, g)?;
        let last = chi.last_state().context("empty execution")?;
        match validate_execution(&study.automaton, &chi, sc.solver.algebraic_tol) {
            Err(v) => rejection = Some(v.to_string()),
            Ok(()) if !in_target_set(&last, &study.goal) => {
                rejection = Some("final state is outside the goal region".into())
            }
            Ok(()) => {
                write(&dir.join("execution.json"), chi.to_json())?;
                let states: Vec<(f64, &[f64])> = chi
                    .samples
                    .iter()
                    .flatten()
                    .map(|s| (s.t, s.x.as_slice()))
                    .collect();
                let ts = time_series(&study.sys, states);
                write_csv(&dir.join("execution.csv"), &ts.header, &ts.rows)?;
                charts(&dir, "execution_", &ts)?;
                execution = Some(chi);
            }
        }
    }
    let verdict = if execution.is_some() {
        Verdict::Secure
    } else {
        Verdict::Undecided
    };
    let summary = summary_text(sc, &cfg, &study, &out, verdict, execution.as_ref());
    write(&dir.join("summary.txt"), &summary)?;
    if let Some(reason) = rejection {
        return Err(InvalidExecution(reason).into());
    }
    Ok(DsaReport {
        verdict,
        outcome: out,
        execution,
        summary,
        out_dir: dir,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub k: usize,
    pub total: f64,
    pub step2: f64,
    pub step3: f64,
    pub step4: f64,
    pub step5: f64,
    pub nodes: usize,
    pub expanded: usize,
    pub sims_total: usize,
    pub comparisons: usize,
    pub rejected: usize,
}

/// Full-budget runs per K (goal stopping off), same seed throughout. Each K
/// is repeated `bench.repeats` times and the run with the median total time
/// is reported; the trees are identical across repeats.
pub fn bench(sc: &Scenario, opts: &RunOptions) -> Result<Vec<BenchRow>> {
    let mut cfg = planner_config(sc, opts)?;
    cfg.stop_on_goal = false;
    cfg.check_index1 = false;
    let ks = match opts.k {
        Some(k) => vec![k],
        None => sc.bench.k.clone(),
    };
    let study = Study::new(sc)?;
    let mut rows = Vec::with_capacity(ks.len());
    for k in ks {
        cfg.k = k;
        let mut runs = (0..sc.bench.repeats)
            .map(|_| study.run(sc, &cfg))
            .collect::<Result<Vec<_>>>()?;
        runs.sort_by(|a, b| a.timing.total.total_cmp(&b.timing.total));
        let out = &runs[runs.len() / 2];
        let t = out.timing;
        rows.push(BenchRow {
            k,
            total: t.total,
            step2: t.step2,
            step3: t.step3,
            step4: t.step4,
            step5: t.step5,
            nodes: out.tree.len(),
            expanded: out.stats.expanded,
            sims_total: out.stats.simulations,
            comparisons: out.stats.comparisons,
            rejected: out.stats.rejected_iterations,
        });
    }

    let dir = opts.out_dir(sc)?;
    let path = dir.join("bench.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record([
        "k", "total", "t_step2", "t_step3", "t_step4", "t_step5", "nodes", "expanded",
        "sims_total", "comparisons", "rejected",
    ])?;
    for r in &rows {
        w.write_record([
            r.k.to_string(),
            r.total.to_string(),
            r.step2.to_string(),
            r.step3.to_string(),
            r.step4.to_string(),
            r.step5.to_string(),
            r.nodes.to_string(),
            r.expanded.to_string(),
            r.sims_total.to_string(),
            r.comparisons.to_string(),
            r.rejected.to_string(),
        ])?;
    }
    w.flush()?;
    let pts = |f: fn(&BenchRow) -> f64| rows.iter().map(|r| (r.k as f64, f(r))).collect();
    let series = vec![
        Series { label: "total".into(), points: pts(|r| r.total) },
        Series { label: "step2".into(), points: pts(|r| r.step2) },
        Series { label: "step3".into(), points: pts(|r| r.step3) },
        Series { label: "step4".into(), points: pts(|r| r.step4) },
        Series { label: "step5".into(), points: pts(|r| r.step5) },
    ];
    write(&dir.join("bench.svg"), line_chart("computation time", "K", "time (s)", &series))?;
    Ok(rows)
}
