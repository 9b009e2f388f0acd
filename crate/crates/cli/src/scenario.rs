use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use dsa_core::dae::SolverConfig;
use dsa_core::power::{FaultEvent, OperatingLimits, PowerFlowConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// A scenario that cannot be used as written. Maps to exit code 3.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError(pub String);

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    /// Case file, relative to the scenario file.
    pub case: PathBuf,
    /// Topology of the pre-fault equilibrium.
    pub base_mode: String,
    /// Mode entered when the fault clears.
    pub initial_mode: String,
    pub fault: FaultEvent,
    pub planner: PlannerSection,
    pub goal: GoalSection,
    #[serde(default)]
    pub constraints: OperatingLimits,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub powerflow: PowerFlowConfig,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub bench: BenchSection,
    /// Output directory, relative to the working directory.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSection {
    pub k: usize,
    pub dt: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "yes")]
    pub stop_on_goal: bool,
    #[serde(default = "yes")]
    pub check_index1: bool,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSection {
    pub mode: String,
    #[serde(default = "omega_tol")]
    pub omega_tol: f64,
    #[serde(default = "phase_spread_max")]
    pub phase_spread_max: f64,
    #[serde(default = "v_tol")]
    pub v_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Defaults to the initial mode.
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub u: f64,
    /// End time in seconds, counted from t = 0.
    pub duration: f64,
    /// Run the fault sequence first; otherwise start at the equilibrium.
    #[serde(default = "yes")]
    pub fault: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            mode: None,
            u: 0.0,
            duration: 10.0,
            fault: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub k: Vec<usize>,
    /// Timed runs per K; the median is reported.
    #[serde(default = "repeats")]
    pub repeats: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            k: (1..=10).map(|i| 100 * i).collect(),
            repeats: repeats(),
        }
    }
}

fn repeats() -> usize {
    5
}

fn yes() -> bool {
    true
}

fn omega_tol() -> f64 {
    0.01
}

fn phase_spread_max() -> f64 {
    std::f64::consts::FRAC_PI_6
}

fn v_tol() -> f64 {
    0.2
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        // check the version before the shape so old files fail with a clear message
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ScenarioError(format!("scenario: {e}")))?;
        match raw.get("schema").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(ScenarioError(format!(
                    "scenario schema {v} is not supported (expected {SCHEMA_VERSION})"
                )))
            }
            None => return Err(ScenarioError("scenario has no numeric \"schema\" field".into())),
        }
        let s: Scenario =
            serde_json::from_value(raw).map_err(|e| ScenarioError(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    /// Reads a scenario and makes its case path absolute.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError(format!("cannot read {}: {e}", path.display())))?;
        let mut s = Self::from_json(&text)?;
        if s.case.is_relative() {
            let dir = path.parent().unwrap_or(Path::new("."));
            s.case = dir.join(&s.case);
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError(m));
        if self.fault.validate().is_err() {
            return bad(format!(
                "fault needs 0 <= t_on < t_clear, got {} and {}",
                self.fault.t_on, self.fault.t_clear
            ));
        }
        if !(self.planner.dt > 0.0 && self.planner.dt.is_finite()) {
            return bad(format!("planner.dt must be > 0, got {}", self.planner.dt));
        }
        let g = &self.goal;
        if !(g.omega_tol > 0.0 && g.phase_spread_max > 0.0 && g.v_tol > 0.0) {
            return bad("goal tolerances must be positive".into());
        }
        if !(self.simulate.duration > 0.0 && self.simulate.duration.is_finite()) {
            return bad("simulate.duration must be > 0".into());
        }
        if self.simulate.fault && self.simulate.duration <= self.fault.t_clear {
            return bad("simulate.duration must extend past the fault clearing time".into());
        }
        if self.bench.k.is_empty() {
            return bad("bench.k must list at least one budget".into());
        }
        if self.bench.repeats == 0 {
            return bad("bench.repeats must be >= 1".into());
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&self.name))
    }
}
