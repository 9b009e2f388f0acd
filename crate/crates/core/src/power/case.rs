use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PowerError;

/// Shunt susceptance used for a bolted fault, p.u.
pub const FAULT_SUSCEPTANCE: f64 = -1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusKind {
    #[serde(rename = "slack")]
    Slack,
    #[serde(rename = "PV")]
    Pv,
    #[serde(rename = "PQ")]
    Pq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    #[serde(default)]
    pub p_load: f64,
    #[serde(default)]
    pub q_load: f64,
    /// Shunt conductance and susceptance, p.u.
    #[serde(default)]
    pub gs: f64,
    #[serde(default)]
    pub bs: f64,
    #[serde(default)]
    pub p_gen: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_setpoint: Option<f64>,
    /// Warm-start amplitude and phase.
    #[serde(default = "one")]
    pub v: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vmin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vmax: Option<f64>,
    /// Fault shunt susceptance when a fault is applied at this bus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineKind {
    #[default]
    Line,
    Transformer,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineStatus {
    #[default]
    Closed,
    Open,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub id: String,
    pub from: u32,
    pub to: u32,
    #[serde(default)]
    pub r: f64,
    pub x: f64,
    /// Total line-charging susceptance.
    #[serde(default)]
    pub b: f64,
    /// Off-nominal ratio on the `from` side.
    #[serde(default = "one")]
    pub tap: f64,
    #[serde(default)]
    pub kind: LineKind,
    #[serde(default)]
    pub status: LineStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub id: u32,
    pub bus: u32,
    /// Inertia constant, s.
    pub h: f64,
    #[serde(default)]
    pub d: f64,
    pub xd_p: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    /// Lines switched open in this mode, on top of their base status.
    #[serde(default)]
    pub open: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    /// Generator id receiving the additive mechanical-power input.
    pub target: u32,
    pub inputs: Vec<f64>,
}

/// Voltage dependence of bus loads during transients. The power flow
/// always treats loads as constant power.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadModel {
    #[default]
    ConstantPower,
    /// Admittance fixed at the power-flow operating point.
    ConstantImpedance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSystemCase {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source: String,
    pub base_mva: f64,
    pub freq_hz: f64,
    #[serde(default)]
    pub load_model: LoadModel,
    /// Constant-power loads become constant impedance below this amplitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_vmin: Option<f64>,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    pub modes: BTreeMap<String, ModeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlSpec>,
}

impl PowerSystemCase {
    pub fn from_json(text: &str) -> Result<Self, PowerError> {
        let case: Self = serde_json::from_str(text).map_err(|e| PowerError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        case.validate()?;
        Ok(case)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serializes")
    }

    /// Nominal angular frequency ω_s, rad/s.
    pub fn omega_s(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.freq_hz
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn generator_index(&self, id: u32) -> Option<usize> {
        self.generators.iter().position(|g| g.id == id)
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated case has a slack bus")
    }

    pub fn line(&self, id: &str) -> Option<&Line> {
        self.lines.iter().find(|l| l.id == id)
    }

    /// Mode labels in sorted order; position is the discrete mode id.
    pub fn mode_labels(&self) -> Vec<String> {
        self.modes.keys().cloned().collect()
    }

    /// Whether `line` conducts in `mode`.
    pub fn line_closed(&self, line: &Line, mode: &str) -> Result<bool, PowerError> {
        let spec = self
            .modes
            .get(mode)
            .ok_or_else(|| PowerError::UnknownMode(mode.to_string()))?;
        Ok(line.status == LineStatus::Closed && !spec.open.contains(&line.id))
    }

    pub fn generator_at(&self, bus_id: u32) -> Option<&Generator> {
        self.generators.iter().find(|g| g.bus == bus_id)
    }

    pub fn validate(&self) -> Result<(), PowerError> {
        let invalid = |msg: String| Err(PowerError::Validation(msg));
        if !(self.base_mva > 0.0) || !(self.freq_hz > 0.0) {
            return invalid("base_mva and freq_hz must be positive".into());
        }
        if self.buses.is_empty() {
            return invalid("case has no buses".into());
        }
        let mut ids = HashSet::new();
        for b in &self.buses {
            if !ids.insert(b.id) {
                return invalid(format!("duplicate bus id {}", b.id));
            }
            if !(b.v > 0.0) {
                return invalid(format!("bus {}: v must be positive", b.id));
            }
            if b.kind != BusKind::Pq && !b.v_setpoint.is_some_and(|v| v > 0.0) {
                return invalid(format!("bus {}: positive v_setpoint required", b.id));
            }
            if let (Some(lo), Some(hi)) = (b.vmin, b.vmax) {
                if !(lo < hi) {
                    return invalid(format!("bus {}: vmin must be below vmax", b.id));
                }
            }
        }
        let slacks = self.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slacks != 1 {
            return invalid(format!("exactly one slack bus required, found {slacks}"));
        }

        let mut line_ids = HashSet::new();
        for l in &self.lines {
            if !line_ids.insert(l.id.as_str()) {
                return invalid(format!("duplicate line id {}", l.id));
            }
            if l.from == l.to {
                return invalid(format!("line {} connects bus {} to itself", l.id, l.from));
            }
            for end in [l.from, l.to] {
                if !ids.contains(&end) {
                    return invalid(format!("line {} references unknown bus {end}", l.id));
                }
            }
            if l.x == 0.0 || !l.x.is_finite() {
                return invalid(format!("line {}: x must be non-zero", l.id));
            }
            if !(l.tap > 0.0) {
                return invalid(format!("line {}: tap must be positive", l.id));
            }
        }

        let mut gen_ids = HashSet::new();
        let mut gen_buses: HashMap<u32, u32> = HashMap::new();
        for g in &self.generators {
            if !gen_ids.insert(g.id) {
                return invalid(format!("duplicate generator id {}", g.id));
            }
            let Some(bus) = self.buses.iter().find(|b| b.id == g.bus) else {
                return invalid(format!("generator {} on unknown bus {}", g.id, g.bus));
            };
            if bus.kind == BusKind::Pq {
                return invalid(format!("generator {} sits on PQ bus {}", g.id, g.bus));
            }
            if let Some(other) = gen_buses.insert(g.bus, g.id) {
                return invalid(format!("generators {other} and {} share bus {}", g.id, g.bus));
            }
            if !(g.h > 0.0) || !(g.xd_p > 0.0) || g.d < 0.0 {
                return invalid(format!("generator {}: need h > 0, xd_p > 0, d >= 0", g.id));
            }
        }

        if self.modes.is_empty() {
            return invalid("at least one mode required".into());
        }
        for (label, spec) in &self.modes {
            for id in &spec.open {
                if !line_ids.contains(id.as_str()) {
                    return invalid(format!("mode {label} opens unknown line {id}"));
                }
            }
        }
        if let Some(c) = &self.control {
            if !gen_ids.contains(&c.target) {
                return invalid(format!("control target {} is not a generator", c.target));
            }
            if c.inputs.is_empty() || c.inputs.iter().any(|u| !u.is_finite()) {
                return invalid("control inputs must be finite and non-empty".into());
            }
        }
        if let Some(v) = self.load_vmin {
            if !(v > 0.0 && v < 1.0) {
                return invalid(format!("load_vmin must lie in (0, 1), got {v}"));
            }
        }
        Ok(())
    }
}

pub fn load_case(path: impl AsRef<Path>) -> Result<PowerSystemCase, PowerError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| PowerError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    PowerSystemCase::from_json(&text)
}

pub fn save_case(case: &PowerSystemCase, path: impl AsRef<Path>) -> Result<(), PowerError> {
    let path = path.as_ref();
    fs::write(path, case.to_json() + "\n").map_err(|e| PowerError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Places a high-admittance shunt at `bus_id`.
pub fn apply_fault(case: &PowerSystemCase, bus_id: u32) -> Result<PowerSystemCase, PowerError> {
    let k = case.bus_index(bus_id).ok_or(PowerError::UnknownBus(bus_id))?;
    let mut out = case.clone();
    out.buses[k].fault = Some(FAULT_SUSCEPTANCE);
    Ok(out)
}

pub fn clear_fault(case: &PowerSystemCase) -> PowerSystemCase {
    let mut out = case.clone();
    for b in &mut out.buses {
        b.fault = None;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = r#"{
        "name": "t", "base_mva": 100, "freq_hz": 60,
        "buses": [
            {"id": 1, "kind": "slack", "v_setpoint": 1.0},
            {"id": 2, "kind": "PQ", "p_load": 0.5}
        ],
        "lines": [{"id": "L", "from": 1, "to": 2, "x": 0.2}],
        "modes": {"base": {}}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = PowerSystemCase::from_json(TWO_BUS).unwrap();
        assert_eq!(c.lines[0].tap, 1.0);
        assert_eq!(c.lines[0].status, LineStatus::Closed);
        assert_eq!(c.buses[1].v, 1.0);
        assert_eq!(c.slack_index(), 0);
    }

    #[test]
    fn two_slacks_rejected() {
        let text = TWO_BUS.replace("\"PQ\", \"p_load\": 0.5", "\"slack\", \"v_setpoint\": 1.0");
        let err = PowerSystemCase::from_json(&text).unwrap_err();
        assert!(matches!(err, PowerError::Validation(ref m) if m.contains("slack")), "{err}");
    }

    #[test]
    fn parse_error_has_position() {
        let err = PowerSystemCase::from_json("{\n  \"name\": 3\n}").unwrap_err();
        match err {
            PowerError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        let text = TWO_BUS.replace("\"x\": 0.2", "\"x\": 0.2, \"rating\": 3");
        assert!(matches!(
            PowerSystemCase::from_json(&text),
            Err(PowerError::Parse { .. })
        ));
    }

    #[test]
    fn fault_round_trip() {
        let c = PowerSystemCase::from_json(TWO_BUS).unwrap();
        let f = apply_fault(&c, 2).unwrap();
        assert_eq!(f.buses[1].fault, Some(FAULT_SUSCEPTANCE));
        assert_eq!(clear_fault(&f), c);
        assert!(matches!(apply_fault(&c, 9), Err(PowerError::UnknownBus(9))));
    }

    #[test]
    fn mode_switching() {
        let mut c = PowerSystemCase::from_json(TWO_BUS).unwrap();
        c.modes.insert("cut".into(), ModeSpec { open: vec!["L".into()] });
        let l = c.lines[0].clone();
        assert!(c.line_closed(&l, "base").unwrap());
        assert!(!c.line_closed(&l, "cut").unwrap());
        assert!(c.line_closed(&l, "nope").is_err());
    }
}
