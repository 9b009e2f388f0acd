use std::fmt;
use std::ops::Index;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::HybridError;

/// A discrete mode of a hybrid automaton. Ids are dense `0..|Q|`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscreteMode {
    pub id: usize,
    pub label: String,
}

impl DiscreteMode {
    pub fn new(id: usize, label: impl Into<String>) -> Self {
        Self {
            id,
            label: label.into(),
        }
    }
}

impl fmt::Display for DiscreteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.label, self.id)
    }
}

/// Physical meaning of a group of continuous variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    RotorAngle,
    RotorSpeed,
    BusPhase,
    BusMagnitude,
    Other,
}

impl VarKind {
    /// Angle-like variables live on the circle and are compared modulo 2π.
    pub fn is_circular(self) -> bool {
        matches!(self, VarKind::RotorAngle | VarKind::BusPhase)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarGroup {
    pub name: String,
    pub kind: VarKind,
    pub indices: Vec<usize>,
}

/// Describes how a continuous vector is organised.
///
/// The vector is always laid out as `[y; z; fixed]`: the differential
/// variables of the mode's DAE, then its algebraic variables, then values
/// that are held constant by every mode (reference quantities such as the
/// voltage of an infinite bus). Named groups map variables to indices
/// independently of that split; every index belongs to exactly one group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateLayout {
    pub n_y: usize,
    pub n_z: usize,
    pub n_fixed: usize,
    pub groups: Vec<VarGroup>,
}

impl StateLayout {
    pub fn new(
        n_y: usize,
        n_z: usize,
        n_fixed: usize,
        groups: Vec<VarGroup>,
    ) -> Result<Self, HybridError> {
        let layout = Self {
            n_y,
            n_z,
            n_fixed,
            groups,
        };
        layout.check()?;
        Ok(layout)
    }

    /// A layout with a single `Other` group covering `[y; z]`.
    pub fn plain(n_y: usize, n_z: usize) -> Self {
        Self {
            n_y,
            n_z,
            n_fixed: 0,
            groups: vec![VarGroup {
                name: "x".into(),
                kind: VarKind::Other,
                indices: (0..n_y + n_z).collect(),
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.n_y + self.n_z + self.n_fixed
    }

    fn check(&self) -> Result<(), HybridError> {
        let mut seen = vec![false; self.dim()];
        for g in &self.groups {
            for &i in &g.indices {
                match seen.get_mut(i) {
                    None => {
                        return Err(HybridError::Layout(format!(
                            "group {} index {i} out of range {}",
                            g.name,
                            self.dim()
                        )))
                    }
                    Some(true) => {
                        return Err(HybridError::Layout(format!(
                            "index {i} claimed twice (group {})",
                            g.name
                        )))
                    }
                    Some(s) => *s = true,
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(HybridError::Layout(format!("index {i} belongs to no group")));
        }
        Ok(())
    }

    pub fn group(&self, kind: VarKind) -> Option<&VarGroup> {
        self.groups.iter().find(|g| g.kind == kind)
    }

    /// Indices of a kind, empty when the layout has no such group.
    pub fn indices(&self, kind: VarKind) -> &[usize] {
        self.group(kind).map(|g| g.indices.as_slice()).unwrap_or(&[])
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        i >= self.n_y + self.n_z
    }

    pub fn is_algebraic(&self, i: usize) -> bool {
        i >= self.n_y && i < self.n_y + self.n_z
    }

    pub fn kind_of(&self, i: usize) -> Option<VarKind> {
        self.groups
            .iter()
            .find(|g| g.indices.contains(&i))
            .map(|g| g.kind)
    }
}

/// A point of the continuous state space `X ⊆ ℝⁿ`.
#[derive(Clone, Debug)]
pub struct ContinuousState {
    values: Vec<f64>,
    layout: Arc<StateLayout>,
}

impl ContinuousState {
    pub fn new(values: Vec<f64>, layout: Arc<StateLayout>) -> Result<Self, HybridError> {
        if values.len() != layout.dim() {
            return Err(HybridError::Dimension {
                expected: layout.dim(),
                got: values.len(),
            });
        }
        Ok(Self { values, layout })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> &Arc<StateLayout> {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.values[..self.layout.n_y]
    }

    pub fn z(&self) -> &[f64] {
        &self.values[self.layout.n_y..self.layout.n_y + self.layout.n_z]
    }

    pub fn fixed(&self) -> &[f64] {
        &self.values[self.layout.n_y + self.layout.n_z..]
    }

    /// Replace the algebraic block, keeping `y` and the fixed part.
    pub fn with_z(&self, z: &[f64]) -> Self {
        let mut out = self.clone();
        let (a, b) = (self.layout.n_y, self.layout.n_y + self.layout.n_z);
        out.values[a..b].copy_from_slice(z);
        out
    }

    /// Replace `y` and `z` together, keeping the fixed part.
    pub fn with_yz(&self, y: &[f64], z: &[f64]) -> Self {
        let mut out = self.clone();
        let n_y = self.layout.n_y;
        out.values[..n_y].copy_from_slice(y);
        out.values[n_y..n_y + z.len()].copy_from_slice(z);
        out
    }

    pub fn select(&self, kind: VarKind) -> Vec<f64> {
        self.layout
            .indices(kind)
            .iter()
            .map(|&i| self.values[i])
            .collect()
    }
}

impl Index<usize> for ContinuousState {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl PartialEq for ContinuousState {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values && self.layout == other.layout
    }
}

/// The pair `(q, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridState {
    pub mode: usize,
    pub x: ContinuousState,
}

impl HybridState {
    pub fn new(mode: usize, x: ContinuousState) -> Self {
        Self { mode, x }
    }

    /// Bitwise equality of the continuous parts plus mode equality.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.mode == other.mode
            && self.x.dim() == other.x.dim()
            && self
                .x
                .values()
                .iter()
                .zip(other.x.values())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_rejects_double_claim_and_gaps() {
        let g = |name: &str, idx: Vec<usize>| VarGroup {
            name: name.into(),
            kind: VarKind::Other,
            indices: idx,
        };
        assert!(StateLayout::new(1, 1, 0, vec![g("a", vec![0]), g("b", vec![1])]).is_ok());
        assert!(StateLayout::new(1, 1, 0, vec![g("a", vec![0, 1]), g("b", vec![1])]).is_err());
        assert!(StateLayout::new(1, 1, 0, vec![g("a", vec![0])]).is_err());
        assert!(StateLayout::new(1, 1, 0, vec![g("a", vec![0, 1, 2])]).is_err());
    }

    #[test]
    fn state_dimension_checked() {
        let layout = Arc::new(StateLayout::plain(1, 2));
        assert!(ContinuousState::new(vec![0.0; 3], layout.clone()).is_ok());
        assert!(matches!(
            ContinuousState::new(vec![0.0; 2], layout),
            Err(HybridError::Dimension {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn blocks_split_by_layout() {
        let layout = Arc::new(StateLayout {
            n_y: 1,
            n_z: 2,
            n_fixed: 1,
            groups: vec![VarGroup {
                name: "x".into(),
                kind: VarKind::Other,
                indices: vec![0, 1, 2, 3],
            }],
        });
        let x = ContinuousState::new(vec![1.0, 2.0, 3.0, 4.0], layout).unwrap();
        assert_eq!(x.y(), &[1.0]);
        assert_eq!(x.z(), &[2.0, 3.0]);
        assert_eq!(x.fixed(), &[4.0]);
        assert_eq!(x.with_z(&[7.0, 8.0]).values(), &[1.0, 7.0, 8.0, 4.0]);
    }
}
