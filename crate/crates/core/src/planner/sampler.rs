use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hybrid::{ContinuousState, DiscreteMode, HybridState, VarKind};
use crate::power::PowerSystem;

/// Two independent ChaCha8 streams derived from one seed: stream 0 draws
/// modes, stream 1 draws continuous values.
#[derive(Clone, Debug)]
pub struct PlannerRng {
    modes: ChaCha8Rng,
    values: ChaCha8Rng,
}

impl PlannerRng {
    pub fn new(seed: u64) -> Self {
        let mut modes = ChaCha8Rng::seed_from_u64(seed);
        modes.set_stream(0);
        let mut values = ChaCha8Rng::seed_from_u64(seed);
        values.set_stream(1);
        Self { modes, values }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum RangeClass {
    /// `(−π, π]`
    Circular,
    Bounded { lo: f64, hi: f64 },
    /// `x* ± 0.1·|x*|`
    Relative { lo: f64, hi: f64 },
    /// Held at the equilibrium value and never measured.
    Excluded { value: f64 },
}

impl RangeClass {
    pub fn relative(center: f64) -> Self {
        let half = 0.1 * center.abs();
        Self::Relative {
            lo: center - half,
            hi: center + half,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SamplerSpec {
    pub modes: Vec<DiscreteMode>,
    pub classes: Vec<RangeClass>,
    /// Template carrying the layout of sampled states.
    pub template: ContinuousState,
}

impl SamplerSpec {
    /// Classifies every index of `equilibrium`: fixed variables are
    /// excluded, angles circular, variables with declared bounds bounded
    /// and everything else relative to its equilibrium value.
    pub fn from_equilibrium(
        modes: Vec<DiscreteMode>,
        equilibrium: &ContinuousState,
        bounds: impl Fn(usize) -> Option<(f64, f64)>,
    ) -> Self {
        let layout = equilibrium.layout();
        let classes = (0..equilibrium.dim())
            .map(|i| {
                let x = equilibrium[i];
                if layout.is_fixed(i) {
                    RangeClass::Excluded { value: x }
                } else if layout.kind_of(i).is_some_and(VarKind::is_circular) {
                    RangeClass::Circular
                } else if let Some((lo, hi)) = bounds(i) {
                    RangeClass::Bounded { lo, hi }
                } else {
                    RangeClass::relative(x)
                }
            })
            .collect();
        Self {
            modes,
            classes,
            template: equilibrium.clone(),
        }
    }

    pub fn excluded(&self) -> Vec<usize> {
        (0..self.classes.len())
            .filter(|&i| matches!(self.classes[i], RangeClass::Excluded { .. }))
            .collect()
    }
}

/// Search box of a power system around its equilibrium; amplitude bounds
/// come from the bus data.
pub fn search_box(sys: &PowerSystem, equilibrium: &ContinuousState) -> SamplerSpec {
    let magnitudes = sys.layout().indices(VarKind::BusMagnitude).to_vec();
    SamplerSpec::from_equilibrium(sys.modes().to_vec(), equilibrium, |i| {
        magnitudes
            .iter()
            .position(|&m| m == i)
            .and_then(|bus| sys.voltage_bounds(bus))
    })
}

pub fn sample_state(spec: &SamplerSpec, rng: &mut PlannerRng) -> HybridState {
    let mode = spec.modes[rng.modes.random_range(0..spec.modes.len())].id;
    let mut x = spec.template.clone();
    for (v, class) in x.values_mut().iter_mut().zip(&spec.classes) {
        *v = match *class {
            // 1 − U[0,1) lies in (0, 1], so the range is (−π, π]
            RangeClass::Circular => PI - 2.0 * PI * rng.values.random::<f64>(),
            RangeClass::Bounded { lo, hi } | RangeClass::Relative { lo, hi } => {
                lo + (hi - lo) * rng.values.random::<f64>()
            }
            RangeClass::Excluded { value } => value,
        };
    }
    HybridState::new(mode, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hybrid::{StateLayout, VarGroup};
    use std::sync::Arc;

    fn spec() -> SamplerSpec {
        let g = |name: &str, kind, idx: Vec<usize>| VarGroup {
            name: name.into(),
            kind,
            indices: idx,
        };
        let layout = Arc::new(
            StateLayout::new(
                2,
                1,
                1,
                vec![
                    g("delta", VarKind::RotorAngle, vec![0]),
                    g("omega", VarKind::RotorSpeed, vec![1]),
                    g("v", VarKind::BusMagnitude, vec![2]),
                    g("ref", VarKind::Other, vec![3]),
                ],
            )
            .unwrap(),
        );
        let eq = ContinuousState::new(vec![0.3, 2.0, 1.0, 7.0], layout).unwrap();
        SamplerSpec::from_equilibrium(
            vec![DiscreteMode::new(0, "q1"), DiscreteMode::new(1, "q2")],
            &eq,
            |i| (i == 2).then_some((0.8, 1.2)),
        )
    }

    #[test]
    fn classification() {
        let s = spec();
        assert_eq!(s.classes[0], RangeClass::Circular);
        assert_eq!(s.classes[1], RangeClass::Relative { lo: 1.8, hi: 2.2 });
        assert_eq!(s.classes[2], RangeClass::Bounded { lo: 0.8, hi: 1.2 });
        assert_eq!(s.classes[3], RangeClass::Excluded { value: 7.0 });
        assert_eq!(s.excluded(), vec![3]);
    }

    #[test]
    fn samples_respect_ranges() {
        let s = spec();
        let mut rng = PlannerRng::new(11);
        for _ in 0..20_000 {
            let h = sample_state(&s, &mut rng);
            let x = h.x.values();
            assert!(x[0] > -PI && x[0] <= PI);
            assert!((1.8..=2.2).contains(&x[1]));
            assert!((0.8..=1.2).contains(&x[2]));
            assert_eq!(x[3], 7.0);
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let s = spec();
        let (mut a, mut b) = (PlannerRng::new(5), PlannerRng::new(5));
        for _ in 0..100 {
            assert!(sample_state(&s, &mut a).bitwise_eq(&sample_state(&s, &mut b)));
        }
    }
}
