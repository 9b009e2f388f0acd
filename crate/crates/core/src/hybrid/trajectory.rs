use std::fmt;

use serde::{Deserialize, Serialize};

/// Finite hybrid time trajectory `{[τᵢ, τ'ᵢ]}`, all intervals closed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HybridTimeTrajectory {
    pub intervals: Vec<(f64, f64)>,
}

impl HybridTimeTrajectory {
    pub fn new(intervals: Vec<(f64, f64)>) -> Self {
        Self { intervals }
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn start(&self) -> Option<f64> {
        self.intervals.first().map(|i| i.0)
    }

    pub fn end(&self) -> Option<f64> {
        self.intervals.last().map(|i| i.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrajectoryViolation {
    Empty,
    NonFinite { index: usize },
    /// `τᵢ > τ'ᵢ`
    Reversed { index: usize },
    /// `τ'ᵢ ≠ τᵢ₊₁`
    Gap { index: usize },
}

impl fmt::Display for TrajectoryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "empty trajectory"),
            Self::NonFinite { index } => write!(f, "interval {index} has a non-finite bound"),
            Self::Reversed { index } => write!(f, "interval {index} ends before it starts"),
            Self::Gap { index } => {
                write!(f, "interval {index} does not end where interval {} starts", index + 1)
            }
        }
    }
}

/// Checks the interval conditions in order and reports the first failure.
pub fn validate_trajectory(tau: &HybridTimeTrajectory) -> Result<(), TrajectoryViolation> {
    if tau.is_empty() {
        return Err(TrajectoryViolation::Empty);
    }
    for (i, &(a, b)) in tau.intervals.iter().enumerate() {
        if !(a.is_finite() && b.is_finite()) {
            return Err(TrajectoryViolation::NonFinite { index: i });
        }
        if a > b {
            return Err(TrajectoryViolation::Reversed { index: i });
        }
        if let Some(&(next, _)) = tau.intervals.get(i + 1) {
            if b != next {
                return Err(TrajectoryViolation::Gap { index: i });
            }
        }
    }
    Ok(())
}
