//! Batch front-end: scenario files in, CSV/JSON/SVG artifacts out.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod commands;
pub mod scenario;

use dsa_core::dae::DaeError;
use dsa_core::hybrid::HybridError;
use dsa_core::planner::PlannerError;
use dsa_core::power::PowerError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_POWERFLOW: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

fn power_code(e: &PowerError) -> i32 {
    match e {
        PowerError::PowerFlowDivergence { .. } => EXIT_POWERFLOW,
        PowerError::Solver(_) => EXIT_SOLVER,
        PowerError::Hybrid(_) => EXIT_INTERNAL,
        _ => EXIT_PARSE,
    }
}

/// Exit code for a failed command, from the first classified error in the chain.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<scenario::ScenarioError>() || cause.is::<serde_json::Error>() {
            return EXIT_PARSE;
        }
        if let Some(e) = cause.downcast_ref::<PowerError>() {
            return power_code(e);
        }
        if cause.is::<DaeError>() {
            return EXIT_SOLVER;
        }
        if let Some(e) = cause.downcast_ref::<PlannerError>() {
            return match e {
                PlannerError::InvalidConfig(_) => EXIT_PARSE,
                PlannerError::Solver(_) => EXIT_SOLVER,
                _ => EXIT_INTERNAL,
            };
        }
        if cause.is::<HybridError>() || cause.is::<commands::InvalidExecution>() {
            return EXIT_INTERNAL;
        }
    }
    EXIT_INTERNAL
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_error_class() {
        let pf = anyhow::Error::from(PowerError::PowerFlowDivergence {
            iterations: 20,
            mismatch: 1.0,
        });
        assert_eq!(exit_code(&pf), EXIT_POWERFLOW);
        let parse = anyhow::Error::from(PowerError::Parse {
            line: 1,
            column: 2,
            message: "x".into(),
        });
        assert_eq!(exit_code(&parse), EXIT_PARSE);
        let solver = anyhow::Error::from(DaeError::SingularJacobian).context("simulating");
        assert_eq!(exit_code(&solver), EXIT_SOLVER);
        let io = anyhow::anyhow!("disk full");
        assert_eq!(exit_code(&io), EXIT_INTERNAL);
        let seed = anyhow::Error::from(scenario::ScenarioError("no seed".into()));
        assert_eq!(exit_code(&seed), EXIT_PARSE);
    }
}
