use super::search::simulate_edge;
use super::tree::SearchTree;
use super::PlannerError;
use crate::dae::SolverConfig;
use crate::hybrid::{ControlInput, Execution, HybridAutomaton, HybridState, Sample};

fn sample(t: f64, s: &HybridState) -> Sample {
    Sample {
        t,
        x: s.x.values().to_vec(),
    }
}

/// Rebuilds the execution from the root to `node` by re-simulating every
/// edge on the path. Each replayed end state must match the stored node
/// bit for bit.
pub fn extract_execution(
    automaton: &HybridAutomaton,
    tree: &SearchTree,
    node: usize,
    dt: f64,
    solver: &SolverConfig,
) -> Result<Execution, PlannerError> {
    let path = tree.path(node);
    let root = tree.root();
    let mut chi = Execution::new(automaton.layout().clone());
    chi.push_interval(
        (root.t, root.t),
        root.state.mode,
        ControlInput::Discrete(root.state.mode),
        vec![sample(root.t, &root.state)],
    );

    for pair in path.windows(2) {
        let (parent, child) = (tree.node(pair[0]), tree.node(pair[1]));
        let edge = child.edge.expect("non-root node has an edge");
        let run = simulate_edge(automaton, &parent.state, parent.t, edge.mode, edge.u, dt, solver)
            .map_err(|reason| PlannerError::Replay {
                node: child.id,
                reason,
            })?;
        if run.switched {
            chi.push_interval(
                (parent.t, parent.t),
                edge.mode,
                ControlInput::Discrete(edge.mode),
                vec![sample(parent.t, &run.start)],
            );
        }
        let k = run
            .times
            .iter()
            .position(|&t| t.to_bits() == child.t.to_bits())
            .ok_or_else(|| PlannerError::Replay {
                node: child.id,
                reason: format!("no replayed sample at t = {}", child.t),
            })?;
        let reached = if k == 0 { &run.start } else { &run.states[k] };
        if !reached.bitwise_eq(&child.state) {
            return Err(PlannerError::Replay {
                node: child.id,
                reason: "replayed state differs from the stored node".into(),
            });
        }
        if k > 0 {
            let samples = run.times[..=k]
                .iter()
                .zip(&run.states)
                .map(|(&t, s)| sample(t, s))
                .collect();
            chi.push_interval(
                (parent.t, child.t),
                edge.mode,
                ControlInput::Continuous(edge.u),
                samples,
            );
        }
    }
    Ok(chi)
}
