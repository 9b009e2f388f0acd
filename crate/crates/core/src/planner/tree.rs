use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::hybrid::HybridState;

/// Mode and constant input that produced a node from its parent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeInput {
    pub mode: usize,
    pub u: f64,
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub state: HybridState,
    pub edge: Option<EdgeInput>,
    /// Time at which the node's state is reached.
    pub t: f64,
    pub depth: usize,
}

/// First sample of a candidate segment that lies in the goal region.
#[derive(Clone, Debug)]
pub struct GoalHit {
    pub sample: usize,
    pub t: f64,
    pub state: HybridState,
}

/// One member of `S_P(s)`: the state reached by `(mode, u)` after `Δt`.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub mode: usize,
    pub input_index: usize,
    pub u: f64,
    pub state: HybridState,
    pub t: f64,
    pub goal: Option<GoalHit>,
}

/// Append-only search tree with the per-node expansion cache.
#[derive(Clone, Debug)]
pub struct SearchTree {
    nodes: Vec<TreeNode>,
    cache: HashMap<usize, Arc<[Candidate]>>,
    expanded: BTreeSet<usize>,
    simulations: usize,
}

impl SearchTree {
    pub fn new(root: HybridState, t0: f64) -> Self {
        Self {
            nodes: vec![TreeNode {
                id: 0,
                parent: None,
                state: root,
                edge: None,
                t: t0,
                depth: 0,
            }],
            cache: HashMap::new(),
            expanded: BTreeSet::new(),
            simulations: 0,
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `S_N`
    pub fn expanded(&self) -> &BTreeSet<usize> {
        &self.expanded
    }

    pub fn cached(&self, id: usize) -> Option<Arc<[Candidate]>> {
        self.cache.get(&id).cloned()
    }

    /// Simulator invocations so far, one per `(mode, input)` attempt.
    pub fn simulations(&self) -> usize {
        self.simulations
    }

    pub(crate) fn record_expansion(&mut self, id: usize, candidates: Arc<[Candidate]>, sims: usize) {
        self.cache.insert(id, candidates);
        self.expanded.insert(id);
        self.simulations += sims;
    }

    pub fn add_node(&mut self, parent: usize, state: HybridState, edge: EdgeInput, t: f64) -> usize {
        let id = self.nodes.len();
        let depth = self.nodes[parent].depth + 1;
        self.nodes.push(TreeNode {
            id,
            parent: Some(parent),
            state,
            edge: Some(edge),
            t,
            depth,
        });
        id
    }

    /// Node ids from the root to `id`.
    pub fn path(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// `{"nodes": [{id, parent, mode, input, t, x}]}`
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct NodeDoc<'a> {
            id: usize,
            parent: Option<usize>,
            mode: usize,
            input: Option<EdgeInput>,
            t: f64,
            x: &'a [f64],
        }
        #[derive(Serialize)]
        struct TreeDoc<'a> {
            nodes: Vec<NodeDoc<'a>>,
        }
        let doc = TreeDoc {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    id: n.id,
                    parent: n.parent,
                    mode: n.state.mode,
                    input: n.edge,
                    t: n.t,
                    x: n.state.x.values(),
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("tree serializes")
    }
}
