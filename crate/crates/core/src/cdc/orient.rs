//! Edge orientation from precedence plus unshielded colliders.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ranks;
use super::skeleton::CausalSkeleton;
use crate::graph::{topological_order, Edge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientationReason {
    Temporal,
    Collider,
    /// Endpoints share a precedence rank; direction taken from context order.
    ContextFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientedGraph {
    pub nodes: usize,
    pub edges: BTreeSet<Edge>,
    pub reasons: BTreeMap<Edge, OrientationReason>,
    /// Collider orientations overruled by precedence.
    pub conflicts: Vec<String>,
}

impl OrientedGraph {
    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.1 == v).map(|e| e.0).collect()
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.0 == v).map(|e| e.1).collect()
    }

    pub fn is_acyclic(&self) -> bool {
        topological_order(self.nodes, &self.edges).is_some()
    }

    pub fn to_dot(&self, labels: &[String]) -> String {
        let mut out = String::from("digraph cdc {\n");
        for (i, l) in labels.iter().enumerate().take(self.nodes) {
            out.push_str(&format!("  v{i} [label=\"{l}\"];\n"));
        }
        for (a, b) in &self.edges {
            out.push_str(&format!("  v{a} -> v{b};\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Orients every adjacency forward in the skeleton's precedence order. An
/// unshielded triple `i-k-j` with `k` outside `sepset(i, j)` marks both
/// edges as collider edges when precedence agrees (`k` after `i` and `j`);
/// otherwise precedence wins and the conflict is logged.
pub fn orient_edges(skeleton: &CausalSkeleton) -> OrientedGraph {
    let rank = ranks(&skeleton.order);
    let mut edges = BTreeSet::new();
    let mut reasons = BTreeMap::new();
    for &(a, b) in &skeleton.adjacencies {
        let e = if rank[a] < rank[b] { (a, b) } else { (b, a) };
        edges.insert(e);
        reasons.insert(e, OrientationReason::Temporal);
    }
    let mut conflicts = Vec::new();
    for k in 0..skeleton.nodes {
        let nbrs: Vec<usize> = skeleton.neighbours(k).into_iter().collect();
        for (x, &i) in nbrs.iter().enumerate() {
            for &j in &nbrs[x + 1..] {
                if skeleton.adjacent(i, j) {
                    continue;
                }
                let Some(sep) = skeleton.sepset(i, j) else {
                    continue;
                };
                if sep.contains(&k) {
                    continue;
                }
                if rank[i] < rank[k] && rank[j] < rank[k] {
                    reasons.insert((i, k), OrientationReason::Collider);
                    reasons.insert((j, k), OrientationReason::Collider);
                } else {
                    conflicts.push(format!(
                        "collider {i}->{k}<-{j} contradicts precedence; kept temporal order"
                    ));
                }
            }
        }
    }
    OrientedGraph {
        nodes: skeleton.nodes,
        edges,
        reasons,
        conflicts,
    }
}
