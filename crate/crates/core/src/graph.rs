//! Data-dependency graphs over steps and their performance causal inversion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::trace::ExecutionTrace;

pub type Edge = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub index: usize,
    pub agent: String,
    pub timestamp: f64,
}

/// Edges follow information flow: `(i, j)` means step `j` consumed output of step `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataDependencyGraph {
    pub nodes: Vec<NodeInfo>,
    pub edges: BTreeSet<Edge>,
}

/// Reversed data flow: `(u, v)` means the performance of `u` drives the performance of `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceCausalGraph {
    pub nodes: Vec<NodeInfo>,
    pub edges: BTreeSet<Edge>,
    pub removed_edges: Vec<Edge>,
}

pub fn nodes_of(trace: &ExecutionTrace) -> Vec<NodeInfo> {
    trace
        .steps
        .iter()
        .map(|s| NodeInfo {
            index: s.index,
            agent: s.agent.clone(),
            timestamp: s.timestamp,
        })
        .collect()
}

pub fn build_data_graph(trace: &ExecutionTrace) -> DataDependencyGraph {
    DataDependencyGraph {
        nodes: nodes_of(trace),
        edges: trace.links(),
    }
}

fn reversed(edges: &BTreeSet<Edge>) -> BTreeSet<Edge> {
    edges.iter().map(|&(a, b)| (b, a)).collect()
}

pub fn invert(g: &DataDependencyGraph) -> PerformanceCausalGraph {
    PerformanceCausalGraph {
        nodes: g.nodes.clone(),
        edges: reversed(&g.edges),
        removed_edges: Vec::new(),
    }
}

impl DataDependencyGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.1 == v).count()
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.0 == v).count()
    }

    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.1 == v).map(|e| e.0).collect()
    }

    /// Keeps the data-flow direction but wraps the graph as a causal graph.
    /// Used when inversion is switched off.
    pub fn without_inversion(&self) -> PerformanceCausalGraph {
        PerformanceCausalGraph {
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            removed_edges: Vec::new(),
        }
    }
}

impl PerformanceCausalGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn parents(&self, v: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.1 == v).map(|e| e.0).collect()
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.0 == v).map(|e| e.1).collect()
    }

    /// Nodes without outgoing causal edges.
    pub fn sinks(&self) -> Vec<usize> {
        let has_out: BTreeSet<usize> = self.edges.iter().map(|e| e.0).collect();
        (0..self.nodes.len()).filter(|v| !has_out.contains(v)).collect()
    }

    /// Reverses the inversion, giving back the data-flow graph.
    pub fn invert(&self) -> DataDependencyGraph {
        DataDependencyGraph {
            nodes: self.nodes.clone(),
            edges: reversed(&self.edges),
        }
    }

    pub fn topological_order(&self) -> Option<Vec<usize>> {
        topological_order(self.nodes.len(), &self.edges)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Nodes reachable from `v` along causal edges, excluding `v` itself.
    pub fn descendants(&self, v: usize) -> BTreeSet<usize> {
        descendants(self.nodes.len(), &self.edges, v)
    }

    /// DOT rendering with `agent@step` node labels.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = format!("digraph {name} {{\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  n{} [label=\"{}@{}\"];", n.index, escape(&n.agent), n.index);
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "  n{a} -> n{b};");
        }
        for (a, b) in &self.removed_edges {
            let _ = writeln!(out, "  n{a} -> n{b} [style=dashed, color=gray];");
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Kahn's algorithm, smallest ready node first. `None` when a cycle exists.
pub fn topological_order(n: usize, edges: &BTreeSet<Edge>) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        indeg[b] += 1;
        adj[a].push(b);
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &w in &adj[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.insert(w);
            }
        }
    }
    (order.len() == n).then_some(order)
}

pub fn descendants(n: usize, edges: &BTreeSet<Edge>, v: usize) -> BTreeSet<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    let mut seen = BTreeSet::new();
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        for &w in &adj[u] {
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.remove(&v);
    seen
}

// Depth-first search in index order; returns the edges of the first cycle found.
fn find_cycle(n: usize, edges: &BTreeSet<Edge>) -> Option<Vec<Edge>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut path = vec![start];
        let mut next = vec![0usize];
        state[start] = 1;
        while let Some(&u) = path.last() {
            let k = next.last_mut().unwrap();
            if *k < adj[u].len() {
                let w = adj[u][*k];
                *k += 1;
                match state[w] {
                    0 => {
                        state[w] = 1;
                        path.push(w);
                        next.push(0);
                    }
                    1 => {
                        let pos = path.iter().position(|&x| x == w).unwrap();
                        let mut cycle: Vec<Edge> =
                            path[pos..].windows(2).map(|p| (p[0], p[1])).collect();
                        cycle.push((u, w));
                        return Some(cycle);
                    }
                    _ => {}
                }
            } else {
                state[u] = 2;
                path.pop();
                next.pop();
            }
        }
    }
    None
}

/// Repeatedly removes, from some cycle, the edge with the largest `edge_time`
/// (ties go to the larger source index) until the graph is acyclic.
pub fn break_cycles_by(
    n: usize,
    edges: &BTreeSet<Edge>,
    edge_time: impl Fn(Edge) -> f64,
) -> (BTreeSet<Edge>, Vec<Edge>) {
    let mut kept = edges.clone();
    let mut removed = Vec::new();
    while let Some(cycle) = find_cycle(n, &kept) {
        let victim = cycle
            .into_iter()
            .max_by(|&a, &b| {
                edge_time(a)
                    .total_cmp(&edge_time(b))
                    .then(a.0.cmp(&b.0))
                    .then(a.1.cmp(&b.1))
            })
            .expect("cycle has edges");
        kept.remove(&victim);
        removed.push(victim);
    }
    (kept, removed)
}

/// Makes a possibly cyclic step graph acyclic, dropping within each cycle the
/// edge whose source step has the latest timestamp.
pub fn break_cycles(nodes: Vec<NodeInfo>, edges: BTreeSet<Edge>) -> PerformanceCausalGraph {
    let times: Vec<f64> = nodes.iter().map(|n| n.timestamp).collect();
    let (edges, removed_edges) = break_cycles_by(nodes.len(), &edges, |(a, _)| times[a]);
    PerformanceCausalGraph {
        nodes,
        edges,
        removed_edges,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentGraph {
    /// Agents in order of first appearance.
    pub agents: Vec<String>,
    pub edges: BTreeSet<Edge>,
    pub removed_edges: Vec<Edge>,
}

impl AgentGraph {
    pub fn edge_names(&self) -> Vec<(String, String)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.agents[a].clone(), self.agents[b].clone()))
            .collect()
    }
}

/// Lifts step edges to agents. An agent edge's time is the earliest timestamp
/// among the step edges supporting it; agent-level cycles lose their latest edge.
pub fn project_to_agent_graph(g: &PerformanceCausalGraph) -> AgentGraph {
    let mut agents: Vec<String> = Vec::new();
    let mut slot: BTreeMap<&str, usize> = BTreeMap::new();
    let mut order: Vec<&NodeInfo> = g.nodes.iter().collect();
    order.sort_by_key(|n| n.index);
    for n in &order {
        if !slot.contains_key(n.agent.as_str()) {
            slot.insert(n.agent.as_str(), agents.len());
            agents.push(n.agent.clone());
        }
    }
    let mut contact: BTreeMap<Edge, f64> = BTreeMap::new();
    for &(u, v) in &g.edges {
        let (a, b) = (slot[g.nodes[u].agent.as_str()], slot[g.nodes[v].agent.as_str()]);
        if a == b {
            continue;
        }
        let t = g.nodes[u].timestamp;
        contact
            .entry((a, b))
            .and_modify(|x| *x = x.min(t))
            .or_insert(t);
    }
    let edges: BTreeSet<Edge> = contact.keys().copied().collect();
    let (edges, removed_edges) = break_cycles_by(agents.len(), &edges, |e| contact[&e]);
    AgentGraph {
        agents,
        edges,
        removed_edges,
    }
}
