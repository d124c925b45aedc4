//! Average causal effect of each variable on the outcome as a sum of
//! context-weighted path products over the oriented graph.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::orient::OrientedGraph;
use crate::graph::{topological_order, Edge};
use crate::stats;

pub type EdgeWeights = BTreeMap<Edge, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEffect {
    pub from: usize,
    pub to: usize,
    pub local_effect: f64,
    pub context_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AceScores {
    /// One entry per variable; the outcome's own entry is 0.
    pub ace: Vec<f64>,
    pub outcome: usize,
    pub edges: Vec<EdgeEffect>,
    /// Paths enumerated per variable, never above the cap.
    pub path_counts: Vec<usize>,
    pub truncated: bool,
    /// Variables with no directed path to the outcome.
    pub unreachable: Vec<usize>,
}

/// OLS coefficient of each parent in the regression of a node on all its parents.
pub fn local_effects(graph: &OrientedGraph, data: &DMatrix<f64>) -> EdgeWeights {
    let n = data.nrows();
    let mut out = BTreeMap::new();
    for v in 0..graph.nodes {
        let parents = graph.parents(v);
        if parents.is_empty() {
            continue;
        }
        let mut x = DMatrix::from_element(n, parents.len() + 1, 1.0);
        for (c, &p) in parents.iter().enumerate() {
            x.set_column(c + 1, &data.column(p));
        }
        let y = DVector::from_column_slice(data.column(v).as_slice());
        let (beta, _) = stats::lstsq(&x, &y);
        for (c, &p) in parents.iter().enumerate() {
            out.insert((p, v), beta[c + 1]);
        }
    }
    out
}

/// `ε + (1−ε)·(1 + cos(feat(u) ‖ feat(v), C))/2`, with `C` zero-padded or
/// truncated to the length of the concatenated features.
pub fn context_weights(graph: &OrientedGraph, node_features: &[Vec<f64>], context: &[f64], epsilon: f64) -> EdgeWeights {
    graph
        .edges
        .iter()
        .map(|&(u, v)| {
            let mut joint = node_features[u].clone();
            joint.extend_from_slice(&node_features[v]);
            let mut c = context.to_vec();
            c.resize(joint.len(), 0.0);
            let cos = stats::cosine(&joint, &c);
            ((u, v), epsilon + (1.0 - epsilon) * (1.0 + cos) / 2.0)
        })
        .collect()
}

pub fn unit_weights(graph: &OrientedGraph) -> EdgeWeights {
    graph.edges.iter().map(|&e| (e, 1.0)).collect()
}

/// `ACE_i = Σ_{paths i→outcome} Π LocalEffect(e) / Π ContextWeight(e)`.
///
/// Paths are enumerated depth-first with children in index order, at most
/// `path_cap` per variable. When a variable has no more than `path_cap` paths
/// the sum is accumulated by dynamic programming, which visits the same set.
pub fn compute_ace(
    graph: &OrientedGraph,
    local: &EdgeWeights,
    weights: &EdgeWeights,
    outcome: usize,
    path_cap: usize,
) -> AceScores {
    let p = graph.nodes;
    let order = topological_order(p, &graph.edges).expect("oriented graph is acyclic");
    let children: Vec<Vec<usize>> = (0..p).map(|v| graph.children(v)).collect();
    let factor = |u: usize, v: usize| local.get(&(u, v)).copied().unwrap_or(0.0) / weights.get(&(u, v)).copied().unwrap_or(1.0);

    let mut count = vec![0u128; p];
    let mut value = vec![0.0; p];
    count[outcome] = 1;
    value[outcome] = 1.0;
    for &v in order.iter().rev() {
        if v == outcome {
            continue;
        }
        for &c in &children[v] {
            count[v] = count[v].saturating_add(count[c]);
            value[v] += factor(v, c) * value[c];
        }
    }

    let mut ace = vec![0.0; p];
    let mut path_counts = vec![0usize; p];
    let mut truncated = false;
    let mut unreachable = Vec::new();
    for i in 0..p {
        if i == outcome {
            continue;
        }
        if count[i] == 0 {
            unreachable.push(i);
        } else if count[i] <= path_cap as u128 {
            ace[i] = value[i];
            path_counts[i] = count[i] as usize;
        } else {
            truncated = true;
            let (sum, seen) = enumerate_paths(i, outcome, &children, &count, &factor, path_cap);
            ace[i] = sum;
            path_counts[i] = seen;
        }
    }
    let edges = graph
        .edges
        .iter()
        .map(|&(u, v)| EdgeEffect {
            from: u,
            to: v,
            local_effect: local.get(&(u, v)).copied().unwrap_or(0.0),
            context_weight: weights.get(&(u, v)).copied().unwrap_or(1.0),
        })
        .collect();
    AceScores {
        ace,
        outcome,
        edges,
        path_counts,
        truncated,
        unreachable,
    }
}

fn enumerate_paths(
    start: usize,
    outcome: usize,
    children: &[Vec<usize>],
    count: &[u128],
    factor: &dyn Fn(usize, usize) -> f64,
    cap: usize,
) -> (f64, usize) {
    let mut sum = 0.0;
    let mut seen = 0usize;
    // (node, next child position, product so far)
    let mut stack = vec![(start, 0usize, 1.0f64)];
    while let Some(top) = stack.last_mut() {
        let (v, k, prod) = *top;
        if v == outcome {
            sum += prod;
            seen += 1;
            stack.pop();
            if seen >= cap {
                break;
            }
            continue;
        }
        if k < children[v].len() {
            top.1 += 1;
            let c = children[v][k];
            if count[c] > 0 {
                stack.push((c, 0, prod * factor(v, c)));
            }
        } else {
            stack.pop();
        }
    }
    (sum, seen)
}

/// Variables other than the outcome, by descending |ACE|, ties to the lower index.
pub fn rank_by_ace(scores: &AceScores) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.ace.len()).filter(|&i| i != scores.outcome).collect();
    idx.sort_by(|&a, &b| scores.ace[b].abs().total_cmp(&scores.ace[a].abs()).then(a.cmp(&b)));
    idx
}

/// The path from `start` to the outcome with the largest |product|, as edges.
pub fn strongest_path(scores: &AceScores, start: usize) -> Vec<EdgeEffect> {
    let p = scores.ace.len();
    let mut children: Vec<Vec<&EdgeEffect>> = vec![Vec::new(); p];
    for e in &scores.edges {
        children[e.from].push(e);
    }
    // best[v] = (|product| to outcome, next edge)
    let mut best: Vec<Option<(f64, Option<usize>)>> = vec![None; p];
    fn solve<'a>(v: usize, outcome: usize, children: &[Vec<&'a EdgeEffect>], best: &mut Vec<Option<(f64, Option<usize>)>>) -> f64 {
        if let Some((b, _)) = best[v] {
            return b;
        }
        if v == outcome {
            best[v] = Some((1.0, None));
            return 1.0;
        }
        let mut top = (f64::NEG_INFINITY, None);
        for (k, e) in children[v].iter().enumerate() {
            let sub = solve(e.to, outcome, children, best);
            if sub == f64::NEG_INFINITY {
                continue;
            }
            let val = sub * (e.local_effect / e.context_weight).abs();
            if val > top.0 {
                top = (val, Some(k));
            }
        }
        best[v] = Some(top);
        top.0
    }
    if solve(start, scores.outcome, &children, &mut best) == f64::NEG_INFINITY {
        return Vec::new();
    }
    let mut path = Vec::new();
    let mut v = start;
    while let Some((_, Some(k))) = best[v] {
        let e = children[v][k];
        path.push(e.clone());
        v = e.to;
    }
    path
}
