//! Linear structural causal model over the performance causal graph, with the
//! Shapley amplification factor on every mechanism.
//!
//! Node `j` evaluates as `x_j = (b_j + Σ w_p·x_p + n_j) · exp(α·φ_j)` in
//! topological order; the outcome is a clamped affine read-out of the sinks.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, NodeInfo, PerformanceCausalGraph};
use crate::stats;
use crate::trace::ExecutionTrace;

pub const SCHEMA: &str = "mas-attribution/scm/v1";
pub const RIDGE_PENALTY: f64 = 1e-6;
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub node: usize,
    pub parents: Vec<usize>,
    pub parent_weights: Vec<f64>,
    pub intercept: f64,
    pub noise_scale: f64,
    pub amplification_alpha: f64,
    #[serde(default)]
    pub shapley_value: f64,
}

impl Mechanism {
    pub fn new(node: usize, parents: Vec<usize>, parent_weights: Vec<f64>, intercept: f64, noise_scale: f64) -> Self {
        Self {
            node,
            parents,
            parent_weights,
            intercept,
            noise_scale,
            amplification_alpha: 0.0,
            shapley_value: 0.0,
        }
    }

    pub fn amplification(&self) -> f64 {
        (self.amplification_alpha * self.shapley_value).exp()
    }

    /// `b + Σ w·x_parents`, the noise-free part of f_j.
    pub fn base(&self, values: &[f64]) -> f64 {
        self.intercept
            + self
                .parents
                .iter()
                .zip(&self.parent_weights)
                .map(|(&p, w)| w * values[p])
                .sum::<f64>()
    }
}

/// `Y = clamp(bias + Σ weights·x_nodes, 0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReadout {
    pub nodes: Vec<usize>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl OutcomeReadout {
    pub fn mean_of(nodes: Vec<usize>) -> Self {
        let w = 1.0 / nodes.len().max(1) as f64;
        Self {
            weights: vec![w; nodes.len()],
            nodes,
            bias: 0.0,
        }
    }

    pub fn raw(&self, values: &[f64]) -> f64 {
        self.bias
            + self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(&n, w)| w * values[n])
                .sum::<f64>()
    }

    pub fn read(&self, values: &[f64]) -> f64 {
        self.raw(values).clamp(0.0, 1.0)
    }
}

/// A do-set plus an optional set of nodes whose noise is reset to zero,
/// i.e. forced back to their own mechanism's nominal output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub assignments: BTreeMap<usize, f64>,
    #[serde(default)]
    pub normalize: BTreeSet<usize>,
}

impl InterventionSpec {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn assign(node: usize, value: f64) -> Self {
        let mut s = Self::default();
        s.assignments.insert(node, value);
        s
    }

    pub fn normalize(nodes: impl IntoIterator<Item = usize>) -> Self {
        Self {
            assignments: BTreeMap::new(),
            normalize: nodes.into_iter().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty() && self.normalize.is_empty()
    }

    pub fn touched(&self) -> BTreeSet<usize> {
        self.assignments
            .keys()
            .copied()
            .chain(self.normalize.iter().copied())
            .collect()
    }
}

/// What "performs normally" means when repairing a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalBaseline {
    /// `do(X = value)`.
    Nominal(f64),
    /// The node's own mechanism with its noise set to zero.
    Mechanism,
}

impl Default for NormalBaseline {
    fn default() -> Self {
        NormalBaseline::Mechanism
    }
}

impl NormalBaseline {
    pub fn spec(&self, nodes: impl IntoIterator<Item = usize>) -> InterventionSpec {
        match *self {
            NormalBaseline::Nominal(v) => InterventionSpec {
                assignments: nodes.into_iter().map(|n| (n, v)).collect(),
                normalize: BTreeSet::new(),
            },
            NormalBaseline::Mechanism => InterventionSpec::normalize(nodes),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub values: Vec<f64>,
    pub outcome: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralModel {
    pub schema: String,
    pub nodes: Vec<NodeInfo>,
    pub edges: BTreeSet<Edge>,
    pub mechanisms: Vec<Mechanism>,
    pub outcome: OutcomeReadout,
    order: Vec<usize>,
}

impl StructuralModel {
    pub fn new(graph: &PerformanceCausalGraph, mechanisms: Vec<Mechanism>) -> Result<Self> {
        let outcome = OutcomeReadout::mean_of(graph.sinks());
        Self::with_readout(graph, mechanisms, outcome)
    }

    pub fn with_readout(graph: &PerformanceCausalGraph, mechanisms: Vec<Mechanism>, outcome: OutcomeReadout) -> Result<Self> {
        let order = graph
            .topological_order()
            .ok_or_else(|| Error::Invariant("structural model needs an acyclic graph".into()))?;
        if mechanisms.len() != graph.len() {
            return Err(Error::Invariant(format!(
                "expected {} mechanisms, got {}",
                graph.len(),
                mechanisms.len()
            )));
        }
        for (i, m) in mechanisms.iter().enumerate() {
            if m.node != i {
                return Err(Error::Invariant(format!("mechanism {i} is labelled node {}", m.node)));
            }
            let mut got = m.parents.clone();
            got.sort_unstable();
            if got != graph.parents(i) || m.parent_weights.len() != m.parents.len() {
                return Err(Error::Invariant(format!(
                    "mechanism parents of node {i} differ from graph parents"
                )));
            }
            if !(m.noise_scale >= 0.0) {
                return Err(Error::Invariant(format!("noise_scale of node {i} is negative")));
            }
        }
        if outcome.nodes.iter().any(|&n| n >= graph.len()) || outcome.nodes.len() != outcome.weights.len() {
            return Err(Error::Invariant("outcome read-out references unknown nodes".into()));
        }
        Ok(Self {
            schema: SCHEMA.to_string(),
            nodes: graph.nodes.clone(),
            edges: graph.edges.clone(),
            mechanisms,
            outcome,
            order,
        })
    }

    /// Uninformed model: every node averages its parents with total weight
    /// `weight_sum`; intercepts put the noise-free fixed point at `nominal`.
    pub fn prior(graph: &PerformanceCausalGraph, weight_sum: f64, nominal: f64, noise_scale: f64) -> Result<Self> {
        let mechanisms = (0..graph.len())
            .map(|v| {
                let parents = graph.parents(v);
                let (weights, intercept) = if parents.is_empty() {
                    (Vec::new(), nominal)
                } else {
                    let w = weight_sum / parents.len() as f64;
                    (vec![w; parents.len()], nominal * (1.0 - weight_sum))
                };
                Mechanism::new(v, parents, weights, intercept, noise_scale)
            })
            .collect();
        Self::new(graph, mechanisms)
    }

    pub fn graph(&self) -> PerformanceCausalGraph {
        PerformanceCausalGraph {
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            removed_edges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.mechanisms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mechanisms.is_empty()
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// Copy with α set everywhere and φ given per node.
    pub fn amplified(&self, alpha: f64, phi_per_node: &[f64]) -> Self {
        let mut out = self.clone();
        for (m, &phi) in out.mechanisms.iter_mut().zip(phi_per_node) {
            m.amplification_alpha = alpha;
            m.shapley_value = phi;
        }
        out
    }

    pub fn readout(&self, values: &[f64]) -> f64 {
        self.outcome.read(values)
    }

    fn run(&self, noise: &[f64], spec: Option<&InterventionSpec>) -> Simulation {
        let mut values = vec![0.0; self.len()];
        for &v in &self.order {
            let m = &self.mechanisms[v];
            if let Some(&forced) = spec.and_then(|s| s.assignments.get(&v)) {
                values[v] = forced;
                continue;
            }
            let reset = spec.is_some_and(|s| s.normalize.contains(&v));
            let n = if reset { 0.0 } else { noise[v] };
            values[v] = (m.base(&values) + n) * m.amplification();
        }
        let outcome = self.readout(&values);
        Simulation { values, outcome }
    }

    pub fn simulate(&self, noise: &[f64]) -> Simulation {
        assert_eq!(noise.len(), self.len(), "one noise value per node");
        self.run(noise, None)
    }

    /// Independent Gaussian noise draws, `N(0, σ_j)` per node.
    pub fn sample_noise(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.mechanisms
            .iter()
            .map(|m| {
                if m.noise_scale > 0.0 {
                    Normal::new(0.0, m.noise_scale).expect("finite scale").sample(&mut rng)
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn simulate_seeded(&self, seed: u64) -> Simulation {
        self.simulate(&self.sample_noise(seed))
    }

    fn check(&self, spec: &InterventionSpec) -> Result<()> {
        match spec.touched().into_iter().find(|&n| n >= self.len()) {
            Some(n) => Err(Error::UnknownNode(n)),
            None => Ok(()),
        }
    }

    pub fn do_intervene(&self, spec: &InterventionSpec, noise: &[f64]) -> Result<Simulation> {
        self.check(spec)?;
        assert_eq!(noise.len(), self.len(), "one noise value per node");
        Ok(self.run(noise, Some(spec)))
    }

    /// Noise that reproduces `observed` exactly under this model.
    pub fn abduct(&self, observed: &[f64]) -> Vec<f64> {
        self.mechanisms
            .iter()
            .map(|m| observed[m.node] / m.amplification() - m.base(observed))
            .collect()
    }

    pub fn counterfactual(&self, observed: &[f64], spec: &InterventionSpec) -> Result<Simulation> {
        if observed.len() != self.len() {
            return Err(Error::Invariant(format!(
                "observed values cover {} of {} nodes",
                observed.len(),
                self.len()
            )));
        }
        let noise = self.abduct(observed);
        self.do_intervene(spec, &noise)
    }

    pub fn counterfactual_outcome(&self, observed: &[f64], spec: &InterventionSpec) -> Result<f64> {
        Ok(self.counterfactual(observed, spec)?.outcome)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: StructuralModel = serde_json::from_str(text)?;
        if raw.schema != SCHEMA {
            return Err(Error::Schema(format!(
                "unsupported model schema {:?}, expected {SCHEMA:?}",
                raw.schema
            )));
        }
        let graph = raw.graph();
        Self::with_readout(&graph, raw.mechanisms, raw.outcome)
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: StructuralModel,
    /// Nodes whose design was rank deficient and fell back to ridge.
    pub ridge_nodes: Vec<usize>,
}

/// Minimum number of samples for fitting on a graph.
pub fn min_corpus(graph: &PerformanceCausalGraph) -> usize {
    let max_parents = (0..graph.len()).map(|v| graph.parents(v).len()).max().unwrap_or(0);
    30.max(3 * max_parents)
}

/// Per-node OLS of node value on parent values over a corpus of runs.
pub fn fit_mechanisms(corpus: &[ExecutionTrace], graph: &PerformanceCausalGraph) -> Result<FitReport> {
    let mut rows = Vec::with_capacity(corpus.len());
    for (i, t) in corpus.iter().enumerate() {
        if t.len() != graph.len() {
            return Err(Error::TopologyMismatch(format!(
                "trace {i} has {} steps, graph has {}",
                t.len(),
                graph.len()
            )));
        }
        if t.steps.iter().zip(&graph.nodes).any(|(s, n)| s.agent != n.agent) {
            return Err(Error::TopologyMismatch(format!("trace {i} assigns steps to different agents")));
        }
        rows.push(t.performance_vector().ok_or_else(|| {
            Error::Schema(format!("trace {i} lacks per-step performance values"))
        })?);
    }
    fit_from_samples(&rows, graph)
}

pub fn fit_from_samples(rows: &[Vec<f64>], graph: &PerformanceCausalGraph) -> Result<FitReport> {
    let need = min_corpus(graph);
    if rows.len() < need {
        return Err(Error::CorpusTooSmall {
            have: rows.len(),
            need,
        });
    }
    let n = rows.len();
    let mut mechanisms = Vec::with_capacity(graph.len());
    let mut ridge_nodes = Vec::new();
    for v in 0..graph.len() {
        let parents = graph.parents(v);
        let mut x = DMatrix::from_element(n, parents.len() + 1, 1.0);
        for (r, row) in rows.iter().enumerate() {
            for (c, &p) in parents.iter().enumerate() {
                x[(r, c + 1)] = row[p];
            }
        }
        let y = DVector::from_iterator(n, rows.iter().map(|row| row[v]));
        let (mut beta, rank) = stats::lstsq(&x, &y);
        if rank < x.ncols() {
            beta = stats::ridge(&x, &y, RIDGE_PENALTY);
            ridge_nodes.push(v);
        }
        let resid = &y - &x * &beta;
        let noise_scale = (resid.norm_squared() / n as f64).sqrt();
        mechanisms.push(Mechanism::new(
            v,
            parents,
            beta.iter().skip(1).copied().collect(),
            beta[0],
            noise_scale,
        ));
    }
    Ok(FitReport {
        model: StructuralModel::new(graph, mechanisms)?,
        ridge_nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeInfo;

    pub(crate) fn graph(n: usize, edges: &[Edge]) -> PerformanceCausalGraph {
        PerformanceCausalGraph {
            nodes: (0..n)
                .map(|i| NodeInfo {
                    index: i,
                    agent: format!("A{i}"),
                    timestamp: i as f64,
                })
                .collect(),
            edges: edges.iter().copied().collect(),
            removed_edges: vec![],
        }
    }

    fn chain_uv() -> StructuralModel {
        let g = graph(2, &[(0, 1)]);
        StructuralModel::new(
            &g,
            vec![
                Mechanism::new(0, vec![], vec![], 0.0, 0.0),
                Mechanism::new(1, vec![0], vec![1.0], 0.0, 0.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn chain_simulation_by_hand() {
        let m = chain_uv();
        let s = m.simulate(&[0.2, 0.0]);
        assert_eq!(s.values, vec![0.2, 0.2]);
        let amp = m.amplified(0.5, &[0.0, 1.0]);
        let s = amp.simulate(&[0.2, 0.0]);
        assert!((s.values[1] - 0.2 * 0.5f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn do_root_zero_zeroes_chain() {
        let m = chain_uv();
        let s = m.do_intervene(&InterventionSpec::assign(0, 0.0), &[0.2, 0.0]).unwrap();
        assert_eq!(s.values, vec![0.0, 0.0]);
        assert!(matches!(
            m.do_intervene(&InterventionSpec::assign(5, 0.0), &[0.0, 0.0]),
            Err(Error::UnknownNode(5))
        ));
    }

    #[test]
    fn empty_counterfactual_reproduces_observation() {
        let m = chain_uv().amplified(0.5, &[0.3, 0.7]);
        let obs = [0.4, 0.9];
        let s = m.counterfactual(&obs, &InterventionSpec::empty()).unwrap();
        for (a, b) in s.values.iter().zip(obs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_reset_uses_mechanism() {
        let g = graph(2, &[(0, 1)]);
        let m = StructuralModel::new(
            &g,
            vec![
                Mechanism::new(0, vec![], vec![], 0.9, 0.1),
                Mechanism::new(1, vec![0], vec![0.5], 0.1, 0.1),
            ],
        )
        .unwrap();
        let obs = [0.3, 0.2];
        let s = m.counterfactual(&obs, &InterventionSpec::normalize([0])).unwrap();
        assert!((s.values[0] - 0.9).abs() < 1e-12);
        // node 1 keeps its abducted noise 0.2 - (0.1 + 0.15) = -0.05
        assert!((s.values[1] - (0.1 + 0.45 - 0.05)).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_noise_free_chain() {
        let g = graph(2, &[(0, 1)]);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let x = i as f64 / 40.0;
                vec![x, 0.2 + 0.7 * x]
            })
            .collect();
        let fit = fit_from_samples(&rows, &g).unwrap();
        let m1 = &fit.model.mechanisms[1];
        assert!((m1.parent_weights[0] - 0.7).abs() < 1e-9);
        assert!((m1.intercept - 0.2).abs() < 1e-9);
        assert!(m1.noise_scale < 1e-9);
        assert!(fit.ridge_nodes.is_empty());
    }

    #[test]
    fn constant_parent_falls_back_to_ridge() {
        let g = graph(2, &[(0, 1)]);
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![0.5, i as f64 / 30.0]).collect();
        let fit = fit_from_samples(&rows, &g).unwrap();
        assert_eq!(fit.ridge_nodes, vec![1]);
        assert!(fit.model.mechanisms[1].parent_weights[0].is_finite());
    }

    #[test]
    fn small_corpus_is_rejected() {
        let g = graph(2, &[(0, 1)]);
        let rows = vec![vec![0.0, 0.0]; 10];
        assert!(matches!(
            fit_from_samples(&rows, &g),
            Err(Error::CorpusTooSmall { have: 10, need: 30 })
        ));
    }

    #[test]
    fn json_round_trip() {
        let m = chain_uv().amplified(0.5, &[0.1, 0.2]);
        let back = StructuralModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let bad = m.to_json().replace(SCHEMA, "other/v0");
        assert!(StructuralModel::from_json(&bad).is_err());
    }
}
