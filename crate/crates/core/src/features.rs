//! Per-step features and the trace-level context vector.
//!
//! Thirteen raw features per step, in four blocks:
//!
//! | block    | features                                                       |
//! |----------|----------------------------------------------------------------|
//! | tech     | payload length, tool-call count, bracket depth, error tokens   |
//! | interact | in-degree, out-degree, distinct upstream agents in window      |
//! | temporal | duration, gap to previous step, position `i/n`                 |
//! | semantic | goal similarity, prior-step consistency, payload distinctness  |

use std::collections::BTreeSet;
use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DataDependencyGraph;
use crate::stats;
use crate::trace::{jaccard, tokens, ExecutionTrace};

pub const FEATURE_DIM: usize = 13;
pub const BLOCKS: [(&str, std::ops::Range<usize>); 4] = [
    ("tech", 0..4),
    ("interact", 4..7),
    ("temporal", 7..10),
    ("semantic", 10..13),
];
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "payload_len",
    "tool_calls",
    "bracket_depth",
    "error_tokens",
    "in_degree",
    "out_degree",
    "upstream_agents",
    "duration",
    "gap",
    "position",
    "goal_similarity",
    "prior_consistency",
    "distinctness",
];
pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_CONTEXT_DIM: usize = 16;
pub const DEFAULT_PROJECTION_SEED: u64 = 0x5eed_c0de;

const ERROR_TOKENS: &[&str] = &[
    "error", "errors", "exception", "fail", "failed", "failure", "traceback", "timeout",
    "invalid", "unable", "cannot", "refused", "denied", "missing", "warning",
];

/// Text similarity in `[-1, 1]`.
pub trait SimilarityProvider: Send + Sync {
    fn similarity(&self, a: &str, b: &str) -> Result<f64>;

    /// How many requests may be in flight at once.
    fn max_in_flight(&self) -> usize {
        1
    }

    fn name(&self) -> &'static str;
}

/// Offline provider: Jaccard overlap of lowercased alphanumeric tokens.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalSimilarity;

impl SimilarityProvider for LexicalSimilarity {
    fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        Ok(jaccard(&tokens(a), &tokens(b)))
    }

    fn name(&self) -> &'static str {
        "mock"
    }
}

/// Remote provider. POSTs `{"text_a", "text_b"}` and reads `{"similarity"}`.
#[derive(Debug, Clone)]
pub struct HttpSimilarity {
    pub url: String,
    pub key: Option<String>,
    pub timeout: Duration,
    pub in_flight: usize,
}

impl HttpSimilarity {
    /// Reads `MAS_EMBED_URL` and `MAS_EMBED_KEY`.
    pub fn from_env(timeout: Duration, in_flight: usize) -> Result<Self> {
        let url = std::env::var("MAS_EMBED_URL")
            .map_err(|_| Error::Config("MAS_EMBED_URL is not set".into()))?;
        Ok(Self {
            url,
            key: std::env::var("MAS_EMBED_KEY").ok(),
            timeout,
            in_flight: in_flight.max(1),
        })
    }
}

#[derive(Deserialize)]
struct SimilarityResponse {
    similarity: f64,
}

impl SimilarityProvider for HttpSimilarity {
    fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .new_agent();
        let mut req = agent.post(&self.url);
        if let Some(key) = &self.key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::json!({ "text_a": a, "text_b": b });
        let resp: SimilarityResponse = req
            .send_json(&body)
            .map_err(|e| Error::Provider(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| Error::Provider(e.to_string()))?;
        if !resp.similarity.is_finite() {
            return Err(Error::Provider("non-finite similarity".into()));
        }
        Ok(resp.similarity.clamp(-1.0, 1.0))
    }

    fn max_in_flight(&self) -> usize {
        self.in_flight
    }

    fn name(&self) -> &'static str {
        "http"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepFeatureVector {
    pub tech: [f64; 4],
    pub interact: [f64; 3],
    pub temporal: [f64; 3],
    pub semantic: [f64; 3],
}

impl StepFeatureVector {
    pub fn from_array(a: [f64; FEATURE_DIM]) -> Self {
        Self {
            tech: [a[0], a[1], a[2], a[3]],
            interact: [a[4], a[5], a[6]],
            temporal: [a[7], a[8], a[9]],
            semantic: [a[10], a[11], a[12]],
        }
    }

    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        let mut a = [0.0; FEATURE_DIM];
        a[0..4].copy_from_slice(&self.tech);
        a[4..7].copy_from_slice(&self.interact);
        a[7..10].copy_from_slice(&self.temporal);
        a[10..13].copy_from_slice(&self.semantic);
        a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub raw: Vec<StepFeatureVector>,
    pub standardized: Vec<StepFeatureVector>,
    /// Set when the similarity provider failed and the semantic block is zero.
    pub degraded: bool,
}

pub fn bracket_depth(text: &str) -> usize {
    let (mut depth, mut best) = (0usize, 0usize);
    for c in text.chars() {
        match c {
            '(' | '[' | '{' => {
                depth += 1;
                best = best.max(depth);
            }
            ')' | ']' | '}' => depth = depth.saturating_sub(1),
            _ => {}
        }
    }
    best
}

pub fn error_token_count(text: &str) -> usize {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter(|t| ERROR_TOKENS.contains(&t.to_lowercase().as_str()))
        .count()
}

pub fn tool_call_count(tool: Option<&str>, payload: &str) -> usize {
    usize::from(tool.is_some()) + payload.matches("tool_call").count()
}

fn duration_of(trace: &ExecutionTrace, i: usize) -> f64 {
    if let Some(d) = trace.steps[i].context.get("duration").and_then(|v| v.as_f64()) {
        return d;
    }
    match trace.steps.get(i + 1) {
        Some(next) => next.timestamp - trace.steps[i].timestamp,
        None => 0.0,
    }
}

fn semantic_block(trace: &ExecutionTrace, provider: &dyn SimilarityProvider) -> Result<Vec<[f64; 3]>> {
    let n = trace.len();
    let payload = |i: usize| trace.steps[i].action.payload.as_str();
    // One request per (i, j) pair plus one per goal comparison.
    let mut requests: Vec<(usize, usize)> = Vec::new();
    for j in 0..n {
        requests.push((usize::MAX, j));
        for i in 0..j {
            requests.push((i, j));
        }
    }
    let eval = |&(i, j): &(usize, usize)| -> Result<f64> {
        if i == usize::MAX {
            provider.similarity(&trace.task, payload(j))
        } else {
            provider.similarity(payload(i), payload(j))
        }
    };
    let results: Vec<Result<f64>> = if provider.max_in_flight() > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(provider.max_in_flight())
            .build()
            .map_err(|e| Error::Provider(e.to_string()))?;
        pool.install(|| requests.par_iter().map(eval).collect())
    } else {
        requests.iter().map(eval).collect()
    };
    let mut sims = std::collections::HashMap::new();
    for (req, r) in requests.iter().zip(results) {
        sims.insert(*req, r?);
    }
    Ok((0..n)
        .map(|j| {
            let goal = sims[&(usize::MAX, j)];
            let prior = if j == 0 { 0.0 } else { sims[&(j - 1, j)] };
            let closest = (0..j).map(|i| sims[&(i, j)]).fold(f64::NEG_INFINITY, f64::max);
            let distinct = if j == 0 { 1.0 } else { 1.0 - closest };
            [goal, prior, distinct]
        })
        .collect())
}

/// Raw (unstandardized) features. Returns the degraded flag alongside.
pub fn raw_features(
    trace: &ExecutionTrace,
    graph: &DataDependencyGraph,
    provider: &dyn SimilarityProvider,
    window: usize,
) -> (Vec<StepFeatureVector>, bool) {
    let n = trace.len();
    let (semantic, degraded) = match semantic_block(trace, provider) {
        Ok(s) => (s, false),
        Err(_) => (vec![[0.0; 3]; n], true),
    };
    let out = (0..n)
        .map(|i| {
            let step = &trace.steps[i];
            let payload = &step.action.payload;
            let parents = graph.parents(i);
            let upstream: BTreeSet<&str> = parents
                .iter()
                .filter(|&&p| i - p <= window)
                .map(|&p| trace.steps[p].agent.as_str())
                .collect();
            let gap = if i == 0 {
                0.0
            } else {
                step.timestamp - trace.steps[i - 1].timestamp
            };
            StepFeatureVector {
                tech: [
                    payload.chars().count() as f64,
                    tool_call_count(step.action.tool.as_deref(), payload) as f64,
                    bracket_depth(payload) as f64,
                    error_token_count(payload) as f64,
                ],
                interact: [
                    graph.in_degree(i) as f64,
                    graph.out_degree(i) as f64,
                    upstream.len() as f64,
                ],
                temporal: [duration_of(trace, i), gap, i as f64 / n as f64],
                semantic: semantic[i],
            }
        })
        .collect();
    (out, degraded)
}

/// Column-wise standardization over the steps of one trace.
pub fn standardize_features(raw: &[StepFeatureVector]) -> Vec<StepFeatureVector> {
    let cols: Vec<Vec<f64>> = (0..FEATURE_DIM)
        .map(|k| stats::standardize(&raw.iter().map(|f| f.to_array()[k]).collect::<Vec<_>>()))
        .collect();
    (0..raw.len())
        .map(|i| {
            let mut a = [0.0; FEATURE_DIM];
            for k in 0..FEATURE_DIM {
                a[k] = cols[k][i];
            }
            StepFeatureVector::from_array(a)
        })
        .collect()
}

pub fn extract_features(
    trace: &ExecutionTrace,
    graph: &DataDependencyGraph,
    provider: &dyn SimilarityProvider,
    window: usize,
) -> FeatureSet {
    let (raw, degraded) = raw_features(trace, graph, provider, window);
    FeatureSet {
        standardized: standardize_features(&raw),
        raw,
        degraded,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Deterministic,
    ExternalEncoder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextVector {
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

/// Maps a trace and its raw features to a context vector.
pub trait ContextEncoder: Send + Sync {
    fn encode(&self, trace: &ExecutionTrace, raw: &[StepFeatureVector]) -> ContextVector;
    fn dim(&self) -> usize;
}

/// Pooled statistics followed by a fixed orthonormal projection.
///
/// Input layout (16 entries): task complexity, step count, agent count; the
/// mean squashed configuration scalar `v/(1+|v|)`; then mean, max and
/// last-quartile mean of each feature block's per-step average.
#[derive(Debug, Clone)]
pub struct PooledEncoder {
    projection: DMatrix<f64>,
}

pub const POOLED_INPUT_DIM: usize = 3 + 1 + 4 * 3;

impl PooledEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            projection: orthonormal_projection(dim, POOLED_INPUT_DIM, seed),
        }
    }

    pub fn pooled_input(trace: &ExecutionTrace, raw: &[StepFeatureVector]) -> Vec<f64> {
        let n = trace.len();
        let mut x = vec![trace.task_complexity, n as f64, trace.agents().len() as f64];
        let squashed: Vec<f64> = trace.agent_config.values().map(|v| v / (1.0 + v.abs())).collect();
        x.push(stats::mean(&squashed));
        let tail = n - (n / 4).max(1);
        for (_, range) in BLOCKS.iter() {
            let per_step: Vec<f64> = raw
                .iter()
                .map(|f| stats::mean(&f.to_array()[range.clone()]))
                .collect();
            x.push(stats::mean(&per_step));
            x.push(per_step.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            x.push(stats::mean(&per_step[tail..]));
        }
        x
    }

    pub fn project(&self, input: &[f64]) -> Vec<f64> {
        (&self.projection * DVector::from_column_slice(input))
            .iter()
            .copied()
            .collect()
    }
}

impl ContextEncoder for PooledEncoder {
    fn encode(&self, trace: &ExecutionTrace, raw: &[StepFeatureVector]) -> ContextVector {
        ContextVector {
            values: self.project(&Self::pooled_input(trace, raw)),
            provenance: Provenance::Deterministic,
        }
    }

    fn dim(&self) -> usize {
        self.projection.nrows()
    }
}

/// `dim × input` matrix with orthonormal rows when `dim ≤ input`, orthonormal
/// columns otherwise. Either way the map is non-expansive.
pub fn orthonormal_projection(dim: usize, input: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tall, short) = (dim.max(input), dim.min(input));
    let g = DMatrix::from_fn(tall, short, |_, _| StandardNormal.sample(&mut rng));
    let q = g.qr().q();
    if dim >= input {
        q
    } else {
        q.transpose()
    }
}

pub fn encode_context(trace: &ExecutionTrace, raw: &[StepFeatureVector]) -> ContextVector {
    PooledEncoder::new(DEFAULT_CONTEXT_DIM, DEFAULT_PROJECTION_SEED).encode(trace, raw)
}
