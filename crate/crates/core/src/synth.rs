//! Synthetic multi-agent runs with a known causal structure and an injected
//! fault, plus the accuracy harness and the random baseline.
//!
//! Each instance is its own small system: a random temporal data-flow DAG,
//! a linear SCM on its inversion, a failed run carrying the fault, and a set
//! of reference runs of the same system in which the fault recurs
//! intermittently. Task complexity and a latent per-run shock act as
//! confounders on a subset of steps.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bottleneck::DEFAULT_SUCCESS_THRESHOLD;
use crate::error::{Error, Result};
use crate::graph::{invert, DataDependencyGraph, Edge, NodeInfo};
use crate::scm::{Mechanism, StructuralModel};
use crate::trace::{
    parse_native_bundle, parse_native_trace, write_native, write_native_bundle, ArtifactRef, ExecutionTrace,
    Labels, Step,
};

const AGENT_NAMES: [&str; 8] = [
    "Planner", "WebSurfer", "Coder", "Critic", "Executor", "Retriever", "Verifier", "Summarizer",
];
const KINDS: [&str; 6] = ["plan", "search", "tool_call", "code", "review", "answer"];
const TOPICS: [&str; 10] = [
    "population", "schedule", "invoice", "dataset", "citation", "weather", "route", "budget", "inventory", "ranking",
];

/// A number or an inclusive `[lo, hi]` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Span {
    Fixed(f64),
    Range([f64; 2]),
}

impl Span {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Span::Fixed(v) => (v, v),
            Span::Range([a, b]) => (a, b),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let (a, b) = self.bounds();
        if b > a {
            rng.random_range(a..=b)
        } else {
            a
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CountSpan {
    Fixed(usize),
    Range([usize; 2]),
}

impl CountSpan {
    pub fn bounds(&self) -> (usize, usize) {
        match *self {
            CountSpan::Fixed(v) => (v, v),
            CountSpan::Range([a, b]) => (a, b),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let (a, b) = self.bounds();
        rng.random_range(a..=b.max(a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    /// Multiply the step's value by `1 − severity`.
    Degrade,
    /// Zero the step's value and blank its payload.
    Withhold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MechanismRanges {
    /// Total parent weight per node.
    pub weight_sum: Span,
    pub noise: Span,
    /// Noise-free fixed point of every node.
    pub nominal: f64,
}

impl Default for MechanismRanges {
    fn default() -> Self {
        Self {
            weight_sum: Span::Range([0.95, 1.0]),
            noise: Span::Range([0.01, 0.03]),
            nominal: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfounderSpec {
    /// Value drop per unit of `τ − 1` on affected steps.
    pub complexity_strength: f64,
    /// Log-scale spread of `τ`.
    pub complexity_spread: f64,
    /// Value drop per unit of latent shock on tool-facing steps.
    pub jitter_strength: f64,
    /// Extra seconds per unit of latent shock on tool-facing steps.
    pub jitter_duration: f64,
    /// Fraction of instances whose confounders touch step values.
    pub confounded_fraction: f64,
    /// Fraction of steps affected by `τ` in a confounded instance.
    pub node_fraction: f64,
}

impl Default for ConfounderSpec {
    fn default() -> Self {
        Self {
            complexity_strength: 0.08,
            complexity_spread: 0.3,
            jitter_strength: 0.05,
            jitter_duration: 2.0,
            confounded_fraction: 0.5,
            node_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultSpec {
    pub target_step: Option<usize>,
    pub severity: Span,
    pub mode: FaultMode,
}

impl Default for FaultSpec {
    fn default() -> Self {
        Self {
            target_step: None,
            severity: Span::Range([0.6, 1.0]),
            mode: FaultMode::Degrade,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistorySpec {
    /// Reference runs of the same system rendered next to the failed run.
    pub runs: usize,
    /// Probability that the fault recurs in a reference run.
    pub fault_rate: f64,
}

impl Default for HistorySpec {
    fn default() -> Self {
        Self {
            runs: 60,
            fault_rate: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub agents: CountSpan,
    pub steps: CountSpan,
    /// Probability of each extra data edge beyond the backbone.
    pub dag_density: f64,
    /// Each step's backbone producer is drawn from this many preceding steps.
    pub backbone_span: usize,
    pub mechanisms: MechanismRanges,
    pub confounders: ConfounderSpec,
    pub fault: FaultSpec,
    pub history: HistorySpec,
    pub success_threshold: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            agents: CountSpan::Range([4, 8]),
            steps: CountSpan::Range([8, 20]),
            dag_density: 0.15,
            backbone_span: 3,
            mechanisms: MechanismRanges::default(),
            confounders: ConfounderSpec::default(),
            fault: FaultSpec::default(),
            history: HistorySpec::default(),
            success_threshold: DEFAULT_SUCCESS_THRESHOLD,
        }
    }
}

fn in_unit(field: &str, v: f64, open_low: bool) -> Result<()> {
    let ok = if open_low { v > 0.0 && v <= 1.0 } else { (0.0..=1.0).contains(&v) };
    if ok {
        Ok(())
    } else {
        let lo = if open_low { "(0" } else { "[0" };
        Err(Error::Config(format!("{field} must lie in {lo}, 1], got {v}")))
    }
}

impl SynthSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SynthSpec = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (a_lo, a_hi) = self.agents.bounds();
        let (s_lo, s_hi) = self.steps.bounds();
        if a_lo == 0 || a_lo > a_hi {
            return Err(Error::Config(format!("agents must be a positive range, got {:?}", self.agents)));
        }
        if s_lo < 2 || s_lo > s_hi {
            return Err(Error::Config(format!("steps must be a range of at least 2, got {:?}", self.steps)));
        }
        in_unit("dag_density", self.dag_density, false)?;
        if self.backbone_span == 0 {
            return Err(Error::Config("backbone_span must be at least 1".into()));
        }
        let (lo, hi) = self.fault.severity.bounds();
        in_unit("fault.severity", lo, true)?;
        in_unit("fault.severity", hi, true)?;
        if lo > hi {
            return Err(Error::Config("fault.severity range is reversed".into()));
        }
        if let Some(k) = self.fault.target_step {
            if k >= s_lo {
                return Err(Error::Config(format!(
                    "fault.target_step {k} must be below the step count {s_lo}"
                )));
            }
        }
        let (w_lo, w_hi) = self.mechanisms.weight_sum.bounds();
        if w_lo < 0.0 || w_lo > w_hi {
            return Err(Error::Config("mechanisms.weight_sum must be a nonnegative range".into()));
        }
        let (n_lo, n_hi) = self.mechanisms.noise.bounds();
        if n_lo < 0.0 || n_lo > n_hi {
            return Err(Error::Config("mechanisms.noise must be a nonnegative range".into()));
        }
        in_unit("confounders.confounded_fraction", self.confounders.confounded_fraction, false)?;
        in_unit("confounders.node_fraction", self.confounders.node_fraction, false)?;
        in_unit("history.fault_rate", self.history.fault_rate, false)?;
        in_unit("success_threshold", self.success_threshold, true)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub instance: String,
    pub mistake_agent: String,
    pub mistake_step: usize,
    /// Data-flow edges of the generating system.
    pub true_dag: Vec<Edge>,
    #[serde(default)]
    pub confounded: bool,
    #[serde(default)]
    pub severity: f64,
}

/// One generated run with everything needed for oracle checks.
#[derive(Debug, Clone)]
pub struct SynthRun {
    pub values: Vec<f64>,
    /// Effective noise, including confounder shocks and the fault, such that
    /// `true_model.simulate(&noise)` reproduces `values`.
    pub noise: Vec<f64>,
    pub outcome: f64,
    pub complexity: f64,
    pub shock: f64,
    pub faulted: bool,
}

#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub id: String,
    pub trace: ExecutionTrace,
    pub reference: Vec<ExecutionTrace>,
    pub truth: GroundTruth,
    pub true_model: StructuralModel,
    pub failed_run: SynthRun,
    pub reference_runs: Vec<SynthRun>,
}

struct System {
    agents: Vec<String>,
    step_agent: Vec<usize>,
    kinds: Vec<&'static str>,
    topics: Vec<&'static str>,
    data: DataDependencyGraph,
    model: StructuralModel,
    base_duration: Vec<f64>,
    complexity_nodes: BTreeSet<usize>,
    shock_nodes: BTreeSet<usize>,
    confounded: bool,
    temperature: f64,
}

fn build_system(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> System {
    let n_agents = spec.agents.sample(rng);
    let n = spec.steps.sample(rng).max(n_agents);
    let agents: Vec<String> = (0..n_agents)
        .map(|i| match AGENT_NAMES.get(i) {
            Some(name) => name.to_string(),
            None => format!("Agent{}", i + 1),
        })
        .collect();
    let mut step_agent: Vec<usize> = (0..n_agents).collect();
    while step_agent.len() < n {
        step_agent.push(rng.random_range(0..n_agents));
    }
    step_agent.shuffle(rng);

    let mut edges = BTreeSet::new();
    for j in 1..n {
        let lo = j.saturating_sub(spec.backbone_span);
        let backbone = rng.random_range(lo..j);
        edges.insert((backbone, j));
        for i in 0..j {
            if i != backbone && rng.random_bool(spec.dag_density) {
                edges.insert((i, j));
            }
        }
    }
    let kinds: Vec<&'static str> = (0..n).map(|_| *KINDS.choose(rng).unwrap()).collect();
    let topics: Vec<&'static str> = (0..n).map(|_| *TOPICS.choose(rng).unwrap()).collect();
    let base_duration: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let nodes: Vec<NodeInfo> = (0..n)
        .map(|i| NodeInfo {
            index: i,
            agent: agents[step_agent[i]].clone(),
            timestamp: i as f64,
        })
        .collect();
    let data = DataDependencyGraph { nodes, edges };
    let causal = invert(&data);

    let nominal = spec.mechanisms.nominal;
    let mechanisms = (0..n)
        .map(|v| {
            let parents = causal.parents(v);
            let sigma = spec.mechanisms.noise.sample(rng);
            if parents.is_empty() {
                return Mechanism::new(v, parents, vec![], nominal, sigma);
            }
            let total = spec.mechanisms.weight_sum.sample(rng);
            let raw: Vec<f64> = parents.iter().map(|_| rng.random_range(0.5..1.5)).collect();
            let s: f64 = raw.iter().sum();
            let weights = raw.iter().map(|w| w / s * total).collect();
            Mechanism::new(v, parents, weights, nominal * (1.0 - total), sigma)
        })
        .collect();
    let model = StructuralModel::new(&causal, mechanisms).expect("generated graph is acyclic");

    let confounded = rng.random_bool(spec.confounders.confounded_fraction);
    let complexity_nodes = (0..n)
        .filter(|_| rng.random_bool(spec.confounders.node_fraction))
        .collect();
    let mut shock_nodes: BTreeSet<usize> = (0..n)
        .filter(|&v| matches!(kinds[v], "tool_call" | "search"))
        .collect();
    if shock_nodes.is_empty() {
        shock_nodes.insert(rng.random_range(0..n));
    }
    System {
        agents,
        step_agent,
        kinds,
        topics,
        data,
        model,
        base_duration,
        complexity_nodes,
        shock_nodes,
        confounded,
        temperature: rng.random_range(0.0..1.0),
    }
}

fn run_system(
    spec: &SynthSpec,
    sys: &System,
    rng: &mut ChaCha8Rng,
    fault: Option<(usize, f64, FaultMode)>,
) -> SynthRun {
    let m = &sys.model;
    let n = m.len();
    let eps = m.sample_noise(rng.random());
    let complexity = Normal::new(0.0, spec.confounders.complexity_spread.max(1e-12))
        .unwrap()
        .sample(rng)
        .exp();
    let shock: f64 = Normal::new(0.0, 1.0).unwrap().sample(rng);
    let shock = shock.abs();
    let mut noise = eps;
    if sys.confounded {
        for &v in &sys.complexity_nodes {
            noise[v] -= spec.confounders.complexity_strength * (complexity - 1.0);
        }
        for &v in &sys.shock_nodes {
            noise[v] -= spec.confounders.jitter_strength * shock;
        }
    }
    let mut values = vec![0.0; n];
    for &v in m.topological_order() {
        let mech = &m.mechanisms[v];
        let base = mech.base(&values);
        let mut x = base + noise[v];
        if let Some((k, sev, mode)) = fault {
            if k == v {
                x = match mode {
                    FaultMode::Degrade => x * (1.0 - sev),
                    FaultMode::Withhold => 0.0,
                };
                noise[v] = x - base;
            }
        }
        values[v] = x;
    }
    SynthRun {
        outcome: m.readout(&values),
        values,
        noise,
        complexity,
        shock,
        faulted: fault.is_some(),
    }
}

fn render(
    spec: &SynthSpec,
    sys: &System,
    run: &SynthRun,
    rng: &mut ChaCha8Rng,
    id: String,
    withheld: Option<usize>,
) -> ExecutionTrace {
    let n = sys.model.len();
    let mut t = 0.0;
    let mut steps = Vec::with_capacity(n);
    for i in 0..n {
        let mut duration = (sys.base_duration[i] * (1.0 + 0.05 * Normal::new(0.0, 1.0).unwrap().sample(rng))).max(0.05);
        if sys.shock_nodes.contains(&i) {
            duration += spec.confounders.jitter_duration * run.shock;
        }
        let x = run.values[i];
        let agent = &sys.agents[sys.step_agent[i]];
        let payload = if withheld == Some(i) {
            String::new()
        } else {
            let mut p = format!("{agent} {} {}: result quality {x:.2}", sys.kinds[i], sys.topics[i]);
            if x < 0.4 {
                p.push_str(" (warning: low confidence output)");
            }
            p
        };
        let mut step = Step::new(i, agent.clone(), sys.kinds[i], payload, t);
        if sys.kinds[i] == "tool_call" {
            step.action.tool = Some("http_get".into());
        }
        step.context.insert("duration".into(), Value::from((duration * 1e6).round() / 1e6));
        step.inputs = sys
            .data
            .parents(i)
            .into_iter()
            .map(|p| ArtifactRef::new(p, format!("o{p}")))
            .collect();
        step.outputs = vec![format!("o{i}")];
        step.performance = Some(x.clamp(0.0, 1.0));
        steps.push(step);
        t += duration + 0.1;
        t = (t * 1e6).round() / 1e6;
    }
    let mut trace = ExecutionTrace::new(format!("synthetic {} task", sys.topics[0]), steps, run.outcome);
    trace.id = Some(id);
    trace.task_complexity = run.complexity;
    trace.agent_config.insert("temperature".into(), sys.temperature);
    trace.agent_config.insert("timeout".into(), 30.0);
    trace
}

const MAX_ATTEMPTS: usize = 200;

/// Generates instance `index` of a corpus; deterministic in `(spec.seed, index)`.
pub fn generate_instance(spec: &SynthSpec, index: usize) -> Result<SynthInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let id = format!("synth-{:04}", index);
    for _ in 0..MAX_ATTEMPTS {
        let sys = build_system(spec, &mut rng);
        let n = sys.model.len();
        for _ in 0..MAX_ATTEMPTS / 10 {
            let k = spec.fault.target_step.unwrap_or_else(|| rng.random_range(0..n));
            let severity = spec.fault.severity.sample(&mut rng);
            let run = run_system(spec, &sys, &mut rng, Some((k, severity, spec.fault.mode)));
            if run.outcome >= spec.success_threshold {
                continue;
            }
            return Ok(finish(spec, sys, run, k, severity, id, &mut rng));
        }
    }
    Err(Error::Config(format!(
        "could not produce a failing run for instance {index}; raise fault.severity"
    )))
}

fn finish(
    spec: &SynthSpec,
    sys: System,
    failed_run: SynthRun,
    k: usize,
    severity: f64,
    id: String,
    rng: &mut ChaCha8Rng,
) -> SynthInstance {
    let withheld = (spec.fault.mode == FaultMode::Withhold).then_some(k);
    let mut trace = render(spec, &sys, &failed_run, rng, id.clone(), withheld);
    let agent = sys.agents[sys.step_agent[k]].clone();
    trace.labels = Some(Labels {
        mistake_agent: agent.clone(),
        mistake_step: k,
    });
    let mut reference = Vec::with_capacity(spec.history.runs);
    let mut reference_runs = Vec::with_capacity(spec.history.runs);
    for r in 0..spec.history.runs {
        let fault = rng
            .random_bool(spec.history.fault_rate)
            .then(|| (k, severity * rng.random_range(0.5..=1.0), spec.fault.mode));
        let run = run_system(spec, &sys, rng, fault);
        let hidden = fault.and_then(|f| (f.2 == FaultMode::Withhold).then_some(k));
        reference.push(render(spec, &sys, &run, rng, format!("{id}-ref{r:03}"), hidden));
        reference_runs.push(run);
    }
    SynthInstance {
        truth: GroundTruth {
            instance: id.clone(),
            mistake_agent: agent,
            mistake_step: k,
            true_dag: sys.data.edges.iter().copied().collect(),
            confounded: sys.confounded,
            severity,
        },
        id,
        trace,
        reference,
        true_model: sys.model,
        failed_run,
        reference_runs,
    }
}

pub fn generate_corpus(spec: &SynthSpec, count: usize) -> Result<Vec<SynthInstance>> {
    spec.validate()?;
    (0..count)
        .into_par_iter()
        .map(|i| generate_instance(spec, i))
        .collect()
}

/// A corpus entry as stored on disk.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub id: String,
    pub trace: ExecutionTrace,
    pub reference: Option<Vec<ExecutionTrace>>,
    pub truth: Option<GroundTruth>,
}

pub fn trace_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.trace.jsonl"))
}

pub fn reference_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.reference.jsonl"))
}

pub fn truth_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.truth.json"))
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    std::fs::write(&path, text).map_err(|e| Error::io(path, e))
}

pub fn write_corpus(dir: &Path, instances: &[SynthInstance]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for inst in instances {
        write(trace_path(dir, &inst.id), &write_native(&inst.trace))?;
        write(reference_path(dir, &inst.id), &write_native_bundle(&inst.reference))?;
        let mut truth = serde_json::to_string_pretty(&inst.truth)?;
        truth.push('\n');
        write(truth_path(dir, &inst.id), &truth)?;
    }
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads every `<id>.trace.jsonl` in `dir` with its optional reference
/// bundle and ground truth, ordered by id.
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusEntry>> {
    let listing = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut ids: Vec<String> = Vec::new();
    for entry in listing {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().to_string();
        if let Some(id) = name.strip_suffix(".trace.jsonl") {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    if ids.is_empty() {
        return Err(Error::NoInstances(dir.to_path_buf()));
    }
    ids.into_iter()
        .map(|id| {
            let trace = parse_native_trace(&read(&trace_path(dir, &id))?)?;
            let rp = reference_path(dir, &id);
            let reference = if rp.exists() {
                Some(parse_native_bundle(&read(&rp)?)?)
            } else {
                None
            };
            let tp = truth_path(dir, &id);
            let truth = if tp.exists() {
                Some(serde_json::from_slice(&read(&tp)?)?)
            } else {
                None
            };
            Ok(CorpusEntry {
                id,
                trace,
                reference,
                truth,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub agent: String,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub instance: String,
    pub predicted: Option<Prediction>,
    pub agent_correct: bool,
    pub step_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub agent_accuracy: f64,
    pub step_accuracy: f64,
    pub n_instances: usize,
    pub outcomes: Vec<InstanceOutcome>,
    /// Instances without a prediction; counted as wrong.
    pub missing: Vec<String>,
}

pub fn evaluate(predictions: &[Option<Prediction>], truths: &[GroundTruth]) -> EvalMetrics {
    assert_eq!(predictions.len(), truths.len(), "one prediction slot per instance");
    let mut outcomes = Vec::with_capacity(truths.len());
    let mut missing = Vec::new();
    for (p, t) in predictions.iter().zip(truths) {
        if p.is_none() {
            missing.push(t.instance.clone());
        }
        outcomes.push(InstanceOutcome {
            instance: t.instance.clone(),
            agent_correct: p.as_ref().is_some_and(|p| p.agent == t.mistake_agent),
            step_correct: p.as_ref().is_some_and(|p| p.step == t.mistake_step),
            predicted: p.clone(),
        });
    }
    let n = outcomes.len();
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    EvalMetrics {
        agent_accuracy: frac(outcomes.iter().filter(|o| o.agent_correct).count()),
        step_accuracy: frac(outcomes.iter().filter(|o| o.step_correct).count()),
        n_instances: n,
        outcomes,
        missing,
    }
}

/// Uniform draw over distinct agents and over steps.
pub fn random_baseline(trace: &ExecutionTrace, seed: u64) -> Prediction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agents = trace.agents();
    Prediction {
        agent: agents[rng.random_range(0..agents.len())].clone(),
        step: rng.random_range(0..trace.len()),
    }
}
