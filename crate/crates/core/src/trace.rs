//! Execution trajectories of a multi-agent run and their on-disk formats.
//!
//! A trace is an ordered list of steps, each carrying the acting agent, the
//! action record, a timestamp, a context snapshot and the artifacts it
//! consumed and produced. Two readers are provided: the native
//! line-delimited format (one header object followed by one object per
//! step) and an adapter for Who&When-style annotated conversation logs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Default Jaccard threshold used when inferring artifact links from text.
pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.4;

/// Artifact id standing for "the whole output of a step"; used by inferred links.
pub const WHOLE_OUTPUT: &str = "*";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: String,
    pub payload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
}

/// Reference to an artifact produced by an earlier step, `step:<idx>/<artifact-id>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArtifactRef {
    pub step: usize,
    pub artifact: String,
}

impl ArtifactRef {
    pub fn new(step: usize, artifact: impl Into<String>) -> Self {
        Self {
            step,
            artifact: artifact.into(),
        }
    }

    pub fn is_whole_output(&self) -> bool {
        self.artifact == WHOLE_OUTPUT
    }
}

impl fmt::Display for ArtifactRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step:{}/{}", self.step, self.artifact)
    }
}

impl FromStr for ArtifactRef {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let rest = s
            .strip_prefix("step:")
            .ok_or_else(|| format!("artifact reference {s:?} must start with \"step:\""))?;
        let (idx, artifact) = rest
            .split_once('/')
            .ok_or_else(|| format!("artifact reference {s:?} lacks \"/<artifact-id>\""))?;
        let step = idx
            .parse::<usize>()
            .map_err(|_| format!("artifact reference {s:?} has a non-numeric step index"))?;
        if artifact.is_empty() {
            return Err(format!("artifact reference {s:?} has an empty artifact id"));
        }
        Ok(Self::new(step, artifact))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub index: usize,
    pub agent: String,
    pub action: Action,
    /// Seconds since trace start.
    pub timestamp: f64,
    pub context: BTreeMap<String, Value>,
    pub inputs: Vec<ArtifactRef>,
    pub outputs: Vec<String>,
    /// Observed performance in `[0, 1]`; absent in raw logs.
    pub performance: Option<f64>,
}

impl Step {
    pub fn new(index: usize, agent: impl Into<String>, kind: impl Into<String>, payload: impl Into<String>, timestamp: f64) -> Self {
        Self {
            index,
            agent: agent.into(),
            action: Action {
                kind: kind.into(),
                payload: payload.into(),
                tool: None,
            },
            timestamp,
            context: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            performance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub mistake_agent: String,
    pub mistake_step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    pub id: Option<String>,
    pub task: String,
    pub steps: Vec<Step>,
    /// Observable task complexity, strictly positive.
    pub task_complexity: f64,
    /// Named agent configuration scalars (reasoning, temperature, timeout, ...).
    pub agent_config: BTreeMap<String, f64>,
    /// Task success score in `[0, 1]`.
    pub outcome: f64,
    pub labels: Option<Labels>,
    /// Header fields this reader does not interpret, kept verbatim.
    pub extra: BTreeMap<String, Value>,
}

impl ExecutionTrace {
    pub fn new(task: impl Into<String>, steps: Vec<Step>, outcome: f64) -> Self {
        Self {
            id: None,
            task: task.into(),
            steps,
            task_complexity: 1.0,
            agent_config: BTreeMap::new(),
            outcome,
            labels: None,
            extra: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Distinct agents in order of first appearance.
    pub fn agents(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for step in &self.steps {
            if seen.insert(step.agent.as_str()) {
                out.push(step.agent.clone());
            }
        }
        out
    }

    pub fn first_appearance(&self, agent: &str) -> Option<usize> {
        self.steps.iter().position(|s| s.agent == agent)
    }

    /// Per-step performance values, if every step carries one.
    pub fn performance_vector(&self) -> Option<Vec<f64>> {
        self.steps.iter().map(|s| s.performance).collect()
    }

    /// Index of the step whose outputs contain `artifact_ref`, if it resolves.
    pub fn resolve(&self, artifact_ref: &ArtifactRef) -> Option<usize> {
        let target = self.steps.get(artifact_ref.step)?;
        if artifact_ref.is_whole_output() || target.outputs.iter().any(|o| *o == artifact_ref.artifact) {
            Some(artifact_ref.step)
        } else {
            None
        }
    }

    /// Resolved `(producer, consumer)` step pairs, deduplicated and sorted.
    pub fn links(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for step in &self.steps {
            for r in &step.inputs {
                if let Some(src) = self.resolve(r) {
                    if src < step.index {
                        out.insert((src, step.index));
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.len() < 2 {
            return Err(Error::Invariant(format!(
                "trace needs at least 2 steps, found {}",
                self.steps.len()
            )));
        }
        if !(self.task_complexity > 0.0 && self.task_complexity.is_finite()) {
            return Err(Error::Invariant(format!(
                "task complexity must be positive, found {}",
                self.task_complexity
            )));
        }
        if !(0.0..=1.0).contains(&self.outcome) {
            return Err(Error::Invariant(format!(
                "outcome must lie in [0,1], found {}",
                self.outcome
            )));
        }
        for (pos, step) in self.steps.iter().enumerate() {
            if step.index != pos {
                return Err(Error::Invariant(format!(
                    "step indices must be contiguous from 0: found {} at position {pos}",
                    step.index
                )));
            }
            if !(step.timestamp >= 0.0 && step.timestamp.is_finite()) {
                return Err(Error::Invariant(format!(
                    "timestamp must be a nonnegative number at index {pos}"
                )));
            }
            if pos > 0 && step.timestamp < self.steps[pos - 1].timestamp {
                return Err(Error::Invariant(format!(
                    "nondecreasing timestamps violated at index {pos}"
                )));
            }
            if let Some(p) = step.performance {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Invariant(format!(
                        "performance must lie in [0,1] at index {pos}, found {p}"
                    )));
                }
            }
            for r in &step.inputs {
                if self.resolve(r).is_some() && r.step >= pos {
                    return Err(Error::Invariant(format!(
                        "input {r} of step {pos} does not resolve to a strictly earlier step"
                    )));
                }
            }
        }
        if let Some(labels) = &self.labels {
            if labels.mistake_step >= self.steps.len() {
                return Err(Error::Invariant(format!(
                    "label mistake_step {} is not a valid step index",
                    labels.mistake_step
                )));
            }
            if self.first_appearance(&labels.mistake_agent).is_none() {
                return Err(Error::Invariant(format!(
                    "label mistake_agent {:?} does not appear in the trace",
                    labels.mistake_agent
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Native line-delimited format

#[derive(Deserialize)]
struct RawHeader {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    task: String,
    #[serde(default = "default_complexity")]
    complexity: f64,
    #[serde(default)]
    agent_config: BTreeMap<String, f64>,
    outcome: f64,
    #[serde(default)]
    labels: Option<Labels>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

fn default_complexity() -> f64 {
    1.0
}

#[derive(Deserialize)]
struct RawStep {
    idx: usize,
    agent: String,
    action: Action,
    t: f64,
    #[serde(default)]
    ctx: BTreeMap<String, Value>,
    #[serde(default, rename = "in")]
    inputs: Vec<String>,
    #[serde(default, rename = "out")]
    outputs: Vec<String>,
    #[serde(default)]
    perf: Option<f64>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

fn is_step_object(value: &Value) -> bool {
    value.get("idx").is_some()
}

fn header_from(value: Value, line: usize) -> Result<ExecutionTrace> {
    let raw: RawHeader = serde_json::from_value(value).map_err(|e| Error::Malformed {
        line,
        message: format!("header: {e}"),
    })?;
    Ok(ExecutionTrace {
        id: raw.id,
        task: raw.task,
        steps: Vec::new(),
        task_complexity: raw.complexity,
        agent_config: raw.agent_config,
        outcome: raw.outcome,
        labels: raw.labels,
        extra: raw.extra,
    })
}

fn step_from(value: Value, line: usize) -> Result<Step> {
    let raw: RawStep = serde_json::from_value(value).map_err(|e| Error::Malformed {
        line,
        message: format!("step: {e}"),
    })?;
    let mut context = raw.ctx;
    for (k, v) in raw.extra {
        context.entry(k).or_insert(v);
    }
    let inputs = raw
        .inputs
        .iter()
        .map(|s| s.parse::<ArtifactRef>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|message| Error::Malformed { line, message })?;
    Ok(Step {
        index: raw.idx,
        agent: raw.agent,
        action: raw.action,
        timestamp: raw.t,
        context,
        inputs,
        outputs: raw.outputs,
        performance: raw.perf,
    })
}

fn parse_lines(bytes: &[u8]) -> Result<Vec<(usize, Value)>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Malformed {
        line: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(trimmed).map_err(|e| Error::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !value.is_object() {
            return Err(Error::Malformed {
                line: i + 1,
                message: "expected a JSON object".into(),
            });
        }
        out.push((i + 1, value));
    }
    Ok(out)
}

/// Parses a single trace in the native line-delimited format and validates it.
pub fn parse_native_trace(bytes: &[u8]) -> Result<ExecutionTrace> {
    let mut traces = parse_records(bytes)?;
    match traces.len() {
        0 => Err(Error::Malformed {
            line: 1,
            message: "empty input, expected a header object".into(),
        }),
        1 => Ok(traces.remove(0)),
        n => Err(Error::Malformed {
            line: 0,
            message: format!("expected one trace, found {n} headers"),
        }),
    }
}

/// Parses a bundle of concatenated native traces (each header starts a new trace).
pub fn parse_native_bundle(bytes: &[u8]) -> Result<Vec<ExecutionTrace>> {
    parse_records(bytes)
}

fn parse_records(bytes: &[u8]) -> Result<Vec<ExecutionTrace>> {
    let mut traces: Vec<ExecutionTrace> = Vec::new();
    for (line, value) in parse_lines(bytes)? {
        if is_step_object(&value) {
            let step = step_from(value, line)?;
            match traces.last_mut() {
                Some(trace) => trace.steps.push(step),
                None => {
                    return Err(Error::Malformed {
                        line,
                        message: "step record before any header".into(),
                    })
                }
            }
        } else {
            traces.push(header_from(value, line)?);
        }
    }
    for trace in &traces {
        trace.validate()?;
    }
    Ok(traces)
}

fn step_to_value(step: &Step) -> Value {
    let mut obj = Map::new();
    obj.insert("idx".into(), Value::from(step.index));
    obj.insert("agent".into(), Value::from(step.agent.clone()));
    obj.insert(
        "action".into(),
        serde_json::to_value(&step.action).expect("action serializes"),
    );
    obj.insert("t".into(), Value::from(step.timestamp));
    obj.insert(
        "ctx".into(),
        Value::Object(step.context.clone().into_iter().collect()),
    );
    obj.insert(
        "in".into(),
        Value::from(step.inputs.iter().map(|r| r.to_string()).collect::<Vec<_>>()),
    );
    obj.insert("out".into(), Value::from(step.outputs.clone()));
    if let Some(p) = step.performance {
        obj.insert("perf".into(), Value::from(p));
    }
    Value::Object(obj)
}

fn header_to_value(trace: &ExecutionTrace) -> Value {
    let mut obj: Map<String, Value> = trace.extra.clone().into_iter().collect();
    if let Some(id) = &trace.id {
        obj.insert("id".into(), Value::from(id.clone()));
    }
    obj.insert("task".into(), Value::from(trace.task.clone()));
    obj.insert("complexity".into(), Value::from(trace.task_complexity));
    obj.insert(
        "agent_config".into(),
        serde_json::to_value(&trace.agent_config).expect("config serializes"),
    );
    obj.insert("outcome".into(), Value::from(trace.outcome));
    if let Some(labels) = &trace.labels {
        obj.insert(
            "labels".into(),
            serde_json::to_value(labels).expect("labels serialize"),
        );
    }
    Value::Object(obj)
}

/// Renders a trace in the native line-delimited format.
pub fn write_native(trace: &ExecutionTrace) -> String {
    let mut out = String::new();
    out.push_str(&header_to_value(trace).to_string());
    out.push('\n');
    for step in &trace.steps {
        out.push_str(&step_to_value(step).to_string());
        out.push('\n');
    }
    out
}

pub fn write_native_bundle<'a>(traces: impl IntoIterator<Item = &'a ExecutionTrace>) -> String {
    traces.into_iter().map(write_native).collect()
}

// ---------------------------------------------------------------------------
// Who&When adapter

/// Parses one Who&When-style instance.
///
/// Each `history` entry becomes a step; the agent is the entry's `name`,
/// falling back to `role`. Missing timestamps become the entry ordinal.
/// `mistake_agent` / `mistake_step` (0-based into `history`) become labels.
pub fn parse_whowhen(bytes: &[u8]) -> Result<ExecutionTrace> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| Error::Malformed {
        line: e.line(),
        message: e.to_string(),
    })?;
    let history = doc
        .get("history")
        .and_then(Value::as_array)
        .filter(|h| !h.is_empty())
        .ok_or_else(|| Error::Schema("missing or empty history".into()))?;

    let mut steps = Vec::with_capacity(history.len());
    for (i, entry) in history.iter().enumerate() {
        let obj = entry
            .as_object()
            .ok_or_else(|| Error::Schema(format!("history entry {i} is not an object")))?;
        let role = obj.get("role").and_then(Value::as_str);
        let name = obj.get("name").and_then(Value::as_str);
        let agent = name.or(role).unwrap_or("unknown").to_string();
        let content = match obj.get("content") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Null) | None => String::new(),
            Some(other) => other.to_string(),
        };
        let timestamp = obj
            .get("timestamp")
            .and_then(Value::as_f64)
            .unwrap_or(i as f64);
        let mut step = Step::new(i, agent, role.unwrap_or("message"), content, timestamp);
        for (k, v) in obj {
            if !matches!(k.as_str(), "content" | "role" | "name" | "timestamp") {
                step.context.insert(k.clone(), v.clone());
            }
        }
        steps.push(step);
    }

    let outcome = match doc.get("is_correct").and_then(Value::as_bool) {
        Some(true) => 1.0,
        _ => 0.0,
    };
    let mut trace = ExecutionTrace::new(
        doc.get("question").and_then(Value::as_str).unwrap_or(""),
        steps,
        outcome,
    );
    trace.id = doc
        .get("instance_id")
        .or_else(|| doc.get("question_ID"))
        .or_else(|| doc.get("id"))
        .map(|v| v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string()));
    if let Some(v) = doc.get("ground_truth") {
        trace.extra.insert("ground_truth".into(), v.clone());
    }

    let mistake_step = match doc.get("mistake_step") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => n.as_u64().map(|n| n as usize),
        Some(Value::String(s)) => s.trim().parse::<usize>().ok(),
        Some(_) => None,
    };
    let mistake_agent = doc.get("mistake_agent").and_then(Value::as_str);
    match (mistake_agent, mistake_step) {
        (Some(agent), Some(step)) => {
            if step >= trace.steps.len() {
                return Err(Error::Schema(format!(
                    "annotation references step {step} but history has {} entries",
                    trace.steps.len()
                )));
            }
            let agent = match_agent(&trace, agent, step).ok_or_else(|| {
                Error::Schema(format!("annotated mistake_agent {agent:?} never speaks"))
            })?;
            trace.labels = Some(Labels {
                mistake_agent: agent,
                mistake_step: step,
            });
        }
        (None, None) => {}
        _ => {
            return Err(Error::Schema(
                "annotation needs both mistake_agent and mistake_step".into(),
            ))
        }
    }
    trace.validate()?;
    Ok(trace)
}

// Annotated names sometimes differ from history names in case or suffix
// ("Orchestrator" vs "Orchestrator (thought)").
fn match_agent(trace: &ExecutionTrace, annotated: &str, step: usize) -> Option<String> {
    if trace.first_appearance(annotated).is_some() {
        return Some(annotated.to_string());
    }
    let lower = annotated.to_lowercase();
    let at_step = &trace.steps[step].agent;
    if at_step.to_lowercase().starts_with(&lower) {
        return Some(at_step.clone());
    }
    trace
        .agents()
        .into_iter()
        .find(|a| a.to_lowercase() == lower || a.to_lowercase().starts_with(&lower))
}

/// Reads a trace file. `.json` files holding an object with a `history`
/// array go through the Who&When adapter; everything else is read as native
/// JSONL. A trace without an id takes the file name up to its first dot.
pub fn read_trace_file(path: &std::path::Path) -> Result<ExecutionTrace> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let whowhen = path.extension().is_some_and(|e| e == "json")
        && serde_json::from_slice::<Value>(&bytes).is_ok_and(|v| v.get("history").is_some());
    let mut trace = if whowhen {
        parse_whowhen(&bytes)?
    } else {
        parse_native_trace(&bytes)?
    };
    if trace.id.is_none() {
        let name = path.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default();
        trace.id = Some(name.split('.').next().unwrap_or("trace").to_string());
    }
    Ok(trace)
}

/// Reads a native bundle of reference runs.
pub fn read_bundle_file(path: &std::path::Path) -> Result<Vec<ExecutionTrace>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_native_bundle(&bytes)
}

// ---------------------------------------------------------------------------
// Link inference

/// Lowercased alphanumeric tokens.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Adds `step:<i>/*` inputs to step `j` wherever the payload token overlap of
/// `i` and `j` (i < j) reaches `overlap_threshold` and no resolvable link
/// between them exists yet. Explicit references are left untouched.
pub fn infer_io_links(trace: &ExecutionTrace, overlap_threshold: f64) -> ExecutionTrace {
    let existing = trace.links();
    let toks: Vec<BTreeSet<String>> = trace
        .steps
        .iter()
        .map(|s| tokens(&s.action.payload))
        .collect();
    let mut out = trace.clone();
    for j in 0..trace.steps.len() {
        for i in 0..j {
            if existing.contains(&(i, j)) {
                continue;
            }
            if jaccard(&toks[i], &toks[j]) >= overlap_threshold {
                out.steps[j].inputs.push(ArtifactRef::new(i, WHOLE_OUTPUT));
            }
        }
    }
    out
}
