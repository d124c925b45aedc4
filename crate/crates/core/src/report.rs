//! Attribution reports: JSON for machines, markdown for people.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bottleneck::{AgentAttribution, BottleneckReport};
use crate::cdc::ace::AceScores;
use crate::cdc::orient::OrientationReason;
use crate::config::Config;
use crate::graph::Edge;
use crate::ranking::{Confidence, StepRanking};
use crate::scm::StructuralModel;
use crate::shapley::ShapleyEstimate;
use crate::synth::Prediction;

pub const REPORT_SCHEMA: &str = "mas-attribution/report/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientedEdge {
    pub from: usize,
    pub to: usize,
    pub reason: OrientationReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverySummary {
    pub samples: usize,
    /// Step variables first, the outcome last.
    pub variables: usize,
    pub precedence: Vec<usize>,
    pub adjacencies: Vec<Edge>,
    pub oriented: Vec<OrientedEdge>,
    pub ci_tests: usize,
    pub skipped_tests: usize,
    pub conflicts: Vec<String>,
    pub ace: AceScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLink {
    pub cause: usize,
    /// `None` is the task outcome.
    pub effect: Option<usize>,
    pub local_effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub schema: String,
    pub trace_id: String,
    pub outcome: f64,
    pub config: Config,
    /// "fitted" when reference runs were used, "prior" otherwise.
    pub model_source: String,
    pub notes: Vec<String>,
    pub observed: Vec<f64>,
    pub model: Option<StructuralModel>,
    pub shapley: Option<ShapleyEstimate>,
    pub bottleneck: Option<BottleneckReport>,
    pub agent: Option<AgentAttribution>,
    pub discovery: Option<DiscoverySummary>,
    pub confidence: Option<Confidence>,
    pub steps: Option<StepRanking>,
    pub predicted: Option<Prediction>,
    pub causal_chain: Vec<ChainLink>,
    pub diagnosis: Option<String>,
    pub features_degraded: bool,
    pub failure: Option<StageFailure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl AttributionReport {
    pub fn empty(trace_id: impl Into<String>, outcome: f64, config: Config) -> Self {
        Self {
            schema: REPORT_SCHEMA.to_string(),
            trace_id: trace_id.into(),
            outcome,
            config,
            model_source: String::new(),
            notes: Vec::new(),
            observed: Vec::new(),
            model: None,
            shapley: None,
            bottleneck: None,
            agent: None,
            discovery: None,
            confidence: None,
            steps: None,
            predicted: None,
            causal_chain: Vec::new(),
            diagnosis: None,
            features_degraded: false,
            failure: None,
            timings: None,
        }
    }

    pub fn low_confidence(&self) -> bool {
        self.agent.as_ref().is_some_and(|a| a.low_confidence)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Markdown summary. `timings` are shown when given, whether or not the
    /// JSON records them.
    pub fn to_markdown(&self, timings: Option<&BTreeMap<String, f64>>) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# Failure attribution: {}\n", self.trace_id);
        let _ = writeln!(md, "Observed outcome: {:.4} (success threshold {:.2})\n", self.outcome, self.config.success_threshold);
        if let Some(d) = &self.diagnosis {
            let _ = writeln!(md, "> {d}\n");
        }
        if let Some(f) = &self.failure {
            let _ = writeln!(md, "**Stage `{}` failed:** {}\n", f.stage, f.message);
        }
        if let Some(b) = &self.bottleneck {
            md.push_str("## Agents\n\n| rank | agent | φ | Y_cf | I | BS |\n|---:|---|---:|---:|---:|---:|\n");
            for (rank, name) in b.ranking.iter().enumerate() {
                let r = b.record(name).expect("ranked agent has a record");
                let _ = writeln!(
                    md,
                    "| {} | {} | {:.4} | {:.4} | {} | {:.4} |",
                    rank + 1,
                    r.agent,
                    r.shapley,
                    r.y_cf,
                    r.indicator,
                    r.score
                );
            }
            if self.low_confidence() {
                md.push_str("\nAll bottleneck scores were zero; the agent was chosen without the success indicator (low confidence).\n");
            }
            md.push('\n');
        }
        if let Some(s) = &self.steps {
            md.push_str("## Steps\n\n| rank | step | ACE | Δ | confidence | score |\n|---:|---:|---:|---:|---:|---:|\n");
            for (rank, &k) in s.order.iter().enumerate() {
                let r = &s.records[k];
                let _ = writeln!(
                    md,
                    "| {} | {} | {:.4} | {:.4} | {:.2} | {:.4} |",
                    rank + 1,
                    r.step,
                    r.ace,
                    r.delta,
                    r.confidence,
                    r.final_score
                );
            }
            md.push('\n');
        }
        if !self.causal_chain.is_empty() {
            md.push_str("## Causal chain\n\n");
            for link in &self.causal_chain {
                let effect = link.effect.map_or("outcome".to_string(), |e| format!("step {e}"));
                let _ = writeln!(md, "- step {} → {} (local effect {:.4})", link.cause, effect, link.local_effect);
            }
            md.push('\n');
        }
        if !self.notes.is_empty() {
            md.push_str("## Notes\n\n");
            for n in &self.notes {
                let _ = writeln!(md, "- {n}");
            }
            md.push('\n');
        }
        if let Some(t) = timings.or(self.timings.as_ref()) {
            md.push_str("## Timings (ms)\n\n");
            for (stage, ms) in t {
                let _ = writeln!(md, "- {stage}: {ms:.1}");
            }
        }
        md
    }
}

/// Fills the narrative template.
pub fn diagnosis_sentence(
    agent: &str,
    bs: f64,
    phi: f64,
    step: usize,
    ace: f64,
    delta: f64,
    confidence: f64,
    chain: &[ChainLink],
) -> String {
    let mut path = vec![step.to_string()];
    for link in chain {
        path.push(link.effect.map_or("outcome".to_string(), |e| e.to_string()));
    }
    if chain.is_empty() {
        path.push("outcome".into());
    }
    format!(
        "Agent {agent} is the primary bottleneck (BS={bs:.4}, φ̂={phi:.4}). The decisive step is {step} (ACE={ace:.4}, Δ={delta:.4}, confidence={confidence:.2}). Causal chain: {}.",
        path.join("→")
    )
}
