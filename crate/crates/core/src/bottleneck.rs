//! Agent-level attribution through the integrated bottleneck score
//! `BS_j = φ_j · (Y_j^cf − Y^original) · I[Y_j^cf ≥ θ_success]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scm::{NormalBaseline, StructuralModel};
use crate::shapley::ShapleyEstimate;

pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent: String,
    pub shapley: f64,
    pub y_original: f64,
    pub y_cf: f64,
    pub indicator: u8,
    pub score: f64,
    pub first_step: usize,
}

impl AgentRecord {
    pub fn new(agent: impl Into<String>, shapley: f64, y_original: f64, y_cf: f64, threshold: f64, first_step: usize) -> Self {
        let indicator = u8::from(y_cf >= threshold);
        Self {
            agent: agent.into(),
            shapley,
            y_original,
            y_cf,
            indicator,
            score: shapley * (y_cf - y_original) * indicator as f64,
            first_step,
        }
    }

    pub fn improvement(&self) -> f64 {
        self.y_cf - self.y_original
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottleneckReport {
    pub records: Vec<AgentRecord>,
    pub ranking: Vec<String>,
    pub success_threshold: f64,
}

impl BottleneckReport {
    pub fn from_records(records: Vec<AgentRecord>, success_threshold: f64) -> Self {
        let mut idx: Vec<usize> = (0..records.len()).collect();
        idx.sort_by(|&a, &b| preference(&records[b], &records[a], |r| r.score));
        let ranking = idx.iter().map(|&i| records[i].agent.clone()).collect();
        Self {
            records,
            ranking,
            success_threshold,
        }
    }

    pub fn record(&self, agent: &str) -> Option<&AgentRecord> {
        self.records.iter().find(|r| r.agent == agent)
    }
}

// Ordering where "greater" is preferred: higher key, then higher φ, then earlier first step.
fn preference(a: &AgentRecord, b: &AgentRecord, key: impl Fn(&AgentRecord) -> f64) -> std::cmp::Ordering {
    key(a)
        .total_cmp(&key(b))
        .then(a.shapley.total_cmp(&b.shapley))
        .then(b.first_step.cmp(&a.first_step))
}

/// Scores every agent by repairing all of its nodes in the counterfactual world.
///
/// `owner[v]` is the index into `shapley.players` of the agent that owns node
/// `v`; `first_steps[j]` is the first step of player `j`.
pub fn bottleneck_scores(
    model: &StructuralModel,
    shapley: &ShapleyEstimate,
    observed: &[f64],
    trace_outcome: f64,
    owner: &[usize],
    first_steps: &[usize],
    threshold: f64,
    baseline: NormalBaseline,
) -> Result<BottleneckReport> {
    if trace_outcome >= threshold {
        return Err(Error::NotFailed {
            outcome: trace_outcome,
            threshold,
        });
    }
    let y_original = model.readout(observed);
    let mut records = Vec::with_capacity(shapley.players.len());
    for (j, agent) in shapley.players.iter().enumerate() {
        let nodes = (0..owner.len()).filter(|&v| owner[v] == j);
        let y_cf = model.counterfactual_outcome(observed, &baseline.spec(nodes))?;
        records.push(AgentRecord::new(
            agent.clone(),
            shapley.values[j],
            y_original,
            y_cf,
            threshold,
            first_steps[j],
        ));
    }
    Ok(BottleneckReport::from_records(records, threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAttribution {
    pub agent: String,
    pub low_confidence: bool,
}

/// Highest bottleneck score wins. When every score is zero the indicator is
/// dropped and the result is flagged low-confidence.
pub fn attribute_agent(report: &BottleneckReport) -> Option<AgentAttribution> {
    let all_zero = report.records.iter().all(|r| r.score == 0.0);
    let best = if all_zero {
        report
            .records
            .iter()
            .max_by(|a, b| preference(a, b, |r| r.shapley * r.improvement()))
    } else {
        report.records.iter().max_by(|a, b| preference(a, b, |r| r.score))
    }?;
    Some(AgentAttribution {
        agent: best.agent.clone(),
        low_confidence: all_zero,
    })
}
