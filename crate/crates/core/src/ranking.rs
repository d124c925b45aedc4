//! Step-level attribution: counterfactual step repairs, bootstrap stability
//! and the weighted final score.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scm::{NormalBaseline, StructuralModel};
use crate::stats;

pub const MIN_BOOTSTRAP: usize = 50;
pub const DEFAULT_BOOTSTRAP: usize = 200;
pub const DEFAULT_K_TOP: usize = 3;
pub const DEFAULT_BLOCK_LEN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalScoreWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for FinalScoreWeights {
    fn default() -> Self {
        Self {
            w1: 0.5,
            w2: 0.3,
            w3: 0.2,
        }
    }
}

impl FinalScoreWeights {
    /// Normalizes to unit sum. Weights must be nonnegative, not all zero.
    pub fn new(w1: f64, w2: f64, w3: f64) -> Result<Self> {
        let all = [w1, w2, w3];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(format!("weights must be nonnegative, got {all:?}")));
        }
        let s = w1 + w2 + w3;
        if s <= 0.0 {
            return Err(Error::Config("weights sum to zero".into()));
        }
        Ok(Self {
            w1: w1 / s,
            w2: w2 / s,
            w3: w3 / s,
        })
    }

    /// Parses `w1,w2,w3`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<f64> = text
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("weights {text:?} are not numbers")))?;
        match parts.as_slice() {
            [a, b, c] => Self::new(*a, *b, *c),
            _ => Err(Error::Config(format!("expected three weights, got {text:?}"))),
        }
    }
}

/// `E[Y | do(X_k repaired)] − Y_observed` under abducted noise.
pub fn step_intervention_delta(
    model: &StructuralModel,
    observed: &[f64],
    k: usize,
    baseline: NormalBaseline,
) -> Result<f64> {
    let y_obs = model.readout(observed);
    Ok(model.counterfactual_outcome(observed, &baseline.spec([k]))? - y_obs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    pub values: Vec<f64>,
    pub replicates: usize,
    /// Replicates whose rerun failed; they count as "not in top" for every step.
    pub failed_replicates: usize,
}

/// Moving-block bootstrap over `rows` sample rows. `replay` reruns discovery
/// on the resampled row indices and returns a ranking of steps (or `None` on
/// failure). Confidence of a step is the fraction of replicates that place it
/// in the top `k_top`.
pub fn bootstrap_confidence<F>(
    rows: usize,
    steps: usize,
    replay: F,
    replicates: usize,
    k_top: usize,
    block_len: usize,
    seed: u64,
) -> Result<Confidence>
where
    F: Fn(&[usize]) -> Option<Vec<usize>> + Sync,
{
    if replicates < MIN_BOOTSTRAP {
        return Err(Error::Config(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP} replicates, got {replicates}"
        )));
    }
    let tops: Vec<Option<Vec<usize>>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let idx = stats::moving_block_indices(rows, block_len, &mut rng);
            replay(&idx).map(|r| r.into_iter().take(k_top).collect())
        })
        .collect();
    let mut hits = vec![0usize; steps];
    let mut failed = 0;
    for top in &tops {
        match top {
            Some(t) => {
                for &s in t {
                    if s < steps {
                        hits[s] += 1;
                    }
                }
            }
            None => failed += 1,
        }
    }
    Ok(Confidence {
        values: hits.iter().map(|&h| h as f64 / replicates as f64).collect(),
        replicates,
        failed_replicates: failed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub ace: f64,
    pub delta: f64,
    pub confidence: f64,
    pub ace_normalized: f64,
    pub delta_normalized: f64,
    pub final_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRanking {
    pub records: Vec<StepRecord>,
    /// Steps by descending final score, ties to the earlier step.
    pub order: Vec<usize>,
    pub predicted_step: usize,
    pub weights: FinalScoreWeights,
}

/// Min-max scaling to `[0, 1]`; constant vectors map to 0.5.
pub fn min_max(xs: &[f64]) -> Vec<f64> {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.5; xs.len()];
    }
    xs.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

/// `w1·norm(|ACE|) + w2·norm(Δ) + w3·confidence`.
pub fn final_rank(ace: &[f64], deltas: &[f64], confidences: &[f64], weights: FinalScoreWeights) -> StepRanking {
    assert!(
        ace.len() == deltas.len() && deltas.len() == confidences.len() && !ace.is_empty(),
        "inputs must cover the same non-empty step set"
    );
    let magnitude: Vec<f64> = ace.iter().map(|a| a.abs()).collect();
    let an = min_max(&magnitude);
    let dn = min_max(deltas);
    let records: Vec<StepRecord> = (0..ace.len())
        .map(|k| StepRecord {
            step: k,
            ace: ace[k],
            delta: deltas[k],
            confidence: confidences[k],
            ace_normalized: an[k],
            delta_normalized: dn[k],
            final_score: weights.w1 * an[k] + weights.w2 * dn[k] + weights.w3 * confidences[k],
        })
        .collect();
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        records[b]
            .final_score
            .total_cmp(&records[a].final_score)
            .then(a.cmp(&b))
    });
    StepRanking {
        predicted_step: order[0],
        records,
        order,
        weights,
    }
}
