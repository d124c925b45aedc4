//! End-to-end attribution of one failed trace, and corpus evaluation.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bottleneck::{attribute_agent, bottleneck_scores};
use crate::cdc::ace::{rank_by_ace, strongest_path, unit_weights};
use crate::cdc::{compute_ace, context_weights, discover_skeleton, local_effects, orient_edges, SkeletonParams};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::features::{extract_features, raw_features, ContextEncoder, PooledEncoder, SimilarityProvider, FEATURE_DIM};
use crate::graph::{build_data_graph, invert, DataDependencyGraph, PerformanceCausalGraph};
use crate::ranking::{bootstrap_confidence, final_rank, step_intervention_delta};
use crate::report::{diagnosis_sentence, AttributionReport, ChainLink, DiscoverySummary, OrientedEdge, StageFailure};
use crate::scm::{fit_mechanisms, min_corpus, StructuralModel};
use crate::shapley::{characteristic_from_scm, exact_shapley, mc_shapley_adaptive};
use crate::stats;
use crate::synth::{evaluate, random_baseline, CorpusEntry, EvalMetrics, GroundTruth, Prediction};
use crate::trace::{infer_io_links, ExecutionTrace};

pub const STAGES: [&str; 9] = [
    "ingest",
    "graph",
    "model",
    "shapley",
    "bottleneck",
    "features",
    "discovery",
    "ranking",
    "report",
];

/// A report plus per-stage wall-clock milliseconds, which are kept out of the
/// report unless the config asks for them.
#[derive(Debug, Clone)]
pub struct AttributionRun {
    pub report: AttributionReport,
    pub timings: BTreeMap<String, f64>,
}

/// Per-step performance guess for traces that carry none: starts at 1 and
/// loses 0.25 per error token, 0.5 for an empty payload.
pub fn derive_performance(trace: &ExecutionTrace) -> Vec<f64> {
    trace
        .steps
        .iter()
        .map(|s| {
            let p = &s.action.payload;
            let mut v = 1.0 - 0.25 * crate::features::error_token_count(p) as f64;
            if p.trim().is_empty() {
                v -= 0.5;
            }
            v.clamp(0.0, 1.0)
        })
        .collect()
}

fn has_no_inputs(trace: &ExecutionTrace) -> bool {
    trace.steps.iter().all(|s| s.inputs.is_empty())
}

/// Checks the trace and reference runs and returns the trace with links
/// inferred when it has no explicit inputs at all.
pub fn ingest(trace: &ExecutionTrace, reference: Option<&[ExecutionTrace]>, config: &Config) -> Result<ExecutionTrace> {
    config.validate()?;
    trace.validate()?;
    if trace.outcome >= config.success_threshold {
        return Err(Error::NotFailed {
            outcome: trace.outcome,
            threshold: config.success_threshold,
        });
    }
    for (i, r) in reference.unwrap_or(&[]).iter().enumerate() {
        r.validate()?;
        if r.len() != trace.len() || r.steps.iter().zip(&trace.steps).any(|(a, b)| a.agent != b.agent) {
            return Err(Error::TopologyMismatch(format!(
                "reference run {i} does not match the trace's steps and agents"
            )));
        }
    }
    if has_no_inputs(trace) {
        Ok(infer_io_links(trace, config.overlap_threshold))
    } else {
        Ok(trace.clone())
    }
}

/// Sample matrix and context rows fed to discovery.
struct DiscoveryInput {
    /// samples × (steps + 1); the last column is the outcome.
    rows: Vec<Vec<f64>>,
    context: Option<Vec<Vec<f64>>>,
    /// Standardized features of the failed trace per variable.
    node_features: Vec<Vec<f64>>,
    failed_context: Vec<f64>,
    order: Vec<usize>,
}

struct Discovered {
    skeleton: crate::cdc::CausalSkeleton,
    oriented: crate::cdc::OrientedGraph,
    ace: crate::cdc::AceScores,
}

fn matrix(rows: &[Vec<f64>], idx: &[usize]) -> DMatrix<f64> {
    let cols = rows[0].len();
    DMatrix::from_fn(idx.len(), cols, |r, c| rows[idx[r]][c])
}

fn standardize_columns(m: &mut DMatrix<f64>) {
    for c in 0..m.ncols() {
        let col: Vec<f64> = m.column(c).iter().copied().collect();
        let z = stats::standardize(&col);
        for (r, v) in z.into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
}

fn discover(input: &DiscoveryInput, idx: &[usize], config: &Config) -> Result<Discovered> {
    let mut data = matrix(&input.rows, idx);
    if config.cdc.standardize {
        standardize_columns(&mut data);
    }
    let context = input.context.as_ref().map(|c| matrix(c, idx));
    let params = SkeletonParams {
        alpha_sig: config.cdc.alpha_sig,
        max_cond: config.cdc.max_cond,
        context_conditioning: config.cdc.context_conditioning,
    };
    let skeleton = discover_skeleton(&data, context.as_ref(), &input.order, &params)?;
    let oriented = orient_edges(&skeleton);
    let conditioned = match (&context, config.cdc.context_conditioning) {
        (Some(c), true) => stats::residualize(&data, c).0,
        _ => data,
    };
    let local = local_effects(&oriented, &conditioned);
    let weights = if config.cdc.context_conditioning && input.context.is_some() {
        context_weights(&oriented, &input.node_features, &input.failed_context, config.cdc.epsilon)
    } else {
        unit_weights(&oriented)
    };
    let outcome = input.order.len() - 1;
    let ace = compute_ace(&oriented, &local, &weights, outcome, config.cdc.path_cap);
    Ok(Discovered {
        skeleton,
        oriented,
        ace,
    })
}

fn precedence(n: usize, inverted: bool) -> Vec<usize> {
    let mut order: Vec<usize> = if inverted { (0..n).rev().collect() } else { (0..n).collect() };
    order.push(n);
    order
}

struct Runner<'a> {
    config: &'a Config,
    report: AttributionReport,
    timings: BTreeMap<String, f64>,
}

impl Runner<'_> {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut AttributionReport) -> Result<T>) -> Option<T> {
        let start = Instant::now();
        let out = f(&mut self.report);
        self.timings
            .insert(name.to_string(), start.elapsed().as_secs_f64() * 1e3);
        match out {
            Ok(v) => Some(v),
            Err(e) => {
                self.report.failure = Some(StageFailure {
                    stage: name.to_string(),
                    message: e.to_string(),
                });
                None
            }
        }
    }

    fn finish(mut self) -> AttributionRun {
        if self.config.record_timings {
            self.report.timings = Some(self.timings.clone());
        }
        AttributionRun {
            report: self.report,
            timings: self.timings,
        }
    }
}

/// Runs every stage on a failed trace. Input problems (invalid trace or
/// config, a trace that did not fail, mismatched reference runs) are
/// returned as errors; a failure inside a later stage yields a partial
/// report naming the stage.
pub fn attribute(
    trace: &ExecutionTrace,
    reference: Option<&[ExecutionTrace]>,
    config: &Config,
    provider: &dyn SimilarityProvider,
) -> Result<AttributionRun> {
    let start = Instant::now();
    let original = trace;
    let trace = ingest(trace, reference, config)?;
    let reference = reference.filter(|r| !r.is_empty());
    let trace_id = trace.id.clone().unwrap_or_else(|| "trace".to_string());
    let mut run = Runner {
        config,
        report: AttributionReport::empty(trace_id, trace.outcome, config.clone()),
        timings: BTreeMap::new(),
    };
    run.timings
        .insert("ingest".into(), start.elapsed().as_secs_f64() * 1e3);
    if has_no_inputs(original) {
        run.report.notes.push(format!(
            "trace has no explicit inputs; links inferred at overlap {:.2}",
            config.overlap_threshold
        ));
    }

    let Some((data, causal)) = run.stage("graph", |_| {
        let data = build_data_graph(&trace);
        let causal = if config.invert { invert(&data) } else { data.without_inversion() };
        Ok((data, causal))
    }) else {
        return Ok(run.finish());
    };

    let agents = trace.agents();
    let owner: Vec<usize> = trace
        .steps
        .iter()
        .map(|s| agents.iter().position(|a| *a == s.agent).expect("agent listed"))
        .collect();
    let first_steps: Vec<usize> = agents
        .iter()
        .map(|a| trace.first_appearance(a).expect("agent appears"))
        .collect();

    let Some((model, observed)) = run.stage("model", |rep| {
        let observed = match trace.performance_vector() {
            Some(v) => v,
            None => {
                rep.notes
                    .push("trace has no performance values; derived them from payload error tokens".into());
                derive_performance(&trace)
            }
        };
        let model = fit_or_prior(&causal, reference, config, rep)?;
        rep.observed = observed.clone();
        Ok((model, observed))
    }) else {
        return Ok(run.finish());
    };

    let Some(shapley) = run.stage("shapley", |rep| {
        let game = characteristic_from_scm(&model, &observed, agents.clone(), &owner, config.normal);
        let est = if agents.len() <= config.shapley.exact_limit {
            exact_shapley(&game)?
        } else {
            mc_shapley_adaptive(&game, config.shapley.permutations, config.shapley.stderr_target, config.seed)?
        };
        rep.shapley = Some(est.clone());
        Ok(est)
    }) else {
        return Ok(run.finish());
    };

    let phi_per_node: Vec<f64> = owner.iter().map(|&j| shapley.values[j]).collect();
    let amplified = model.amplified(config.alpha, &phi_per_node);
    run.report.model = Some(amplified.clone());

    let Some(agent) = run.stage("bottleneck", |rep| {
        let b = bottleneck_scores(
            &amplified,
            &shapley,
            &observed,
            trace.outcome,
            &owner,
            &first_steps,
            config.success_threshold,
            config.normal,
        )?;
        let agent = attribute_agent(&b).ok_or_else(|| Error::Invariant("no agents to attribute".into()))?;
        rep.bottleneck = Some(b);
        rep.agent = Some(agent.clone());
        Ok(agent)
    }) else {
        return Ok(run.finish());
    };

    let Some(input) = run.stage("features", |rep| {
        discovery_input(&trace, &data, reference, &amplified, &observed, config, provider, rep)
    }) else {
        return Ok(run.finish());
    };

    let n = trace.len();
    let Some(found) = run.stage("discovery", |rep| {
        let all: Vec<usize> = (0..input.rows.len()).collect();
        let d = discover(&input, &all, config)?;
        rep.discovery = Some(DiscoverySummary {
            samples: input.rows.len(),
            variables: n + 1,
            precedence: input.order.clone(),
            adjacencies: d.skeleton.adjacencies.iter().copied().collect(),
            oriented: d
                .oriented
                .edges
                .iter()
                .map(|&(from, to)| OrientedEdge {
                    from,
                    to,
                    reason: d.oriented.reasons[&(from, to)],
                })
                .collect(),
            ci_tests: d.skeleton.ci_log.len(),
            skipped_tests: d.skeleton.ci_log.iter().filter(|r| r.skipped).count(),
            conflicts: d.oriented.conflicts.clone(),
            ace: d.ace.clone(),
        });
        Ok(d)
    }) else {
        return Ok(run.finish());
    };

    let Some(ranking) = run.stage("ranking", |rep| {
        let deltas = (0..n)
            .map(|k| step_intervention_delta(&amplified, &observed, k, config.normal))
            .collect::<Result<Vec<f64>>>()?;
        let confidence = bootstrap_confidence(
            input.rows.len(),
            n,
            |idx| {
                discover(&input, idx, config)
                    .ok()
                    .map(|d| rank_by_ace(&d.ace))
            },
            config.ranking.bootstrap,
            config.ranking.k_top,
            config.ranking.block_len,
            config.seed,
        )?;
        let ranking = final_rank(&found.ace.ace[..n], &deltas, &confidence.values, config.ranking.weights);
        rep.confidence = Some(confidence);
        rep.steps = Some(ranking.clone());
        Ok(ranking)
    }) else {
        return Ok(run.finish());
    };

    run.stage("report", |rep| {
        let k = ranking.predicted_step;
        rep.predicted = Some(Prediction {
            agent: agent.agent.clone(),
            step: k,
        });
        rep.causal_chain = strongest_path(&found.ace, k)
            .into_iter()
            .map(|e| ChainLink {
                cause: e.from,
                effect: (e.to != n).then_some(e.to),
                local_effect: e.local_effect,
            })
            .collect();
        let b = rep.bottleneck.as_ref().expect("bottleneck stage ran");
        let rec = b.record(&agent.agent).expect("attributed agent has a record");
        let step = &ranking.records[k];
        rep.diagnosis = Some(diagnosis_sentence(
            &agent.agent,
            rec.score,
            rec.shapley,
            k,
            step.ace,
            step.delta,
            step.confidence,
            &rep.causal_chain,
        ));
        Ok(())
    });
    Ok(run.finish())
}

fn fit_or_prior(
    causal: &PerformanceCausalGraph,
    reference: Option<&[ExecutionTrace]>,
    config: &Config,
    rep: &mut AttributionReport,
) -> Result<StructuralModel> {
    let need = min_corpus(causal);
    match reference {
        Some(r) if r.len() >= need => {
            let fit = fit_mechanisms(r, causal)?;
            rep.model_source = "fitted".into();
            if !fit.ridge_nodes.is_empty() {
                rep.notes
                    .push(format!("ridge fallback for rank-deficient nodes {:?}", fit.ridge_nodes));
            }
            Ok(fit.model)
        }
        other => {
            if let Some(r) = other {
                rep.notes.push(format!(
                    "{} reference runs is below the {need} needed for fitting; using the prior model",
                    r.len()
                ));
            } else {
                rep.notes.push("no reference runs; using the prior model".into());
            }
            rep.model_source = "prior".into();
            StructuralModel::prior(causal, config.prior.weight_sum, config.prior.nominal, config.prior.noise_scale)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn discovery_input(
    trace: &ExecutionTrace,
    data: &DataDependencyGraph,
    reference: Option<&[ExecutionTrace]>,
    model: &StructuralModel,
    observed: &[f64],
    config: &Config,
    provider: &dyn SimilarityProvider,
    rep: &mut AttributionReport,
) -> Result<DiscoveryInput> {
    let encoder = PooledEncoder::new(config.features.context_dim, config.features.projection_seed);
    let features = extract_features(trace, data, provider, config.features.window);
    rep.features_degraded = features.degraded;
    if features.degraded {
        rep.notes
            .push(format!("similarity provider {} failed; semantic features set to 0", provider.name()));
    }
    let failed_context = encoder.encode(trace, &features.raw).values;
    let mut node_features: Vec<Vec<f64>> = features
        .standardized
        .iter()
        .map(|f| f.to_array().to_vec())
        .collect();
    node_features.push(vec![0.0; FEATURE_DIM]);

    let mut failed_row = observed.to_vec();
    failed_row.push(trace.outcome);

    let (rows, context) = match reference.filter(|r| r.len() + 1 >= crate::cdc::MIN_SAMPLES) {
        Some(refs) => {
            let mut rows = Vec::with_capacity(refs.len() + 1);
            let mut ctx = Vec::with_capacity(refs.len() + 1);
            let encoded: Vec<(Vec<f64>, Vec<f64>)> = refs
                .iter()
                .map(|r| {
                    let mut row = r.performance_vector().unwrap_or_else(|| derive_performance(r));
                    row.push(r.outcome);
                    let (raw, _) = raw_features(r, data, provider, config.features.window);
                    (row, encoder.encode(r, &raw).values)
                })
                .collect();
            for (row, c) in encoded {
                rows.push(row);
                ctx.push(c);
            }
            rows.push(failed_row);
            ctx.push(failed_context.clone());
            (rows, Some(ctx))
        }
        None => {
            rep.notes.push(format!(
                "discovery samples resimulated from the model ({} block-bootstrap replicates of the abducted noise); context conditioning unavailable",
                config.prior.replicates
            ));
            (resimulate(model, observed, config), None)
        }
    };
    Ok(DiscoveryInput {
        rows,
        context,
        node_features,
        failed_context,
        order: precedence(trace.len(), config.invert),
    })
}

/// Single-trace fallback: block-resample the abducted noise across nodes and
/// push each replicate through the model.
fn resimulate(model: &StructuralModel, observed: &[f64], config: &Config) -> Vec<Vec<f64>> {
    let noise = model.abduct(observed);
    let n = noise.len();
    let mut rows: Vec<Vec<f64>> = (0..config.prior.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5151_5151);
            rng.set_stream(r as u64);
            let idx = stats::moving_block_indices(n, config.ranking.block_len, &mut rng);
            let fresh = model.sample_noise(config.seed.wrapping_add(r as u64));
            let eps: Vec<f64> = (0..n).map(|v| noise[idx[v]] + fresh[v]).collect();
            let sim = model.simulate(&eps);
            let mut row = sim.values;
            row.push(sim.outcome);
            row
        })
        .collect();
    let mut failed = observed.to_vec();
    failed.push(model.readout(observed));
    rows.push(failed);
    rows
}

/// Attribution for one corpus entry; `None` when the pipeline failed or did
/// not reach a prediction.
pub fn predict(entry: &CorpusEntry, config: &Config, provider: &dyn SimilarityProvider) -> Option<Prediction> {
    attribute(&entry.trace, entry.reference.as_deref(), config, provider)
        .ok()
        .and_then(|r| r.report.predicted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Causal,
    Random,
}

/// Scores a corpus with ground truth. Entries without a truth sidecar are
/// skipped.
pub fn evaluate_corpus(
    entries: &[CorpusEntry],
    method: Method,
    config: &Config,
    provider: &dyn SimilarityProvider,
) -> EvalMetrics {
    let labelled: Vec<(&CorpusEntry, &GroundTruth)> = entries
        .iter()
        .filter_map(|e| e.truth.as_ref().map(|t| (e, t)))
        .collect();
    let predictions: Vec<Option<Prediction>> = labelled
        .par_iter()
        .enumerate()
        .map(|(i, (e, _))| match method {
            Method::Causal => predict(e, config, provider),
            Method::Random => Some(random_baseline(&e.trace, config.seed.wrapping_add(i as u64))),
        })
        .collect();
    let truths: Vec<GroundTruth> = labelled.into_iter().map(|(_, t)| t.clone()).collect();
    evaluate(&predictions, &truths)
}
