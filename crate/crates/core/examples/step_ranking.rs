//! Combines ACE, counterfactual deltas and bootstrap confidence into a step ranking.

use mas_attribution::ranking::{bootstrap_confidence, final_rank, step_intervention_delta, FinalScoreWeights};
use mas_attribution::scm::NormalBaseline;
use mas_attribution::stats;
use mas_attribution::synth::{generate_instance, SynthSpec};

fn main() -> mas_attribution::Result<()> {
    let inst = generate_instance(&SynthSpec::default(), 0)?;
    let observed = inst.trace.performance_vector().unwrap();
    let n = observed.len();
    let deltas = (0..n)
        .map(|k| step_intervention_delta(&inst.true_model, &observed, k, NormalBaseline::Mechanism))
        .collect::<mas_attribution::Result<Vec<_>>>()?;

    // stand-in ACE: correlation of each node with the outcome over the reference runs
    let rows: Vec<Vec<f64>> = inst.reference.iter().map(|r| r.performance_vector().unwrap()).collect();
    let outcomes: Vec<f64> = inst.reference.iter().map(|r| r.outcome).collect();
    let ace_on = |idx: &[usize]| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let xs: Vec<f64> = idx.iter().map(|&i| rows[i][k]).collect();
                let ys: Vec<f64> = idx.iter().map(|&i| outcomes[i]).collect();
                stats::cosine(&stats::standardize(&xs), &stats::standardize(&ys))
            })
            .collect()
    };
    let all: Vec<usize> = (0..rows.len()).collect();
    let ace = ace_on(&all);
    let conf = bootstrap_confidence(
        rows.len(),
        n,
        |idx| {
            let a = ace_on(idx);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&x, &y| a[y].abs().total_cmp(&a[x].abs()));
            Some(order)
        },
        100,
        3,
        3,
        5,
    )?;
    let ranking = final_rank(&ace, &deltas, &conf.values, FinalScoreWeights::default());
    for k in ranking.order.iter().take(5) {
        let r = &ranking.records[*k];
        println!(
            "step {:>2}  ace {:+.3}  delta {:+.3}  conf {:.2}  score {:.3}",
            r.step, r.ace, r.delta, r.confidence, r.final_score
        );
    }
    println!("predicted step {}, injected at {}", ranking.predicted_step, inst.truth.mistake_step);
    Ok(())
}
