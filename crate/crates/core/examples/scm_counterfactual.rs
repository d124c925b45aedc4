//! Abduction, intervention and prediction on a three-node chain.

use mas_attribution::graph::{invert, DataDependencyGraph, NodeInfo};
use mas_attribution::scm::{InterventionSpec, Mechanism, NormalBaseline, StructuralModel};

fn main() -> mas_attribution::Result<()> {
    let nodes = (0..3)
        .map(|i| NodeInfo {
            index: i,
            agent: ["Planner", "Coder", "Reviewer"][i].into(),
            timestamp: i as f64,
        })
        .collect();
    // planner -> coder -> reviewer in data flow; inverted, the reviewer is the root
    let data = DataDependencyGraph {
        nodes,
        edges: [(0, 1), (1, 2)].into(),
    };
    let g = invert(&data);
    println!("performance edges {:?}, sinks {:?}", g.edges, g.sinks());
    let model = StructuralModel::new(
        &g,
        vec![
            Mechanism::new(0, vec![1], vec![0.9], 0.05, 0.05),
            Mechanism::new(1, vec![2], vec![0.8], 0.1, 0.05),
            Mechanism::new(2, vec![], vec![], 0.9, 0.05),
        ],
    )?;

    let observed = [0.25, 0.2, 0.9];
    println!("observed {observed:?}, Y = {:.3}", model.readout(&observed));
    println!("abducted noise {:?}", model.abduct(&observed));

    for (name, spec) in [
        ("nothing", InterventionSpec::empty()),
        ("coder normal", NormalBaseline::Mechanism.spec([1])),
        ("coder := 1", InterventionSpec::assign(1, 1.0)),
        ("reviewer := 0", InterventionSpec::assign(2, 0.0)),
    ] {
        let cf = model.counterfactual(&observed, &spec)?;
        println!("do({name:<13}) -> {:?}  Y = {:.3}", cf.values, cf.outcome);
    }
    Ok(())
}
