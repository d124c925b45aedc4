#![allow(dead_code)]

use std::path::PathBuf;

use mas_attribution::synth::{ConfounderSpec, CountSpan, FaultSpec, Span, SynthSpec};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn read(rel: &str) -> Vec<u8> {
    std::fs::read(fixture(rel)).unwrap()
}

/// Six-step pure chain, three agents, strong fault at step 3, no confounding.
pub fn chain_spec() -> SynthSpec {
    SynthSpec {
        agents: CountSpan::Fixed(3),
        steps: CountSpan::Fixed(6),
        dag_density: 0.0,
        backbone_span: 1,
        fault: FaultSpec {
            target_step: Some(3),
            severity: Span::Range([0.9, 1.0]),
            ..FaultSpec::default()
        },
        confounders: ConfounderSpec {
            confounded_fraction: 0.0,
            ..ConfounderSpec::default()
        },
        ..SynthSpec::default()
    }
}

use mas_attribution::graph::{NodeInfo, PerformanceCausalGraph};

/// Graph with one agent per node unless `agents` says otherwise.
pub fn graph(n: usize, edges: &[(usize, usize)]) -> PerformanceCausalGraph {
    graph_owned(&(0..n).map(|i| format!("A{i}")).collect::<Vec<_>>(), edges)
}

pub fn graph_owned(agents: &[String], edges: &[(usize, usize)]) -> PerformanceCausalGraph {
    PerformanceCausalGraph {
        nodes: agents
            .iter()
            .enumerate()
            .map(|(i, a)| NodeInfo {
                index: i,
                agent: a.clone(),
                timestamp: i as f64,
            })
            .collect(),
        edges: edges.iter().copied().collect(),
        removed_edges: vec![],
    }
}
