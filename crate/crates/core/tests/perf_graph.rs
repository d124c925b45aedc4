mod common;

use std::collections::BTreeSet;

use common::read;
use mas_attribution::graph::{break_cycles, build_data_graph, invert, project_to_agent_graph, NodeInfo, PerformanceCausalGraph};
use mas_attribution::synth::GroundTruth;
use mas_attribution::trace::{parse_native_trace, ArtifactRef, ExecutionTrace, Step};

fn nodes(agents: &[&str]) -> Vec<NodeInfo> {
    agents
        .iter()
        .enumerate()
        .map(|(i, a)| NodeInfo {
            index: i,
            agent: a.to_string(),
            timestamp: i as f64,
        })
        .collect()
}

fn chain_trace(agents: &[&str]) -> ExecutionTrace {
    let steps = agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut s = Step::new(i, *a, "act", format!("step {i}"), i as f64);
            s.outputs = vec![format!("o{i}")];
            if i > 0 {
                s.inputs = vec![ArtifactRef::new(i - 1, format!("o{}", i - 1))];
            }
            s
        })
        .collect();
    ExecutionTrace::new("t", steps, 0.0)
}

#[test]
fn three_step_chain() {
    let g = build_data_graph(&chain_trace(&["A", "B", "C"]));
    assert_eq!(g.edges, BTreeSet::from([(0, 1), (1, 2)]));
    let inv = invert(&g);
    assert_eq!(inv.edges, BTreeSet::from([(1, 0), (2, 1)]));
}

#[test]
fn two_producers_give_in_degree_two() {
    let mut t = chain_trace(&["A", "B", "C"]);
    t.steps[2].inputs.push(ArtifactRef::new(0, "o0"));
    let g = build_data_graph(&t);
    assert_eq!(g.in_degree(2), 2);
}

#[test]
fn long_fixture_matches_generator_dag() {
    let t = parse_native_trace(&read("native/synth130.trace.jsonl")).unwrap();
    let truth: GroundTruth = serde_json::from_slice(&read("native/synth130.truth.json")).unwrap();
    let g = build_data_graph(&t);
    assert_eq!(g.edges, truth.true_dag.into_iter().collect::<BTreeSet<_>>());
}

#[test]
fn empty_graph_inverts_to_empty() {
    let g = build_data_graph(&ExecutionTrace::new("t", vec![Step::new(0, "A", "x", "", 0.0)], 0.0));
    assert!(invert(&g).edges.is_empty());
}

#[test]
fn two_cycle_loses_the_later_sourced_edge() {
    let g = break_cycles(nodes(&["A"; 10]), BTreeSet::from([(4, 9), (9, 4)]));
    assert_eq!(g.removed_edges, vec![(9, 4)]);
    assert_eq!(g.edges, BTreeSet::from([(4, 9)]));
}

#[test]
fn acyclic_input_is_untouched() {
    let edges = BTreeSet::from([(0, 1), (1, 2), (0, 2)]);
    let g = break_cycles(nodes(&["A", "B", "C"]), edges.clone());
    assert_eq!(g.edges, edges);
    assert!(g.removed_edges.is_empty());
}

#[test]
fn three_cycle_removes_exactly_one_edge() {
    // 0→1→2→0: the edge leaving step 2 (latest source) goes.
    let g = break_cycles(nodes(&["A", "B", "C"]), BTreeSet::from([(0, 1), (1, 2), (2, 0)]));
    assert_eq!(g.removed_edges, vec![(2, 0)]);
    assert!(g.is_acyclic());
}

fn perf(agents: &[&str], edges: &[(usize, usize)]) -> PerformanceCausalGraph {
    PerformanceCausalGraph {
        nodes: nodes(agents),
        edges: edges.iter().copied().collect(),
        removed_edges: vec![],
    }
}

#[test]
fn one_way_agent_influence() {
    let a = project_to_agent_graph(&perf(&["A", "B", "A", "B"], &[(0, 1), (2, 3), (0, 3)]));
    assert_eq!(a.edge_names(), vec![("A".to_string(), "B".to_string())]);
}

#[test]
fn mutual_agent_influence_drops_later_contact() {
    // A→B first contact at t=0, B→A first contact at t=1.
    let a = project_to_agent_graph(&perf(&["A", "B", "A"], &[(0, 1), (1, 2)]));
    assert_eq!(a.edge_names(), vec![("A".to_string(), "B".to_string())]);
    assert_eq!(a.removed_edges, vec![(1, 0)]);
}

#[test]
fn single_agent_projection() {
    let a = project_to_agent_graph(&perf(&["A", "A", "A"], &[(0, 1), (1, 2)]));
    assert_eq!(a.agents, vec!["A"]);
    assert!(a.edges.is_empty());
}
