mod common;

use common::graph_owned;
use mas_attribution::bottleneck::{attribute_agent, bottleneck_scores, AgentRecord, BottleneckReport};
use mas_attribution::scm::{Mechanism, NormalBaseline, StructuralModel};
use mas_attribution::shapley::{characteristic_from_scm, exact_shapley};
use mas_attribution::Error;

fn rec(agent: &str, phi: f64, y_cf: f64, first: usize) -> AgentRecord {
    AgentRecord::new(agent, phi, 0.2, y_cf, 0.5, first)
}

#[test]
fn score_by_substitution() {
    let r = AgentRecord::new("A", 0.4, 0.2, 0.9, 0.5, 0);
    assert_eq!(r.indicator, 1);
    assert!((r.score - 0.28).abs() < 1e-12);
    assert!((r.score - r.shapley * (r.y_cf - r.y_original) * r.indicator as f64).abs() < 1e-12);
}

#[test]
fn indicator_gates_the_score() {
    let r = AgentRecord::new("A", 0.9, 0.2, 0.4, 0.5, 0);
    assert_eq!(r.indicator, 0);
    assert_eq!(r.score, 0.0);
    // exactly at the threshold counts as success
    assert_eq!(AgentRecord::new("A", 0.9, 0.2, 0.5, 0.5, 0).indicator, 1);
}

#[test]
fn argmax_picks_the_top_score() {
    let report = BottleneckReport::from_records(
        vec![
            AgentRecord::new("a0", 0.4, 0.2, 0.9, 0.5, 0),
            AgentRecord::new("a1", 0.3, 0.2, 0.3, 0.5, 1),
            AgentRecord::new("a2", 0.1, 0.2, 0.7, 0.5, 2),
        ],
        0.5,
    );
    let scores: Vec<f64> = report.records.iter().map(|r| r.score).collect();
    assert!((scores[0] - 0.28).abs() < 1e-12 && scores[1] == 0.0 && (scores[2] - 0.05).abs() < 1e-12);
    let a = attribute_agent(&report).unwrap();
    assert_eq!(a.agent, "a0");
    assert!(!a.low_confidence);
    assert_eq!(report.ranking, vec!["a0", "a2", "a1"]);
}

#[test]
fn all_zero_scores_fall_back() {
    let report = BottleneckReport::from_records(vec![rec("a", 0.5, 0.3, 0), rec("b", 0.5, 0.45, 1), rec("c", 0.0, 0.49, 2)], 0.5);
    let a = attribute_agent(&report).unwrap();
    assert_eq!(a.agent, "b");
    assert!(a.low_confidence);
}

#[test]
fn tie_goes_to_the_earlier_agent() {
    let report = BottleneckReport::from_records(vec![rec("late", 0.3, 0.8, 7), rec("early", 0.3, 0.8, 2)], 0.5);
    assert_eq!(attribute_agent(&report).unwrap().agent, "early");
}

#[test]
fn empty_report_has_no_answer() {
    assert!(attribute_agent(&BottleneckReport::from_records(vec![], 0.5)).is_none());
}

/// Three agents in a chain; `fault` scales one agent's node down.
fn single_fault(fault: usize) -> (StructuralModel, Vec<f64>) {
    let agents: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
    let g = graph_owned(&agents, &[(0, 1), (1, 2)]);
    let mechs = vec![
        Mechanism::new(0, vec![], vec![], 0.9, 0.05),
        Mechanism::new(1, vec![0], vec![0.7], 0.25, 0.05),
        Mechanism::new(2, vec![1], vec![0.8], 0.18, 0.05),
    ];
    let m = StructuralModel::new(&g, mechs).unwrap();
    let mut x = vec![0.0; 3];
    for v in 0..3 {
        x[v] = m.mechanisms[v].base(&x);
        if v == fault {
            x[v] *= 0.1;
        }
    }
    (m, x)
}

#[test]
fn single_fault_agent_has_strictly_top_score() {
    for fault in 0..3 {
        let (m, obs) = single_fault(fault);
        let owner = [0, 1, 2];
        let players: Vec<String> = vec!["A".into(), "B".into(), "C".into()];
        let game = characteristic_from_scm(&m, &obs, players, &owner, NormalBaseline::Mechanism);
        let phi = exact_shapley(&game).unwrap();
        let y = m.readout(&obs);
        let report = bottleneck_scores(&m, &phi, &obs, y, &owner, &[0, 1, 2], 0.5, NormalBaseline::Mechanism).unwrap();
        let top = &report.records[fault];
        assert!(top.score > 0.0);
        for (j, r) in report.records.iter().enumerate() {
            if j != fault {
                assert!(top.score > r.score, "fault {fault}: {:?}", report.records);
            }
        }
        assert_eq!(attribute_agent(&report).unwrap().agent, ["A", "B", "C"][fault]);
    }
}

#[test]
fn refuses_a_successful_trace() {
    let (m, obs) = single_fault(1);
    let players: Vec<String> = vec!["A".into(), "B".into(), "C".into()];
    let owner = [0, 1, 2];
    let game = characteristic_from_scm(&m, &obs, players, &owner, NormalBaseline::Mechanism);
    let phi = exact_shapley(&game).unwrap();
    let err = bottleneck_scores(&m, &phi, &obs, 0.8, &owner, &[0, 1, 2], 0.5, NormalBaseline::Mechanism).unwrap_err();
    assert!(matches!(err, Error::NotFailed { .. }));
}
