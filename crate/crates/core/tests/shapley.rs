mod common;

use common::graph_owned;
use mas_attribution::scm::{Mechanism, NormalBaseline, StructuralModel};
use mas_attribution::shapley::{characteristic_from_scm, exact_shapley, mc_shapley, Coalition, CoalitionGame};
use mas_attribution::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

fn two_player() -> CoalitionGame<'static> {
    CoalitionGame::new(names(2), |s| [0.0, 0.3, 0.5, 1.0][s as usize])
}

/// Shapley values by brute force over all orderings.
fn by_orderings(n: usize, v: &dyn Fn(Coalition) -> f64) -> Vec<f64> {
    fn perms(items: Vec<usize>) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.clone();
            let head = rest.remove(i);
            for mut p in perms(rest) {
                p.insert(0, head);
                out.push(p);
            }
        }
        out
    }
    let all = perms((0..n).collect());
    let mut phi = vec![0.0; n];
    for order in &all {
        let mut s: Coalition = 0;
        for &p in order {
            let before = v(s);
            s |= 1 << p;
            phi[p] += v(s) - before;
        }
    }
    phi.iter().map(|x| x / all.len() as f64).collect()
}

fn random_table(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t: Vec<f64> = (0..1usize << n).map(|_| rng.random_range(-1.0..1.0)).collect();
    t[0] = 0.0;
    t
}

#[test]
fn two_players_by_hand() {
    let est = exact_shapley(&two_player()).unwrap();
    assert!((est.values[0] - 0.4).abs() < 1e-12);
    assert!((est.values[1] - 0.6).abs() < 1e-12);
    assert!(est.exact);
    assert!(est.stderr.iter().all(|&s| s == 0.0));
}

#[test]
fn exact_matches_ordering_oracle() {
    for n in 1..=5 {
        let t = random_table(n, n as u64);
        let tt = t.clone();
        let est = exact_shapley(&CoalitionGame::new(names(n), move |s| tt[s as usize])).unwrap();
        let want = by_orderings(n, &|s| t[s as usize]);
        for (a, b) in est.values.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn additive_game_returns_its_coefficients() {
    let c = [0.3, -0.2, 0.05, 0.7];
    let est = exact_shapley(&CoalitionGame::new(names(4), move |s| {
        (0..4).filter(|i| s & (1 << i) != 0).map(|i| c[i]).sum()
    }))
    .unwrap();
    for (a, b) in est.values.iter().zip(c) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn symmetric_players_share_equally() {
    let est = exact_shapley(&CoalitionGame::new(names(3), |s| (s.count_ones() as f64).powi(2))).unwrap();
    assert!((est.values[0] - est.values[1]).abs() < 1e-12);
    assert!((est.values[1] - est.values[2]).abs() < 1e-12);
    assert!((est.values.iter().sum::<f64>() - 9.0).abs() < 1e-12);
}

#[test]
fn monte_carlo_two_players() {
    let est = mc_shapley(&two_player(), 10_000, 1).unwrap();
    assert!((est.values[0] - 0.4).abs() <= 0.02, "{:?}", est.values);
    assert!(!est.exact);
    assert_eq!(est.permutations, 10_000);
}

#[test]
fn monte_carlo_eight_players_within_three_stderr() {
    let t = random_table(8, 42);
    let game = CoalitionGame::new(names(8), move |s| t[s as usize]);
    let exact = exact_shapley(&game).unwrap();
    let mc = mc_shapley(&game, 50_000, 9).unwrap();
    for i in 0..8 {
        let err = (mc.values[i] - exact.values[i]).abs();
        assert!(err <= 3.0 * mc.stderr[i], "player {i}: {err} vs stderr {}", mc.stderr[i]);
    }
}

#[test]
fn monte_carlo_needs_permutations() {
    assert!(matches!(mc_shapley(&two_player(), 0, 1), Err(Error::TooFewPermutations { got: 0, .. })));
}

#[test]
fn seeded_runs_repeat() {
    let t = random_table(6, 3);
    let game = CoalitionGame::new(names(6), move |s| t[s as usize]);
    assert_eq!(mc_shapley(&game, 500, 4).unwrap(), mc_shapley(&game, 500, 4).unwrap());
}

#[test]
fn too_many_players_for_exact() {
    let game = CoalitionGame::new(names(13), |_| 0.0);
    assert!(matches!(exact_shapley(&game), Err(Error::TooManyPlayers { players: 13, .. })));
}

/// Chain A→B→C with the fault on B only. Repairing B alone repairs everything.
fn faulted_chain() -> (StructuralModel, Vec<f64>) {
    let agents: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
    let g = graph_owned(&agents, &[(0, 1), (1, 2)]);
    let mechs = vec![
        Mechanism::new(0, vec![], vec![], 0.9, 0.05),
        Mechanism::new(1, vec![0], vec![0.8], 0.15, 0.05),
        Mechanism::new(2, vec![1], vec![0.9], 0.08, 0.05),
    ];
    let m = StructuralModel::new(&g, mechs).unwrap();
    let x0 = 0.9;
    let x1 = (0.15 + 0.8 * x0) * 0.2;
    let x2 = 0.08 + 0.9 * x1;
    (m, vec![x0, x1, x2])
}

#[test]
fn scm_game_values() {
    let (m, obs) = faulted_chain();
    let owner = [0, 1, 2];
    let game = characteristic_from_scm(&m, &obs, vec!["A".into(), "B".into(), "C".into()], &owner, NormalBaseline::Mechanism);
    assert_eq!(game.value(0), m.readout(&obs));
    assert!(game.value(0b111) >= game.value(0));
    assert!((game.value(0b010) - game.value(0b111)).abs() < 1e-9);
    let est = exact_shapley(&game).unwrap();
    assert!(est.values[0].abs() < 1e-9 && est.values[2].abs() < 1e-9);
    assert!((est.values.iter().sum::<f64>() - (game.value(0b111) - game.value(0))).abs() < 1e-12);
}

#[test]
fn coalition_values_are_cached() {
    let (m, obs) = faulted_chain();
    let owner = [0, 1, 2];
    let game = characteristic_from_scm(&m, &obs, vec!["A".into(), "B".into(), "C".into()], &owner, NormalBaseline::Mechanism);
    exact_shapley(&game).unwrap();
    assert_eq!(game.evaluations(), 8);
    mc_shapley(&game, 200, 1).unwrap();
    assert_eq!(game.evaluations(), 8);
}
