//! Exact and permutation-sampling Shapley values over agent coalitions.

use std::collections::HashMap;
use std::sync::RwLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scm::{NormalBaseline, StructuralModel};
use crate::stats;

pub const EXACT_LIMIT: usize = 12;
pub const MIN_PERMUTATIONS: usize = 100;

/// Coalitions are bitmasks over the player list.
pub type Coalition = u64;

type ValueFn<'a> = Box<dyn Fn(Coalition) -> f64 + Send + Sync + 'a>;

pub struct CoalitionGame<'a> {
    pub players: Vec<String>,
    value_fn: ValueFn<'a>,
    cache: RwLock<HashMap<Coalition, f64>>,
}

impl<'a> CoalitionGame<'a> {
    pub fn new(players: Vec<String>, value_fn: impl Fn(Coalition) -> f64 + Send + Sync + 'a) -> Self {
        assert!(players.len() < 64, "coalitions are stored as 64-bit masks");
        Self {
            players,
            value_fn: Box::new(value_fn),
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.players.len()
    }

    pub fn is_empty(&self) -> bool {
        self.players.is_empty()
    }

    pub fn grand(&self) -> Coalition {
        if self.players.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.players.len()) - 1
        }
    }

    pub fn value(&self, s: Coalition) -> f64 {
        if let Some(&v) = self.cache.read().expect("cache lock").get(&s) {
            return v;
        }
        let v = (self.value_fn)(s);
        *self.cache.write().expect("cache lock").entry(s).or_insert(v)
    }

    pub fn evaluations(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyEstimate {
    pub players: Vec<String>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// 0 in exact mode.
    pub permutations: usize,
    pub seed: Option<u64>,
    pub exact: bool,
}

impl ShapleyEstimate {
    pub fn value_of(&self, player: &str) -> Option<f64> {
        self.players.iter().position(|p| p == player).map(|i| self.values[i])
    }
}

pub fn exact_shapley(game: &CoalitionGame) -> Result<ShapleyEstimate> {
    let n = game.len();
    if n > EXACT_LIMIT {
        return Err(Error::TooManyPlayers {
            players: n,
            limit: EXACT_LIMIT,
        });
    }
    // weight[k] = k!(n-k-1)!/n!
    let mut fact = vec![1.0f64; n + 1];
    for i in 1..=n {
        fact[i] = fact[i - 1] * i as f64;
    }
    let weight: Vec<f64> = (0..n)
        .map(|k| fact[k] * fact[n - k - 1] / fact[n])
        .collect();
    let values: Vec<f64> = (0..(1u64 << n)).map(|s| game.value(s)).collect();
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u64 << i;
        for s in 0..(1u64 << n) {
            if s & bit == 0 {
                let k = s.count_ones() as usize;
                *p += weight[k] * (values[(s | bit) as usize] - values[s as usize]);
            }
        }
    }
    Ok(ShapleyEstimate {
        players: game.players.clone(),
        values: phi,
        stderr: vec![0.0; n],
        permutations: 0,
        seed: None,
        exact: true,
    })
}

fn permutation_contributions(game: &CoalitionGame, seed: u64, index: usize) -> Vec<f64> {
    let n = game.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut out = vec![0.0; n];
    let mut s: Coalition = 0;
    let mut prev = game.value(0);
    for &p in &order {
        s |= 1 << p;
        let v = game.value(s);
        out[p] = v - prev;
        prev = v;
    }
    out
}

fn summarize(game: &CoalitionGame, samples: &[Vec<f64>], seed: u64) -> ShapleyEstimate {
    let n = game.len();
    let m = samples.len();
    let mut values = Vec::with_capacity(n);
    let mut stderr = Vec::with_capacity(n);
    for j in 0..n {
        let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        values.push(stats::mean(&col));
        stderr.push(stats::sample_std_dev(&col) / (m as f64).sqrt());
    }
    ShapleyEstimate {
        players: game.players.clone(),
        values,
        stderr,
        permutations: m,
        seed: Some(seed),
        exact: false,
    }
}

fn sample_range(game: &CoalitionGame, seed: u64, range: std::ops::Range<usize>) -> Vec<Vec<f64>> {
    range
        .into_par_iter()
        .map(|i| permutation_contributions(game, seed, i))
        .collect()
}

/// Average marginal contribution over `permutations` sampled orderings.
/// Each ordering draws from its own ChaCha stream, so results do not depend
/// on thread scheduling.
pub fn mc_shapley(game: &CoalitionGame, permutations: usize, seed: u64) -> Result<ShapleyEstimate> {
    if permutations < MIN_PERMUTATIONS {
        return Err(Error::TooFewPermutations {
            got: permutations,
            min: MIN_PERMUTATIONS,
        });
    }
    let samples = sample_range(game, seed, 0..permutations);
    Ok(summarize(game, &samples, seed))
}

/// Like [`mc_shapley`] but stops early, in batches of 100 orderings, once the
/// largest standard error drops below `stderr_target`.
pub fn mc_shapley_adaptive(
    game: &CoalitionGame,
    max_permutations: usize,
    stderr_target: f64,
    seed: u64,
) -> Result<ShapleyEstimate> {
    if max_permutations < MIN_PERMUTATIONS {
        return Err(Error::TooFewPermutations {
            got: max_permutations,
            min: MIN_PERMUTATIONS,
        });
    }
    let mut samples = Vec::new();
    loop {
        let start = samples.len();
        let end = (start + MIN_PERMUTATIONS).min(max_permutations);
        samples.extend(sample_range(game, seed, start..end));
        let est = summarize(game, &samples, seed);
        let worst = est.stderr.iter().cloned().fold(0.0, f64::max);
        if end >= max_permutations || worst < stderr_target {
            return Ok(est);
        }
    }
}

/// Coalition value = counterfactual outcome when every node owned by an agent
/// in the coalition performs normally, with noise abducted from `observed`.
pub fn characteristic_from_scm<'a>(
    model: &'a StructuralModel,
    observed: &'a [f64],
    players: Vec<String>,
    owner: &'a [usize],
    baseline: NormalBaseline,
) -> CoalitionGame<'a> {
    let noise = model.abduct(observed);
    CoalitionGame::new(players, move |s| {
        if s == 0 {
            return model.readout(observed);
        }
        let nodes = (0..owner.len()).filter(|&v| s & (1 << owner[v]) != 0);
        model
            .do_intervene(&baseline.spec(nodes), &noise)
            .expect("owner indices are model nodes")
            .outcome
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_player() -> CoalitionGame<'static> {
        CoalitionGame::new(vec!["1".into(), "2".into()], |s| match s {
            0 => 0.0,
            1 => 0.3,
            2 => 0.5,
            _ => 1.0,
        })
    }

    #[test]
    fn two_player_by_hand() {
        let est = exact_shapley(&two_player()).unwrap();
        assert!((est.values[0] - 0.4).abs() < 1e-12);
        assert!((est.values[1] - 0.6).abs() < 1e-12);
        assert!(est.stderr.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn additive_game() {
        let c = [0.1, -0.4, 0.25];
        let g = CoalitionGame::new(vec!["a".into(), "b".into(), "c".into()], move |s| {
            (0..3).filter(|i| s & (1 << i) != 0).map(|i| c[i]).sum()
        });
        let est = exact_shapley(&g).unwrap();
        for i in 0..3 {
            assert!((est.values[i] - c[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn mc_close_to_exact_and_reproducible() {
        let g = two_player();
        let est = mc_shapley(&g, 10_000, 3).unwrap();
        assert!((est.values[0] - 0.4).abs() < 0.02);
        assert_eq!(est, mc_shapley(&g, 10_000, 3).unwrap());
        assert!(matches!(mc_shapley(&g, 0, 3), Err(Error::TooFewPermutations { .. })));
    }

    #[test]
    fn adaptive_stops_early_on_deterministic_game() {
        let g = CoalitionGame::new(vec!["a".into(), "b".into()], |s| s.count_ones() as f64);
        let est = mc_shapley_adaptive(&g, 2000, 0.01, 1).unwrap();
        assert_eq!(est.permutations, 100);
    }

    #[test]
    fn cache_is_shared() {
        let g = two_player();
        exact_shapley(&g).unwrap();
        assert_eq!(g.evaluations(), 4);
        mc_shapley(&g, 200, 1).unwrap();
        assert_eq!(g.evaluations(), 4);
    }

    #[test]
    fn exact_limit_enforced() {
        let g = CoalitionGame::new((0..13).map(|i| i.to_string()).collect(), |_| 0.0);
        assert!(matches!(exact_shapley(&g), Err(Error::TooManyPlayers { .. })));
    }
}
