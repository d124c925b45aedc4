//! PC-style adjacency search restricted to forward pairs.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ci::{CiRecord, CiTester};
use super::{ranks, DEFAULT_ALPHA_SIG, DEFAULT_MAX_COND, MIN_SAMPLES};
use crate::error::{Error, Result};
use crate::graph::Edge;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkeletonParams {
    pub alpha_sig: f64,
    pub max_cond: usize,
    /// Condition every test on the context covariates.
    pub context_conditioning: bool,
}

impl Default for SkeletonParams {
    fn default() -> Self {
        Self {
            alpha_sig: DEFAULT_ALPHA_SIG,
            max_cond: DEFAULT_MAX_COND,
            context_conditioning: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalSkeleton {
    pub nodes: usize,
    /// Precedence order the search respected; earlier entries may cause later ones.
    pub order: Vec<usize>,
    /// Undirected pairs stored as `(earlier, later)` in precedence order.
    pub adjacencies: BTreeSet<Edge>,
    pub sepsets: BTreeMap<Edge, Vec<usize>>,
    pub ci_log: Vec<CiRecord>,
}

impl CausalSkeleton {
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacencies.contains(&(a, b)) || self.adjacencies.contains(&(b, a))
    }

    pub fn sepset(&self, a: usize, b: usize) -> Option<&Vec<usize>> {
        self.sepsets.get(&(a, b)).or_else(|| self.sepsets.get(&(b, a)))
    }

    pub fn neighbours(&self, v: usize) -> BTreeSet<usize> {
        self.adjacencies
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }
}

fn combinations(items: &[usize], k: usize, mut visit: impl FnMut(&[usize]) -> bool) {
    fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if cur.len() == k {
            return visit(cur);
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            if rec(items, k, i + 1, cur, visit) {
                return true;
            }
            cur.pop();
        }
        false
    }
    rec(items, k, 0, &mut Vec::with_capacity(k), &mut visit);
}

/// Adjacency search over the columns of `data` (samples × variables).
///
/// Pairs are visited forward in `order`; a pair `(a, b)` is conditioned on
/// subsets of the neighbours of `a` or `b` that precede `b`. Adjacency sets
/// are frozen per level so the outcome does not depend on visiting order.
pub fn discover_skeleton(
    data: &DMatrix<f64>,
    context: Option<&DMatrix<f64>>,
    order: &[usize],
    params: &SkeletonParams,
) -> Result<CausalSkeleton> {
    let n = data.nrows();
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            have: n,
            need: MIN_SAMPLES,
        });
    }
    let p = data.ncols();
    assert_eq!(order.len(), p, "precedence order must list every variable");
    let rank = ranks(order);
    let tester = CiTester::new(data, context.filter(|_| params.context_conditioning));

    let mut adjacencies: BTreeSet<Edge> = BTreeSet::new();
    for (ia, &a) in order.iter().enumerate() {
        for &b in &order[ia + 1..] {
            adjacencies.insert((a, b));
        }
    }
    let mut sepsets = BTreeMap::new();
    let mut ci_log = Vec::new();

    for level in 0..=params.max_cond {
        let frozen = CausalSkeleton {
            nodes: p,
            order: order.to_vec(),
            adjacencies: adjacencies.clone(),
            sepsets: BTreeMap::new(),
            ci_log: Vec::new(),
        };
        let mut pairs: Vec<Edge> = adjacencies.iter().copied().collect();
        pairs.sort_by_key(|&(a, b)| (rank[a], rank[b]));
        let mut any_candidates = false;
        for (a, b) in pairs {
            let mut tried: BTreeSet<Vec<usize>> = BTreeSet::new();
            for side in [a, b] {
                let other = if side == a { b } else { a };
                let cands: Vec<usize> = frozen
                    .neighbours(side)
                    .into_iter()
                    .filter(|&c| c != other && rank[c] < rank[b])
                    .collect();
                if cands.len() < level {
                    continue;
                }
                any_candidates = true;
                let mut removed = false;
                combinations(&cands, level, |z| {
                    if !tried.insert(z.to_vec()) {
                        return false;
                    }
                    let rec = tester.test(a, b, z);
                    let independent = !rec.skipped && rec.p_value > params.alpha_sig;
                    ci_log.push(rec);
                    if independent {
                        sepsets.insert((a, b), z.to_vec());
                        removed = true;
                    }
                    independent
                });
                if removed {
                    adjacencies.remove(&(a, b));
                    break;
                }
            }
        }
        if !any_candidates {
            break;
        }
    }
    Ok(CausalSkeleton {
        nodes: p,
        order: order.to_vec(),
        adjacencies,
        sepsets,
        ci_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn chain(seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = DMatrix::zeros(2000, 3);
        for r in 0..2000 {
            let e: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            d[(r, 0)] = e[0];
            d[(r, 1)] = 0.7 * d[(r, 0)] + e[1];
            d[(r, 2)] = 0.7 * d[(r, 1)] + e[2];
        }
        d
    }

    #[test]
    fn chain_skeleton() {
        let sk = discover_skeleton(&chain(1), None, &[0, 1, 2], &SkeletonParams::default()).unwrap();
        assert_eq!(sk.adjacencies, [(0, 1), (1, 2)].into());
        assert_eq!(sk.sepset(0, 2), Some(&vec![1]));
        assert!(sk.ci_log.iter().all(|r| r.pair.0 < r.pair.1));
    }

    #[test]
    fn too_few_samples() {
        let d = DMatrix::zeros(10, 2);
        assert!(matches!(
            discover_skeleton(&d, None, &[0, 1], &SkeletonParams::default()),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn combinations_in_lexicographic_order() {
        let mut seen = Vec::new();
        combinations(&[1, 2, 3, 4], 2, |c| {
            seen.push(c.to_vec());
            false
        });
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![1, 2]);
        assert_eq!(seen[5], vec![3, 4]);
    }
}
