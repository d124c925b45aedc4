//! Context-conditioned causal discovery over per-step performance.
//!
//! Variables are columns of a sample matrix (one row per run). A precedence
//! order fixes which variable may cause which: only pairs that are forward
//! in that order are ever tested or oriented.

pub mod ace;
pub mod ci;
pub mod orient;
pub mod skeleton;

pub use ace::{compute_ace, context_weights, local_effects, rank_by_ace, AceScores, EdgeWeights};
pub use ci::{CiRecord, CiTester};
pub use orient::{orient_edges, OrientationReason, OrientedGraph};
pub use skeleton::{discover_skeleton, CausalSkeleton, SkeletonParams};

pub const DEFAULT_ALPHA_SIG: f64 = 0.01;
pub const DEFAULT_MAX_COND: usize = 3;
pub const DEFAULT_PATH_CAP: usize = 10_000;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const MIN_SAMPLES: usize = 30;

/// Rank of every variable in a precedence order.
pub(crate) fn ranks(order: &[usize]) -> Vec<usize> {
    let mut r = vec![usize::MAX; order.len()];
    for (pos, &v) in order.iter().enumerate() {
        r[v] = pos;
    }
    r
}
