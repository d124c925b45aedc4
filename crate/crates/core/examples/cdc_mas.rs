//! Context-conditioned structure discovery and causal effects on simulated data.

use mas_attribution::cdc::{compute_ace, discover_skeleton, local_effects, orient_edges, rank_by_ace, SkeletonParams};
use mas_attribution::cdc::ace::unit_weights;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> mas_attribution::Result<()> {
    // z confounds x0 and x1; x1 -> x2 -> x3 is the real chain
    let n = 1500;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut e = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut data = DMatrix::zeros(n, 4);
    let mut ctx = DMatrix::zeros(n, 2);
    for r in 0..n {
        let z = e();
        let x0 = 0.9 * z + 0.4 * e();
        let x1 = 0.9 * z + 0.4 * e();
        let x2 = 0.7 * x1 + e();
        let x3 = 0.8 * x2 + e();
        data.row_mut(r).copy_from_slice(&[x0, x1, x2, x3]);
        ctx[(r, 0)] = z;
        ctx[(r, 1)] = e();
    }
    let order = [0, 1, 2, 3];
    for conditioning in [true, false] {
        let params = SkeletonParams {
            context_conditioning: conditioning,
            ..SkeletonParams::default()
        };
        let sk = discover_skeleton(&data, Some(&ctx), &order, &params)?;
        let g = orient_edges(&sk);
        let ace = compute_ace(&g, &local_effects(&g, &data), &unit_weights(&g), 3, 10_000);
        println!("context conditioning {conditioning}: edges {:?}", g.edges);
        println!("  ACE {:.3?}, ranking {:?}", ace.ace, rank_by_ace(&ace));
    }
    Ok(())
}
