//! Exact and sampled Shapley values for a small glove game.

use mas_attribution::shapley::{exact_shapley, mc_shapley, CoalitionGame};

fn main() -> mas_attribution::Result<()> {
    // players 0 and 1 hold left gloves, 2 holds the only right glove
    let game = CoalitionGame::new(vec!["L1".into(), "L2".into(), "R".into()], |s| {
        let left = (s & 1 != 0) || (s & 2 != 0);
        let right = s & 4 != 0;
        if left && right {
            1.0
        } else {
            0.0
        }
    });
    let exact = exact_shapley(&game)?;
    let mc = mc_shapley(&game, 5_000, 42)?;
    for (j, p) in game.players.iter().enumerate() {
        println!("{p:<3} exact {:.4}  sampled {:.4} ± {:.4}", exact.values[j], mc.values[j], mc.stderr[j]);
    }
    println!("sum {:.4}", exact.values.iter().sum::<f64>());
    Ok(())
}
