//! Score profile over a density grid and the exponential mechanism it induces.
//!
//! ```bash
//! cargo run --release --example score_profile
//! ```

use nodedp::graph::{average_degree, sample_er};
use nodedp::mechanism::{exp_mechanism_sample, mechanism_probabilities, score_grid, score_profile, ScoreKind, ScoreParams};

fn main() -> nodedp::Result<()> {
    let a = sample_er(10, 0.4, 7)?;
    let params = ScoreParams::new(ScoreKind::Coarse, 0.1, 1.0);
    let grid = score_grid(0.0, 10.0, 0.5)?;
    let profile = score_profile(&a, &params, &grid)?;
    let probs = mechanism_probabilities(&profile, 1.0)?;

    println!("d(A) = {:.3}", average_degree(&a));
    println!("{:>6} {:>6} {:>9}", "d", "score", "P[d]");
    for ((d, s), p) in profile.grid.iter().zip(&profile.scores).zip(&probs) {
        println!("{d:>6.1} {s:>6.0} {p:>9.5}");
    }
    let draws: Vec<f64> = (0..5).map(|s| exp_mechanism_sample(&profile, 1.0, s)).collect::<nodedp::Result<_>>()?;
    println!("five draws: {draws:?}");
    Ok(())
}
