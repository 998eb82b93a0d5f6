//! Two-stage private estimate next to the Laplace baseline at several budgets.
//!
//! ```bash
//! cargo run --release --example private_estimate
//! ```

use nodedp::graph::{average_degree, sample_er};
use nodedp::mechanism::{laplace_baseline, two_stage_estimate, PrivacyParams, ScoreKind};

fn main() -> nodedp::Result<()> {
    let n = 10;
    let a = sample_er(n, 0.4, 21)?;
    println!("d(A) = {:.3}", average_degree(&a));
    for eps in [0.5, 1.0, 4.0] {
        let privacy = PrivacyParams { grid_step: Some(1.0), ..PrivacyParams::new(eps) };
        let two = two_stage_estimate(&a, ScoreKind::FineEr, 0.0, 1.0, &privacy, 3)?;
        let lap = laplace_baseline(&a, eps, 3)? * n as f64;
        println!(
            "eps {eps:<4} two-stage: coarse {:>5.2} fine {:>5.2} (spent {:.2})   laplace {:>6.2}",
            two.coarse.estimate,
            two.estimate(),
            two.epsilon_spent(),
            lap
        );
    }
    Ok(())
}
