//! Builds a score system, relaxes it and solves it, then compares the relaxed score
//! against the exhaustive-search score on a small graph.
//!
//! ```bash
//! cargo run --release --example sos_feasibility
//! ```

use nodedp::graph::{average_degree, sample_er};
use nodedp::mechanism::{score_system, sos_score_detailed, ScoreKind, ScoreParams};
use nodedp::sos::{brute_force_score, check_feasibility_with, relax, SystemKind, SystemParams};

fn main() -> nodedp::Result<()> {
    let a = sample_er(7, 0.5, 12)?;
    let params = ScoreParams::new(ScoreKind::Coarse, 0.1, 1.0);
    println!("d(A) = {:.3}", average_degree(&a));

    let problem = relax(&score_system(&a, &params, average_degree(&a), 0)?, 2)?;
    let r = check_feasibility_with(&problem, &params.solve);
    println!("window at d(A), gamma = 0: {:?} after {} iterations (residual {:.2e})", r.status, r.iterations, r.residual);

    let sp = SystemParams { sigma: Some(params.sigma(7)), alpha: Some(params.alpha(7)), ..SystemParams::default() };
    for d in [0.0, 1.5, 3.0, 4.5, 6.0] {
        let relaxed = sos_score_detailed(d, &a, &params)?;
        let exact = brute_force_score(d, &a, SystemKind::C, &sp)?;
        println!("d = {d:.1}: relaxed score {} <= exhaustive score {exact} ({} solves)", relaxed.score, relaxed.solves);
    }
    Ok(())
}
