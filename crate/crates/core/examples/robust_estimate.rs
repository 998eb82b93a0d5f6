//! Robust estimators against the empirical density under each adversary.
//!
//! ```bash
//! cargo run --release --example robust_estimate
//! ```

use nodedp::corruption::{corrupt, CorruptionParams, Strategy};
use nodedp::graph::sample_er;
use nodedp::mechanism::{empirical_estimate, robust_coarse, robust_fine, ScoreKind};

fn main() -> nodedp::Result<()> {
    let (n, p, eta) = (12, 0.5, 0.1);
    let d0 = n as f64 * p;
    let g = sample_er(n, p, 30)?;
    println!("d0 = {d0}");
    println!("{:<20} {:>9} {:>9} {:>9}", "adversary", "empirical", "coarse", "fine");
    for s in Strategy::ALL {
        let (a, _) = corrupt(&g, &CorruptionParams::new(eta, s, 31))?;
        println!(
            "{:<20} {:>9.3} {:>9.3} {:>9.3}",
            s.name(),
            empirical_estimate(&a)? * n as f64,
            robust_coarse(&a, eta, 1.0)?,
            robust_fine(&a, eta, 1.0, ScoreKind::FineEr)?
        );
    }
    Ok(())
}
