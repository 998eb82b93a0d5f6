//! Writes one relaxed feasibility problem in SDPA sparse format for an external solver
//! and reads it back.
//!
//! ```bash
//! cargo run --example export_sdpa -- problem.dat-s
//! ```

use nodedp::graph::sample_er;
use nodedp::mechanism::{score_system, ScoreKind, ScoreParams};
use nodedp::sos::relax;
use nodedp::sos::sdpa::SdpaFile;
use nodedp::sos::export_sdpa;

fn main() -> nodedp::Result<()> {
    let a = sample_er(5, 0.4, 2)?;
    let params = ScoreParams::new(ScoreKind::Coarse, 0.2, 1.0);
    let problem = relax(&score_system(&a, &params, 2.0, 1)?, 2)?;
    let text = export_sdpa(&problem);

    let parsed = SdpaFile::parse(&text)?;
    println!("{} free variables, block sizes {:?}, {} nonzeros", parsed.m, parsed.block_sizes, parsed.entries.len());
    match std::env::args().nth(1) {
        Some(path) => std::fs::write(&path, text)?,
        None => print!("{}", text.lines().take(4).map(|l| format!("{l}\n")).collect::<String>()),
    }
    Ok(())
}
