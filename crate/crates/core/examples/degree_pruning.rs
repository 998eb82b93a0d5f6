//! Degree pruning, spectral statistics and the feasibility witnesses for the three
//! regularity systems.
//!
//! ```bash
//! cargo run --release --example degree_pruning
//! ```

use nodedp::corruption::{corrupt, CorruptionParams, Strategy};
use nodedp::graph::{average_degree, sample_er};
use nodedp::regularity::{
    centered_spectral_norm, construct_witness_coarse, construct_witness_fine_er, degree_deviation, truncate_by_degree,
    DEFAULT_SPECTRAL_C,
};

fn main() -> nodedp::Result<()> {
    let (n, d) = (500, 10.0);
    let g = sample_er(n, d / n as f64, 3)?;
    let t = 2.0 * std::f64::consts::E.powi(2);
    for threshold in [t * d, 1.5 * d] {
        let pruned = truncate_by_degree(&g, threshold)?;
        let removed = pruned.kept.iter().filter(|k| !**k).count();
        println!("threshold {threshold:.1}: removed {removed} nodes and {} edges", pruned.pruned_edge_count);
    }

    let g = sample_er(200, 0.1, 4)?;
    println!(
        "G(200, 0.1): ||A - d/n J|| = {:.3}, max |deg - d| = {:.3}, 4C sqrt(ln n) = {:.3}",
        centered_spectral_norm(&g),
        degree_deviation(&g),
        4.0 * DEFAULT_SPECTRAL_C * (200f64).ln().sqrt()
    );

    let eta = 0.05;
    let (a, receipt) = corrupt(&g, &CorruptionParams::new(eta, Strategy::PlantedDenseRows, 8))?;
    let coarse = construct_witness_coarse(&a, &receipt, eta, 1.0, 20.0)?;
    println!("coarse witness: d(A*) = {:.3}, |z*| = {}", average_degree(coarse.a_star()), coarse.z_star.iter().filter(|z| **z).count());
    let fine = construct_witness_fine_er(&a, &receipt, eta, 20.0, DEFAULT_SPECTRAL_C)?;
    println!("fine ER witness: d(A*) = {:.3}", average_degree(fine.a_star()));
    Ok(())
}
