//! Erdős–Rényi and inhomogeneous samplers, densities and node distance.
//!
//! ```bash
//! cargo run --example sample_graphs
//! ```

use nodedp::graph::{average_degree, edge_density, node_distance, sample_er, sample_inhomogeneous, ModelParams, ProbabilityMatrix};

fn main() -> nodedp::Result<()> {
    let g = sample_er(200, 0.05, 1)?;
    println!("G(200, 0.05): {} edges, density {:.4}, d(A) {:.3}", g.edge_count(), edge_density(&g)?, average_degree(&g));

    // two communities, denser inside than across
    let q = ProbabilityMatrix::from_fn(200, |i, j| if (i < 100) == (j < 100) { 0.08 } else { 0.02 });
    let model = ModelParams::from_matrix(&q);
    let h = sample_inhomogeneous(&q, 2);
    println!("block model: p0 {:.4}, d0 {:.2}, R {:.2}, sampled d(A) {:.3}", model.p0, model.d0, model.r, average_degree(&h));

    // rewiring two rows moves the graph by exactly two nodes
    let mut g2 = g.clone();
    for v in [3, 17] {
        g2.isolate(v);
    }
    println!("node distance after isolating two nodes: {}", node_distance(&g, &g2)?);
    Ok(())
}
