//! Each adversary applied to the same graph, with the receipt it leaves behind.
//!
//! ```bash
//! cargo run --example corrupt_graph
//! ```

use nodedp::corruption::{budget, corrupt, CorruptionParams, Strategy};
use nodedp::graph::{average_degree, node_distance, sample_er};

fn main() -> nodedp::Result<()> {
    let (n, eta) = (60, 0.1);
    let g = sample_er(n, 0.1, 5)?;
    println!("clean d(A) = {:.3}, budget floor(eta n) = {}", average_degree(&g), budget(eta, n));
    for s in Strategy::ALL {
        let (a, receipt) = corrupt(&g, &CorruptionParams::new(eta, s, 9))?;
        assert_eq!(receipt.restore(&a)?, g);
        println!(
            "{:<20} d(A) = {:>7.3}  corrupted {:?}  dist {}",
            s.name(),
            average_degree(&a),
            receipt.corrupted_nodes,
            node_distance(&g, &a)?
        );
    }

    let mut targeted = CorruptionParams::new(eta, Strategy::DegreeDelete, 9);
    targeted.targeted_high_degree = true;
    let (a, _) = corrupt(&g, &targeted)?;
    println!("targeted degree_delete: d(A) = {:.3}", average_degree(&a));
    Ok(())
}
