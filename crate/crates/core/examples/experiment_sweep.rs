//! A small sweep through the experiment harness, written under the system temp dir.
//!
//! ```bash
//! cargo run --release --example experiment_sweep
//! ```

use nodedp::harness::{run_experiment, ExperimentConfig};

const CONFIG: &str = r#"
seed_base = 7
trials = 20
output_dir = "PLACEHOLDER"
mechanisms = ["laplace", "empirical", "robust_coarse"]
adversary = "degree_boost"

[sweep]
n = [12, 24]
p = [0.5]
epsilon = [1.0]
eta = [0.1]
"#;

fn main() -> nodedp::Result<()> {
    let out = std::env::temp_dir().join("nodedp-sweep");
    let mut cfg = ExperimentConfig::from_toml(CONFIG)?;
    cfg.output_dir = out.clone();
    let report = run_experiment(&cfg)?;
    println!("{:<15} {:>4} {:>8} {:>8}", "mechanism", "n", "median", "p90");
    for row in &report.summary {
        println!(
            "{:<15} {:>4} {:>8.4} {:>8.4}",
            row.mechanism.name(),
            row.n,
            row.median_relative_error.unwrap_or(f64::NAN),
            row.p90_relative_error.unwrap_or(f64::NAN)
        );
    }
    println!("outputs in {}", out.display());
    Ok(())
}
