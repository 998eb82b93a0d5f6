//! Binomial coupling behind the privacy lower bound: the distance law, the TV bound,
//! and the coupling inequality tested on two estimators.
//!
//! ```bash
//! cargo run --release --example coupling_lower_bound
//! ```

use nodedp::graph::Graph;
use nodedp::lower_bounds::{coupled_distances, coupling_sweep, privacy_lb_experiment, to_csv, CouplingParams};
use nodedp::mechanism::{empirical_estimate, laplace_baseline};

fn main() -> nodedp::Result<()> {
    print!("{}", to_csv(&coupling_sweep(&[40, 160], &[0.2], &[0.01, 0.05], 2000, 1)?)?);

    let params = CouplingParams::new(40, 0.2, 0.05);
    let dists = coupled_distances(&params, 2000, 2)?;
    let mean = dists.iter().sum::<usize>() as f64 / dists.len() as f64;
    println!("mean dist {mean:.3} vs n Delta {:.3}", params.n as f64 * params.delta()?);

    let eps = 0.5;
    let laplace = |g: &Graph, seed| laplace_baseline(g, eps, seed).unwrap_or(f64::NAN);
    let exact = |g: &Graph, _| empirical_estimate(g).unwrap_or(f64::NAN);
    for (name, m) in [("laplace", &laplace as &(dyn Fn(&Graph, u64) -> f64 + Sync)), ("exact density", &exact)] {
        let r = privacy_lb_experiment(m, &params, eps, 4000, 3)?;
        println!("{name:<14} lhs {:.4} rhs {:.4} violated {}", r.lhs, r.rhs, r.violated);
    }
    Ok(())
}
