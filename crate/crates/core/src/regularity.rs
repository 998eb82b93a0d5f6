//! Degree pruning, spectral quantities and feasibility witnesses `(A*, z*)`.

use nalgebra::DMatrix;

use crate::corruption::CorruptionReceipt;
use crate::error::{param, Error, Result};
use crate::graph::{average_degree, Graph};
use crate::linalg;
use crate::sos::system::{build_system, check_system_graph, SystemKind, SystemParams};

/// Above this size the centred spectral norm uses Lanczos instead of a dense eigensolve.
pub const DENSE_EIGEN_MAX_N: usize = 2000;

/// Up to this size witnesses are checked against the symbolic system; above it the
/// same constraints are evaluated numerically.
pub const SYMBOLIC_CHECK_MAX_N: usize = 40;

/// Default constant in the spectral bound `||A - p 11^T|| <= C sqrt(np log n)`.
pub const DEFAULT_SPECTRAL_C: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrunedGraph {
    pub graph: Graph,
    /// `kept[i]` is false iff node `i` was pruned.
    pub kept: Vec<bool>,
    pub pruned_edge_count: usize,
}

/// `log(1/eta)` with `eta` clamped to at least `1/(2n)`, so `eta = 0` stays finite.
pub fn log_inv_eta(eta: f64, n: usize) -> f64 {
    let floor = 1.0 / (2.0 * n.max(1) as f64);
    (1.0 / eta.max(floor)).ln()
}

/// Repeatedly isolates the current maximum-degree node (lowest index on ties) while
/// that degree exceeds `threshold`.
pub fn truncate_by_degree(g: &Graph, threshold: f64) -> Result<PrunedGraph> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(param(format!("threshold must be nonnegative, got {threshold}")));
    }
    let n = g.n();
    let mut graph = g.clone();
    let mut degree = g.degrees();
    let mut kept = vec![true; n];
    let mut pruned = 0;
    loop {
        let Some((v, &dv)) = degree.iter().enumerate().rev().max_by_key(|(_, &d)| d) else { break };
        if dv as f64 <= threshold {
            break;
        }
        let nbrs: Vec<usize> = graph.neighbors(v).collect();
        for u in nbrs {
            degree[u] -= 1;
        }
        pruned += dv;
        degree[v] = 0;
        graph.isolate(v);
        kept[v] = false;
    }
    Ok(PrunedGraph { graph, kept, pruned_edge_count: pruned })
}

/// `||A - (d(A)/n) 11^T||_op`.
pub fn centered_spectral_norm(g: &Graph) -> f64 {
    let n = g.n();
    if n == 0 {
        return 0.0;
    }
    let shift = average_degree(g) / n as f64;
    if n <= DENSE_EIGEN_MAX_N {
        let m = DMatrix::from_fn(n, n, |i, j| if g.has_edge(i, j) { 1.0 } else { 0.0 } - shift);
        return linalg::spectral_norm_dense(&m);
    }
    let lists: Vec<Vec<usize>> = (0..n).map(|i| g.neighbors(i).collect()).collect();
    let matvec = |x: &[f64], out: &mut [f64]| {
        let total: f64 = x.iter().sum();
        for (i, nb) in lists.iter().enumerate() {
            out[i] = nb.iter().map(|&j| x[j]).sum::<f64>() - shift * total;
        }
    };
    linalg::spectral_norm_lanczos(n, matvec, 1e-10, 300)
}

/// `max_i |deg_i - d(A)|`.
pub fn degree_deviation(g: &Graph) -> f64 {
    let d = average_degree(g);
    g.degrees().iter().map(|&k| (k as f64 - d).abs()).fold(0.0, f64::max)
}

/// Evaluates the constraints of `kind` at an integral point without building polynomials.
/// Tolerances match [`crate::sos::system::CHECK_TOL`] scaled by the magnitude of each side.
pub fn satisfies_numeric(kind: SystemKind, params: &SystemParams, y: &Graph, z: &[bool]) -> Result<bool> {
    let n = y.n();
    if z.len() != n {
        return Err(Error::SizeMismatch { expected: n, found: z.len() });
    }
    let tol = |scale: f64| crate::sos::system::CHECK_TOL * scale.abs().max(1.0);
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| param(format!("system {kind:?} requires `{name}`")));
    let dy = average_degree(y);
    let degrees = y.degrees();
    for part in kind.constituents() {
        let ok = match part {
            SystemKind::P1 => {
                let a = params.a.as_ref().ok_or_else(|| param("system P1 requires the input graph"))?;
                if a.n() != n {
                    return Err(Error::SizeMismatch { expected: n, found: a.n() });
                }
                let gamma = need(params.gamma, "gamma")?;
                let mass = z.iter().filter(|&&b| b).count() as f64;
                let agree = y.edges().chain(a.edges()).all(|(i, j)| !(z[i] && z[j]) || y.has_edge(i, j) == a.has_edge(i, j));
                mass >= (1.0 - gamma) * n as f64 - tol(n as f64) && agree
            }
            SystemKind::P2 => {
                let bound = need(params.sigma, "sigma")? * dy;
                degrees.iter().all(|&k| k as f64 <= bound + tol(bound))
            }
            SystemKind::P3 => {
                let bound = need(params.sigma, "sigma")? * need(params.d_hat, "d_hat")?;
                degrees.iter().all(|&k| k as f64 <= bound + tol(bound))
            }
            SystemKind::P4 => {
                let d_hat = need(params.d_hat, "d_hat")?;
                let slack = need(params.sigma, "sigma")? * d_hat.sqrt();
                let bound = need(params.delta, "delta")? * d_hat.sqrt();
                degrees.iter().all(|&k| (k as f64 - dy).abs() <= slack + tol(slack))
                    && centered_spectral_norm(y) <= bound + tol(bound) * n as f64
            }
            SystemKind::DensityWindow => {
                let d = need(params.d_target, "d_target")?;
                let alpha = need(params.alpha, "alpha")?;
                let width = match params.window {
                    crate::sos::system::WindowForm::Relative => alpha * d,
                    crate::sos::system::WindowForm::Absolute => alpha,
                };
                (dy - d).abs() <= width + tol(d)
            }
            SystemKind::C | SystemKind::D | SystemKind::E => unreachable!("constituents are primitive"),
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks `(y, z)` against `kind`, symbolically for small `n` and numerically otherwise.
pub fn witness_satisfies(kind: SystemKind, params: &SystemParams, y: &Graph, z: &[bool]) -> Result<bool> {
    if y.n() <= SYMBOLIC_CHECK_MAX_N {
        check_system_graph(&build_system(y.n(), kind, params)?, y, z)
    } else {
        satisfies_numeric(kind, params, y, z)
    }
}

/// A witness `(A*, z*)` together with the parameters it was checked against.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub pruned: PrunedGraph,
    pub z_star: Vec<bool>,
    pub params: SystemParams,
}

impl Witness {
    pub fn a_star(&self) -> &Graph {
        &self.pruned.graph
    }
}

fn finish(kind: SystemKind, pruned: PrunedGraph, receipt: &CorruptionReceipt, params: SystemParams) -> Result<Witness> {
    let z_star: Vec<bool> = pruned.kept.iter().zip(&receipt.z_circ).map(|(&a, &b)| a && b).collect();
    if !witness_satisfies(kind, &params, &pruned.graph, &z_star)? {
        return Err(Error::Consistency(format!(
            "witness violates system {kind:?} (d(A*) = {:.4}, kept {} of {})",
            average_degree(&pruned.graph),
            z_star.iter().filter(|&&b| b).count(),
            z_star.len()
        )));
    }
    Ok(Witness { pruned, z_star, params })
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&eta) {
        return Err(param(format!("eta must lie in [0, 0.5], got {eta}")));
    }
    Ok(())
}

/// Coarse witness: prune the uncorrupted graph at `log(1/eta) R d0`, set
/// `z* = z_circ * kept`, and check the coarse system with `gamma = 2 eta`,
/// `sigma = 2 log(1/eta) R`.
pub fn construct_witness_coarse(
    a_corrupted: &Graph,
    receipt: &CorruptionReceipt,
    eta: f64,
    r: f64,
    d0: f64,
) -> Result<Witness> {
    check_eta(eta)?;
    let n = a_corrupted.n();
    let l = log_inv_eta(eta, n);
    let original = receipt.restore(a_corrupted)?;
    let pruned = truncate_by_degree(&original, l * r * d0)?;
    let params = SystemParams { gamma: Some((2.0 * eta).min(1.0)), sigma: Some(2.0 * l * r), ..SystemParams::with_graph(a_corrupted) };
    finish(SystemKind::C, pruned, receipt, params)
}

/// Fine witness for inhomogeneous graphs: same pruning as the coarse witness, checked
/// against the fine system with `sigma = 10 log(1/eta) R` and the given `d_hat`.
pub fn construct_witness_fine_inhomo(
    a_corrupted: &Graph,
    receipt: &CorruptionReceipt,
    eta: f64,
    r: f64,
    d0: f64,
    d_hat: f64,
) -> Result<Witness> {
    check_eta(eta)?;
    let n = a_corrupted.n();
    let l = log_inv_eta(eta, n);
    let original = receipt.restore(a_corrupted)?;
    let pruned = truncate_by_degree(&original, l * r * d0)?;
    let params = SystemParams {
        gamma: Some((2.0 * eta).min(1.0)),
        sigma: Some(10.0 * l * r),
        d_hat: Some(d_hat),
        ..SystemParams::with_graph(a_corrupted)
    };
    finish(SystemKind::D, pruned, receipt, params)
}

/// Fine witness for Erdős–Rényi graphs: the uncorrupted graph itself with `z* = z_circ`,
/// checked with `gamma = eta`, `sigma = 4 log n`, `delta = 4 C sqrt(log n)`.
pub fn construct_witness_fine_er(
    a_corrupted: &Graph,
    receipt: &CorruptionReceipt,
    eta: f64,
    d_hat: f64,
    spectral_c: f64,
) -> Result<Witness> {
    check_eta(eta)?;
    let n = a_corrupted.n();
    let ln_n = (n.max(2) as f64).ln();
    let original = receipt.restore(a_corrupted)?;
    let pruned = PrunedGraph { graph: original, kept: vec![true; n], pruned_edge_count: 0 };
    let params = SystemParams {
        gamma: Some(eta),
        sigma: Some(4.0 * ln_n),
        delta: Some(4.0 * spectral_c * ln_n.sqrt()),
        d_hat: Some(d_hat),
        ..SystemParams::with_graph(a_corrupted)
    };
    finish(SystemKind::E, pruned, receipt, params)
}
