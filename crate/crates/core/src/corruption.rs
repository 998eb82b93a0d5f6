//! Node-corruption adversaries and the hard instances behind the robustness lower bound.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, param, Error, Result};
use crate::graph::{Graph, ProbabilityMatrix};
use crate::rng;

/// How corrupted rows are rewritten.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Every pair touching a corrupted node is redrawn as a fair coin.
    RandomRewire,
    /// Corrupted rows become all ones off the diagonal.
    DegreeBoost,
    /// Corrupted nodes are isolated.
    DegreeDelete,
    /// Corrupted nodes form a clique and attach to each other node with probability 1/2.
    PlantedDenseRows,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Self::RandomRewire, Self::DegreeBoost, Self::DegreeDelete, Self::PlantedDenseRows];

    pub fn name(self) -> &'static str {
        match self {
            Self::RandomRewire => "random_rewire",
            Self::DegreeBoost => "degree_boost",
            Self::DegreeDelete => "degree_delete",
            Self::PlantedDenseRows => "planted_dense_rows",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|st| st.name() == key)
            .ok_or_else(|| param(format!("unknown adversary `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionParams {
    pub eta: f64,
    pub strategy: Strategy,
    pub seed: u64,
    /// Select the highest-degree nodes instead of a uniform sample.
    pub targeted_high_degree: bool,
}

impl CorruptionParams {
    pub fn new(eta: f64, strategy: Strategy, seed: u64) -> Self {
        Self { eta, strategy, seed, targeted_high_degree: false }
    }
}

/// Which nodes were corrupted, plus their original neighbourhoods.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionReceipt {
    pub corrupted_nodes: Vec<usize>,
    /// `z_circ[i]` is true iff node `i` is uncorrupted.
    pub z_circ: Vec<bool>,
    /// Neighbours of each corrupted node before corruption, aligned with `corrupted_nodes`.
    pub original_neighbors: Vec<Vec<usize>>,
}

impl CorruptionReceipt {
    pub fn clean(n: usize) -> Self {
        Self { corrupted_nodes: Vec::new(), z_circ: vec![true; n], original_neighbors: Vec::new() }
    }

    /// Rebuilds the pre-corruption graph from a corrupted graph.
    pub fn restore(&self, corrupted: &Graph) -> Result<Graph> {
        if corrupted.n() != self.z_circ.len() {
            return Err(Error::SizeMismatch { expected: self.z_circ.len(), found: corrupted.n() });
        }
        let mut g = corrupted.clone();
        for &v in &self.corrupted_nodes {
            g.isolate(v);
        }
        for (&v, nbrs) in self.corrupted_nodes.iter().zip(&self.original_neighbors) {
            for &u in nbrs {
                g.set_edge(v, u, true);
            }
        }
        Ok(g)
    }

    /// CSV with columns `node,corrupted,z_circ,original_neighbors` (neighbours `;`-separated).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,corrupted,z_circ,original_neighbors\n");
        for (i, &z) in self.z_circ.iter().enumerate() {
            let nbrs = self
                .corrupted_nodes
                .iter()
                .position(|&v| v == i)
                .map(|k| self.original_neighbors[k].iter().map(|u| u.to_string()).collect::<Vec<_>>().join(";"))
                .unwrap_or_default();
            let _ = writeln!(out, "{i},{},{},{nbrs}", !z as u8, z as u8);
        }
        out
    }
}

/// Corruption budget `floor(eta * n)`.
pub fn budget(eta: f64, n: usize) -> usize {
    ((eta * n as f64) + 1e-9).floor() as usize
}

fn select_nodes(g: &Graph, params: &CorruptionParams, k: usize, rng: &mut rng::Rng) -> Vec<usize> {
    let n = g.n();
    let useful = |v: usize| match params.strategy {
        Strategy::DegreeBoost => g.degree(v) + 1 < n,
        Strategy::DegreeDelete => g.degree(v) > 0,
        _ => true,
    };
    // nodes whose row the strategy would actually change come first
    let (mut pool, mut rest): (Vec<usize>, Vec<usize>) = (0..n).partition(|&v| useful(v));
    if params.targeted_high_degree {
        let by_degree = |a: &usize, b: &usize| g.degree(*b).cmp(&g.degree(*a)).then(a.cmp(b));
        pool.sort_by(by_degree);
        rest.sort_by(by_degree);
    } else {
        pool.shuffle(rng);
        rest.shuffle(rng);
    }
    let mut chosen: Vec<usize> = pool.into_iter().chain(rest).take(k).collect();
    chosen.sort_unstable();
    chosen
}

/// Rewrites the rows and columns of at most `floor(eta * n)` nodes.
pub fn corrupt(g: &Graph, params: &CorruptionParams) -> Result<(Graph, CorruptionReceipt)> {
    check_probability("eta", params.eta)?;
    let n = g.n();
    let k = budget(params.eta, n);
    if k == 0 {
        return Ok((g.clone(), CorruptionReceipt::clean(n)));
    }
    let mut rng = rng::from_seed(params.seed);
    let nodes = select_nodes(g, params, k, &mut rng);
    let original_neighbors = nodes.iter().map(|&v| g.neighbors(v).collect()).collect();
    let mut is_bad = vec![false; n];
    for &v in &nodes {
        is_bad[v] = true;
    }
    let mut out = g.clone();
    match params.strategy {
        Strategy::RandomRewire => {
            for &v in &nodes {
                for u in 0..n {
                    // pairs between two corrupted nodes are drawn once, by the smaller index
                    if u != v && !(is_bad[u] && u < v) {
                        out.set_edge(v, u, rng.random::<bool>());
                    }
                }
            }
        }
        Strategy::DegreeBoost => {
            for &v in &nodes {
                for u in (0..n).filter(|&u| u != v) {
                    out.set_edge(v, u, true);
                }
            }
        }
        Strategy::DegreeDelete => {
            for &v in &nodes {
                out.isolate(v);
            }
        }
        Strategy::PlantedDenseRows => {
            for &v in &nodes {
                for u in (0..n).filter(|&u| u != v) {
                    let present = if is_bad[u] { true } else { rng.random::<bool>() };
                    out.set_edge(v, u, present);
                }
            }
        }
    }
    let z_circ = is_bad.iter().map(|&b| !b).collect();
    Ok((out, CorruptionReceipt { corrupted_nodes: nodes, z_circ, original_neighbors }))
}

/// Hard pair for the robustness lower bound: both matrices equal `p` except on the
/// rows and columns of the first `floor(eta * n)` nodes, which carry `r * p` in the
/// first matrix and `0` in the second.
pub fn hard_instance_pair(n: usize, p: f64, eta: f64, r: f64) -> Result<(ProbabilityMatrix, ProbabilityMatrix)> {
    check_probability("p", p)?;
    check_probability("eta", eta)?;
    let high = r * p;
    if !(0.0..=1.0).contains(&high) {
        return Err(param(format!("r * p = {high} must lie in [0, 1]")));
    }
    let k = budget(eta, n);
    let special = |i: usize, j: usize| i < k || j < k;
    let q0 = ProbabilityMatrix::from_fn(n, |i, j| if special(i, j) { high } else { p });
    let q1 = ProbabilityMatrix::from_fn(n, |i, j| if special(i, j) { 0.0 } else { p });
    Ok((q0, q1))
}

/// Samples `(G(Q0), G(Q1))` from shared uniforms, so the graphs differ only on pairs
/// where the matrices differ. For [`hard_instance_pair`] that confines the difference to
/// the special nodes, giving node distance at most `floor(eta * n)`.
pub fn sample_hard_instance_coupled(q0: &ProbabilityMatrix, q1: &ProbabilityMatrix, seed: u64) -> Result<(Graph, Graph)> {
    if q0.n() != q1.n() {
        return Err(Error::SizeMismatch { expected: q0.n(), found: q1.n() });
    }
    let n = q0.n();
    let mut rng = rng::from_seed(seed);
    let (mut g0, mut g1) = (Graph::empty(n), Graph::empty(n));
    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = rng.random();
            g0.set_edge(i, j, u < q0.get(i, j));
            g1.set_edge(i, j, u < q1.get(i, j));
        }
    }
    Ok((g0, g1))
}
