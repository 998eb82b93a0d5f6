//! Graphs, random-graph models and node distance.
//!
//! Adjacency is stored densely. The average degree follows the matrix-sum
//! convention `d(A) = sum_ij A_ij / n`, so every edge is counted twice.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, param, Error, Result};
use crate::rng;

/// Undirected simple graph: symmetric adjacency with zero diagonal.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    adj: Vec<bool>,
}

impl std::fmt::Debug for Graph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("edges", &self.edges().collect::<Vec<_>>())
            .finish()
    }
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self { n, adj: vec![false; n * n] }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                g.set_edge(i, j, true);
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n || i == j {
                return Err(param(format!("invalid edge ({i}, {j}) for n = {n}")));
            }
            g.set_edge(i, j, true);
        }
        Ok(g)
    }

    /// Builds a graph from a full boolean matrix, validating symmetry and the zero diagonal.
    pub fn from_adjacency(rows: &[Vec<bool>]) -> Result<Self> {
        let n = rows.len();
        let mut g = Self::empty(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::SizeMismatch { expected: n, found: row.len() });
            }
            if row[i] {
                return Err(param(format!("self-loop at node {i}")));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != rows[j][i] {
                    return Err(param(format!("adjacency not symmetric at ({i}, {j})")));
                }
                g.adj[i * n + j] = v;
            }
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    /// Sets or clears the edge `{i, j}`. Panics on a self-loop.
    #[inline]
    pub fn set_edge(&mut self, i: usize, j: usize, present: bool) {
        assert!(i != j, "self-loops are not allowed");
        self.adj[i * self.n + j] = present;
        self.adj[j * self.n + i] = present;
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.adj[i * self.n..(i + 1) * self.n]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().filter(|&&b| b).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&b| b).count() / 2
    }

    /// Sum of all adjacency entries, i.e. twice the edge count.
    pub fn adjacency_sum(&self) -> usize {
        2 * self.edge_count()
    }

    /// Edges `(i, j)` with `i < j` in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| ((i + 1)..self.n).filter(move |&j| self.has_edge(i, j)).map(move |j| (i, j)))
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j)
    }

    /// Removes every edge incident to `i`.
    pub fn isolate(&mut self, i: usize) {
        for j in 0..self.n {
            if j != i {
                self.set_edge(i, j, false);
            }
        }
    }

    /// Relabels nodes so that node `i` of `self` becomes node `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::SizeMismatch { expected: self.n, found: perm.len() });
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(param("permutation is not a bijection"));
            }
        }
        let mut g = Self::empty(self.n);
        for (i, j) in self.edges() {
            g.set_edge(perm[i], perm[j], true);
        }
        Ok(g)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| if self.has_edge(i, j) { 1.0 } else { 0.0 })
    }

    /// Serialises to the edge-list format: `n <count>` then `e i j` lines with `i < j`.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for (i, j) in self.edges() {
            let _ = writeln!(out, "e {i} {j}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut g: Option<Graph> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |msg: &str| Error::Parse { line: lineno + 1, msg: msg.to_string() };
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("n") => {
                    if g.is_some() {
                        return Err(perr("duplicate header"));
                    }
                    let n = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| perr("bad node count"))?;
                    g = Some(Graph::empty(n));
                }
                Some("e") => {
                    let graph = g.as_mut().ok_or_else(|| perr("edge before header"))?;
                    let i: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| perr("bad endpoint"))?;
                    let j: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| perr("bad endpoint"))?;
                    if i >= j || j >= graph.n {
                        return Err(perr("edge must satisfy i < j < n"));
                    }
                    graph.set_edge(i, j, true);
                }
                _ => return Err(perr("expected `n` or `e` record")),
            }
        }
        g.ok_or(Error::Parse { line: 0, msg: "missing header".into() })
    }
}

/// Symmetric edge-probability matrix with zero diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMatrix {
    n: usize,
    q: Vec<f64>,
}

impl ProbabilityMatrix {
    pub fn constant(n: usize, p: f64) -> Result<Self> {
        check_probability("p", p)?;
        Ok(Self::from_fn(n, |_, _| p))
    }

    /// Builds `q` from a function evaluated on pairs `i < j`.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                q[i * n + j] = v;
                q[j * n + i] = v;
            }
        }
        Self { n, q }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut q = vec![0.0; n * n];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::SizeMismatch { expected: n, found: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                check_probability("q entry", v)?;
                if i == j && v != 0.0 {
                    return Err(param("probability matrix must have zero diagonal"));
                }
                if (v - rows[j][i]).abs() > 0.0 {
                    return Err(param(format!("probability matrix not symmetric at ({i}, {j})")));
                }
                q[i * n + j] = v;
            }
        }
        Ok(Self { n, q })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        check_probability("q entry", v)?;
        if i == j {
            return Err(param("diagonal entries are fixed at zero"));
        }
        self.q[i * self.n + j] = v;
        self.q[j * self.n + i] = v;
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.q.iter().sum()
    }

    /// Edge density `p = sum_ij q_ij / (n^2 - n)`.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.sum() / (self.n * (self.n - 1)) as f64
        }
    }

    pub fn max_entry(&self) -> f64 {
        self.q.iter().cloned().fold(0.0, f64::max)
    }

    /// Upper-triangle CSV: header `i,j,q` then one row per pair `i < j`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,q\n");
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let _ = writeln!(out, "{i},{j},{}", self.get(i, j));
            }
        }
        out
    }

    /// Parses the upper-triangle CSV. The node count is inferred from the largest index.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut entries = Vec::new();
        let mut n = 0;
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let perr = |msg: &str| Error::Parse { line: k + 2, msg: msg.to_string() };
            if rec.len() != 3 {
                return Err(perr("expected three fields"));
            }
            let i: usize = rec[0].parse().map_err(|_| perr("bad row index"))?;
            let j: usize = rec[1].parse().map_err(|_| perr("bad column index"))?;
            let v: f64 = rec[2].parse().map_err(|_| perr("bad probability"))?;
            if i >= j {
                return Err(perr("expected i < j"));
            }
            n = n.max(j + 1);
            entries.push((i, j, v));
        }
        let mut q = Self { n, q: vec![0.0; n * n] };
        for (i, j, v) in entries {
            q.set(i, j, v)?;
        }
        Ok(q)
    }
}

/// Model summary: size, density `p0`, expected degree `d0 = n * p0` and ratio `r`
/// with `max_ij q_ij <= r * p0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub p0: f64,
    pub d0: f64,
    pub r: f64,
}

impl ModelParams {
    pub fn er(n: usize, p: f64) -> Result<Self> {
        check_probability("p", p)?;
        Ok(Self { n, p0: p, d0: n as f64 * p, r: 1.0 })
    }

    pub fn from_matrix(q: &ProbabilityMatrix) -> Self {
        let p0 = q.density();
        let r = if p0 > 0.0 { (q.max_entry() / p0).max(1.0) } else { 1.0 };
        Self { n: q.n(), p0, d0: q.n() as f64 * p0, r }
    }
}

/// Directed graph without self-loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    adj: Vec<bool>,
}

impl DirectedGraph {
    pub fn empty(n: usize) -> Self {
        Self { n, adj: vec![false; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    pub fn set_arc(&mut self, i: usize, j: usize, present: bool) {
        assert!(i != j, "self-loops are not allowed");
        self.adj[i * self.n + j] = present;
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.adj[i * self.n..(i + 1) * self.n].iter().filter(|&&b| b).count()
    }
}

/// Samples `G(n, p)`. Pairs are visited with geometric skips, so the cost is
/// proportional to the number of edges.
pub fn sample_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    check_probability("p", p)?;
    let mut g = Graph::empty(n);
    if n < 2 || p == 0.0 {
        return Ok(g);
    }
    if p == 1.0 {
        return Ok(Graph::complete(n));
    }
    let mut rng = rng::from_seed(seed);
    let total = (n * (n - 1) / 2) as u64;
    let log_q = (1.0 - p).ln();
    // row_start[i] is the linear index of pair (i, i + 1)
    let mut row = 0usize;
    let mut row_start = 0u64;
    let mut idx: u64 = 0;
    let mut first = true;
    loop {
        let u: f64 = rng.random();
        let skip = ((1.0 - u).ln() / log_q).floor();
        if !skip.is_finite() || skip >= total as f64 {
            break;
        }
        idx = if first { skip as u64 } else { idx + 1 + skip as u64 };
        first = false;
        if idx >= total {
            break;
        }
        while idx >= row_start + (n - 1 - row) as u64 {
            row_start += (n - 1 - row) as u64;
            row += 1;
        }
        let col = row + 1 + (idx - row_start) as usize;
        g.set_edge(row, col, true);
    }
    Ok(g)
}

/// Samples `G(n, Q)` with independent pairs.
pub fn sample_inhomogeneous(q: &ProbabilityMatrix, seed: u64) -> Graph {
    let n = q.n();
    let mut rng = rng::from_seed(seed);
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = rng.random();
            if u < q.get(i, j) {
                g.set_edge(i, j, true);
            }
        }
    }
    g
}

/// `d(A) = sum_ij A_ij / n`.
pub fn average_degree(g: &Graph) -> f64 {
    if g.n() == 0 {
        0.0
    } else {
        g.adjacency_sum() as f64 / g.n() as f64
    }
}

/// `sum_ij A_ij / (n^2 - n)`.
pub fn edge_density(g: &Graph) -> Result<f64> {
    let n = g.n();
    if n < 2 {
        return Err(param("edge density needs n >= 2"));
    }
    Ok(g.adjacency_sum() as f64 / (n * (n - 1)) as f64)
}

fn check_same_size(g: &Graph, h: &Graph) -> Result<()> {
    if g.n() != h.n() {
        return Err(Error::SizeMismatch { expected: g.n(), found: h.n() });
    }
    Ok(())
}

/// Number of nodes whose adjacency row differs between `g` and `h`.
///
/// This upper-bounds [`node_distance`] and can exceed it by up to a factor of two
/// (a single differing edge changes two rows).
pub fn row_difference_count(g: &Graph, h: &Graph) -> Result<usize> {
    check_same_size(g, h)?;
    Ok((0..g.n()).filter(|&i| g.row(i) != h.row(i)).count())
}

fn difference_graph(g: &Graph, h: &Graph) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if g.has_edge(i, j) != h.has_edge(i, j) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

/// Bounded search for a vertex cover of size at most `k`.
fn cover_at_most(adj: &mut [Vec<usize>], removed: &mut [bool], k: usize) -> bool {
    let live_deg = |adj: &[Vec<usize>], removed: &[bool], v: usize| adj[v].iter().filter(|&&u| !removed[u]).count();
    let mut best = None;
    let mut best_deg = 0;
    let mut edges = 0;
    for v in 0..adj.len() {
        if removed[v] {
            continue;
        }
        let d = live_deg(adj, removed, v);
        edges += d;
        if d > best_deg {
            best_deg = d;
            best = Some(v);
        }
    }
    let edges = edges / 2;
    let Some(v) = best else { return true };
    if k == 0 || edges > k * best_deg {
        return false;
    }
    if best_deg == 1 {
        return edges <= k;
    }
    removed[v] = true;
    if cover_at_most(adj, removed, k - 1) {
        removed[v] = false;
        return true;
    }
    removed[v] = false;
    let nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| !removed[u]).collect();
    if nbrs.len() <= k {
        for &u in &nbrs {
            removed[u] = true;
        }
        let ok = cover_at_most(adj, removed, k - nbrs.len());
        for &u in &nbrs {
            removed[u] = false;
        }
        if ok {
            return true;
        }
    }
    false
}

/// Returns whether `g` can be turned into `h` by rewiring at most `k` nodes.
pub fn node_distance_at_most(g: &Graph, h: &Graph, k: usize) -> Result<bool> {
    check_same_size(g, h)?;
    let mut adj = difference_graph(g, h);
    let mut removed = vec![false; g.n()];
    Ok(cover_at_most(&mut adj, &mut removed, k))
}

/// Minimum number of nodes that must be rewired to turn `g` into `h`.
///
/// Rewiring a node may change any pair incident to it, so the distance is the
/// minimum vertex cover of the graph of differing pairs. Computed exactly by
/// bounded search, which is fast when the distance is small.
pub fn node_distance(g: &Graph, h: &Graph) -> Result<usize> {
    check_same_size(g, h)?;
    let mut adj = difference_graph(g, h);
    // a greedy maximal matching gives a lower bound
    let mut matched = vec![false; g.n()];
    let mut lower = 0;
    for i in 0..g.n() {
        if matched[i] {
            continue;
        }
        if let Some(&j) = adj[i].iter().find(|&&j| !matched[j]) {
            matched[i] = true;
            matched[j] = true;
            lower += 1;
        }
    }
    let mut removed = vec![false; g.n()];
    let mut k = lower;
    while !cover_at_most(&mut adj, &mut removed, k) {
        k += 1;
    }
    Ok(k)
}

/// Samples a directed `G(n, p)` with every ordered pair independent.
pub fn sample_directed_er(n: usize, p: f64, seed: u64) -> Result<DirectedGraph> {
    check_probability("p", p)?;
    let mut rng = rng::from_seed(seed);
    let mut g = DirectedGraph::empty(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let u: f64 = rng.random();
                if u < p {
                    g.set_arc(i, j, true);
                }
            }
        }
    }
    Ok(g)
}

/// Draws the out-neighbourhood of one node by the outdegree-first route:
/// `d ~ Bin(n, p)`, then a uniform `d`-subset of `[n]`. The self-loop, if drawn, is dropped,
/// which leaves every arc `(i, j)`, `j != i`, present independently with probability `p`.
pub(crate) fn outdegree_subset(rng: &mut rng::Rng, n: usize, i: usize, d: usize) -> Vec<usize> {
    index::sample(rng, n, d).into_iter().filter(|&j| j != i).collect()
}

/// Outdegree-first sampler. Returns the graph and the drawn outdegrees, which follow
/// `Bin(n, p)` exactly (stored outdegrees exclude a dropped self-loop).
pub fn sample_directed_er_outdegree(n: usize, p: f64, seed: u64) -> Result<(DirectedGraph, Vec<usize>)> {
    check_probability("p", p)?;
    let mut rng = rng::from_seed(seed);
    let mut g = DirectedGraph::empty(n);
    let binom = Binomial::new(n as u64, p).map_err(|e| param(e.to_string()))?;
    let mut drawn = Vec::with_capacity(n);
    for i in 0..n {
        let d = binom.sample(&mut rng) as usize;
        drawn.push(d);
        for j in outdegree_subset(&mut rng, n, i, d) {
            g.set_arc(i, j, true);
        }
    }
    Ok((g, drawn))
}

/// Keeps `{i, j}` iff `i < j` and the arc `(i, j)` is present.
pub fn undirect(dg: &DirectedGraph) -> Graph {
    let n = dg.n();
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if dg.has_arc(i, j) {
                g.set_edge(i, j, true);
            }
        }
    }
    g
}
