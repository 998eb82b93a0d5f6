//! Exact scores at tiny `n` by enumerating removed node sets.

use super::conic::{ConicBuilder, Method, SolverTolerances, Status};
use super::poly::{Poly, Var};
use super::system::{build_system, Body, PolynomialSystem, SystemKind, SystemParams};
use crate::error::{param, Result};
use crate::graph::Graph;

/// Largest `n` accepted by [`brute_force_score`].
pub const BRUTE_FORCE_MAX_N: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BruteOutcome {
    /// Size of the smallest feasible removed set, or `n` if none is feasible.
    pub score: usize,
    pub subsets_checked: usize,
    /// Subsets whose convex subproblem was undecided (counted as infeasible).
    pub undecided: usize,
}

/// Visits the `k`-subsets of `0..n` in lexicographic order until `f` returns true.
fn any_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if f(&idx) {
            return true;
        }
        let mut i = k;
        while i > 0 && idx[i - 1] == i - 1 + n - k {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn linear_terms(p: &Poly, free: &[Option<usize>], pair: &dyn Fn(usize, usize) -> usize) -> (Vec<(usize, f64)>, f64) {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    for (m, c) in p.terms() {
        match m.vars() {
            [] => constant += c,
            [Var::Y(i, j)] => terms.push((free[pair(*i, *j)].expect("fixed variable survived substitution"), c)),
            _ => panic!("nonlinear term survived substitution"),
        }
    }
    (terms, constant)
}

/// Decides whether removing exactly the nodes in `removed` admits a feasible `Y`.
fn feasible_with_removed(system: &PolynomialSystem, a: &Graph, removed: &[bool], tol: &SolverTolerances) -> Status {
    let n = a.n();
    let pair = |i: usize, j: usize| if i < j { i * n + j } else { j * n + i };
    let mut free = vec![None; n * n];
    let mut start = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if removed[i] || removed[j] {
                free[pair(i, j)] = Some(start.len());
                start.push(if a.has_edge(i, j) { 1.0 } else { 0.0 });
            }
        }
    }
    let subst = |v: Var| match v {
        Var::Z(i) => Poly::constant(if removed[i] { 0.0 } else { 1.0 }),
        Var::Y(i, j) if i == j => Poly::zero(),
        Var::Y(i, j) if free[pair(i, j)].is_none() => Poly::constant(if a.has_edge(i, j) { 1.0 } else { 0.0 }),
        Var::Y(i, j) => Poly::var(Var::Y(i.min(j), i.max(j))),
    };
    let mut b = ConicBuilder::new(start.len()).with_y_bound((start.len() as f64).sqrt() * 1.001 + 1e-9);
    for c in &system.constraints {
        match &c.body {
            Body::Eq(p) => {
                let (t, k) = linear_terms(&p.substitute(&subst), &free, &pair);
                b.add_eq(t, k);
            }
            Body::Ge(p) => {
                let (t, k) = linear_terms(&p.substitute(&subst), &free, &pair);
                b.add_ge(t, k);
            }
            Body::Psd { dim, entries } => {
                let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
                for i in 0..*dim {
                    for j in i..*dim {
                        let e = &(&entries[i * dim + j] + &entries[j * dim + i]) * &Poly::constant(0.5);
                        upper.push(linear_terms(&e.substitute(&subst), &free, &pair));
                    }
                }
                b.add_psd(*dim, upper);
            }
        }
    }
    b.build().solve(tol, Some(&start), Method::DouglasRachford).status
}

/// Exact (pre-relaxation) score: the smallest number of removed nodes for which some
/// `Y in [0,1]^{n x n}` agreeing with `A` off the removed set satisfies the
/// regularity system `kind` and the density window around `d`.
///
/// `params` supplies `sigma`, `delta`, `d_hat`, `alpha` and the window form; the graph,
/// `gamma` and target are set here.
pub fn brute_force_score_detailed(
    d: f64,
    a: &Graph,
    kind: SystemKind,
    params: &SystemParams,
    tol: &SolverTolerances,
) -> Result<BruteOutcome> {
    let n = a.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(param(format!("brute force supports n <= {BRUTE_FORCE_MAX_N}, got {n}")));
    }
    let p = SystemParams { a: Some(a.clone()), gamma: Some(1.0), d_target: Some(d), ..params.clone() };
    let system = build_system(n, kind, &p)?.union(build_system(n, SystemKind::DensityWindow, &p)?)?;
    let mut checked = 0;
    let mut undecided = 0;
    for k in 0..=n {
        let found = any_subset(n, k, &mut |s| {
            let mut removed = vec![false; n];
            for &v in s {
                removed[v] = true;
            }
            checked += 1;
            match feasible_with_removed(&system, a, &removed, tol) {
                Status::Feasible => true,
                Status::Infeasible => false,
                Status::Undecided => {
                    undecided += 1;
                    false
                }
            }
        });
        if found {
            return Ok(BruteOutcome { score: k, subsets_checked: checked, undecided });
        }
    }
    Ok(BruteOutcome { score: n, subsets_checked: checked, undecided })
}

pub fn brute_force_score(d: f64, a: &Graph, kind: SystemKind, params: &SystemParams) -> Result<usize> {
    Ok(brute_force_score_detailed(d, a, kind, params, &SolverTolerances::default())?.score)
}
