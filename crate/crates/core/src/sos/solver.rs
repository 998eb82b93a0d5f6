//! Feasibility of moment relaxations.
//!
//! At level 2, when no constraint other than the moment matrix involves a
//! second-order moment, feasibility reduces exactly to a problem on first moments:
//! given first moments `x` satisfying the linear constraints and LMIs with
//! `0 <= E[z_i] <= 1`, the completion `E[m] = prod_{v in m} x_v` yields the moment
//! matrix `[1; x][1; x]^T + diag(0, x_z - x_z^2)`, which is PSD. Conversely every
//! pseudo-expectation has such first moments. This reduction is used by default;
//! the full moment SDP is solved otherwise.

use serde::{Deserialize, Serialize};

use super::conic::{ConicBuilder, ConicProblem, Method, SolverTolerances, Status};
use super::relax::{LinearForm, PseudoExpectationProblem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: SolverTolerances,
    pub method: Method,
    /// Use the first-moment reduction when it applies.
    pub reduce: bool,
    /// Re-check the completed moment vector against the full problem.
    pub verify: bool,
    /// First-moment starting point; defaults to the problem's reference point.
    pub start: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: SolverTolerances::default(), method: Method::default(), reduce: true, verify: true, start: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityResult {
    pub status: Status,
    pub residual: f64,
    pub iterations: usize,
    /// Full moment vector (position 0 is the constant 1) when feasible.
    pub moments: Option<Vec<f64>>,
    pub reduced: bool,
}

fn split_constant(f: &LinearForm, var_of: &dyn Fn(usize) -> usize) -> (Vec<(usize, f64)>, f64) {
    let mut constant = 0.0;
    let mut terms = Vec::with_capacity(f.terms.len());
    for &(k, c) in &f.terms {
        if k == 0 {
            constant += c;
        } else {
            terms.push((var_of(k), c));
        }
    }
    (terms, constant)
}

/// Conic form of the full moment problem; variable `k - 1` is the moment at position `k`.
pub fn full_conic(problem: &PseudoExpectationProblem) -> ConicProblem {
    let var_of = |k: usize| k - 1;
    let mut b = ConicBuilder::new(problem.monomials.len() - 1);
    for e in &problem.equalities {
        let (t, c) = split_constant(&e.form, &var_of);
        b.add_eq(t, c);
    }
    for g in &problem.inequalities {
        let (t, c) = split_constant(&g.form, &var_of);
        b.add_ge(t, c);
    }
    for blk in &problem.moment_blocks {
        b.add_psd(blk.dim, blk.upper.iter().map(|f| split_constant(f, &var_of)).collect());
    }
    b.build()
}

/// Conic form on first moments (variables ordered as the dense variable ids).
pub fn reduced_conic(problem: &PseudoExpectationProblem) -> ConicProblem {
    let nvars = problem.space.len();
    let mut pos_to_var = vec![usize::MAX; problem.monomials.len()];
    for id in 0..nvars {
        pos_to_var[problem.first_moment_position(id)] = id;
    }
    let var_of = |k: usize| pos_to_var[k];
    let mut b = ConicBuilder::new(nvars).with_y_bound((nvars as f64).sqrt() * 1.001);
    for e in &problem.equalities {
        let (t, c) = split_constant(&e.form, &var_of);
        b.add_eq(t, c);
    }
    for g in &problem.inequalities {
        let (t, c) = split_constant(&g.form, &var_of);
        b.add_ge(t, c);
    }
    for blk in &problem.moment_blocks[1..] {
        b.add_psd(blk.dim, blk.upper.iter().map(|f| split_constant(f, &var_of)).collect());
    }
    for i in 0..problem.n {
        let id = problem.space.z_index(i);
        b.add_ge(vec![(id, 1.0)], 0.0);
        b.add_ge(vec![(id, -1.0)], 1.0);
    }
    b.build()
}

/// Product completion of first moments to every monomial of the problem.
pub fn complete_moments(problem: &PseudoExpectationProblem, first: &[f64]) -> Vec<f64> {
    problem
        .monomials
        .iter()
        .map(|m| m.0.iter().map(|&id| first[id as usize]).product())
        .collect()
}

/// Maximum normalised violation of a full moment vector.
pub fn moment_violation(problem: &PseudoExpectationProblem, moments: &[f64]) -> f64 {
    full_conic(problem).violation_at(&moments[1..])
}

/// Minimum eigenvalue of the moment matrix at a moment vector.
pub fn moment_matrix_min_eigenvalue(problem: &PseudoExpectationProblem, moments: &[f64]) -> f64 {
    let blk = problem.moment_matrix();
    let m = nalgebra::DMatrix::from_fn(blk.dim, blk.dim, |i, j| blk.entry(i, j).eval(moments));
    crate::linalg::min_eigenvalue(&m)
}

/// Decides feasibility with default options.
pub fn check_feasibility(problem: &PseudoExpectationProblem, tol: &SolverTolerances) -> FeasibilityResult {
    check_feasibility_with(problem, &SolveOptions { tol: *tol, ..SolveOptions::default() })
}

pub fn check_feasibility_with(problem: &PseudoExpectationProblem, opts: &SolveOptions) -> FeasibilityResult {
    let nvars = problem.space.len();
    let start_first: Vec<f64> = opts
        .start
        .clone()
        .or_else(|| problem.reference_point.clone())
        .unwrap_or_else(|| vec![0.0; nvars]);

    if opts.reduce && problem.is_first_moment_reducible() {
        let conic = reduced_conic(problem);
        let sol = conic.solve(&opts.tol, Some(&start_first), opts.method);
        let mut result = FeasibilityResult {
            status: sol.status,
            residual: sol.residual,
            iterations: sol.iterations,
            moments: None,
            reduced: true,
        };
        if sol.status == Status::Feasible {
            let moments = complete_moments(problem, &sol.y);
            if opts.verify {
                let v = moment_violation(problem, &moments);
                if v > opts.tol.margin + opts.tol.feas_tol {
                    result.status = Status::Undecided;
                    result.residual = v;
                    return result;
                }
                result.residual = v;
            }
            result.moments = Some(moments);
        }
        return result;
    }

    let conic = full_conic(problem);
    let start = complete_moments(problem, &start_first);
    let sol = conic.solve(&opts.tol, Some(&start[1..]), opts.method);
    let moments = (sol.status == Status::Feasible).then(|| {
        let mut m = Vec::with_capacity(sol.y.len() + 1);
        m.push(1.0);
        m.extend_from_slice(&sol.y);
        m
    });
    FeasibilityResult { status: sol.status, residual: sol.residual, iterations: sol.iterations, moments, reduced: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{average_degree, sample_er, Graph};
    use crate::sos::poly::Poly;
    use crate::sos::relax::relax;
    use crate::sos::system::{build_system, Body, PolynomialSystem, SystemKind, SystemParams, Tag};

    fn window_system(a: &Graph, kind: SystemKind, p: &SystemParams) -> PolynomialSystem {
        build_system(a.n(), kind, p).unwrap().union(build_system(a.n(), SystemKind::DensityWindow, p).unwrap()).unwrap()
    }

    fn er_params(a: &Graph, d: f64, gamma: f64) -> SystemParams {
        let n = a.n() as f64;
        SystemParams {
            gamma: Some(gamma),
            sigma: Some(4.0 * n.ln()),
            delta: Some(12.0 * n.ln().sqrt()),
            d_hat: Some(n * 0.5),
            d_target: Some(d),
            alpha: Some(0.01),
            ..SystemParams::with_graph(a)
        }
    }

    #[test]
    fn injected_contradiction_is_infeasible() {
        let a = sample_er(4, 0.5, 1).unwrap();
        let mut s = build_system(4, SystemKind::P1, &SystemParams { gamma: Some(1.0), ..SystemParams::with_graph(&a) }).unwrap();
        s.push(Tag::Custom, Body::Ge(Poly::constant(-1.0)));
        let r = check_feasibility(&relax(&s, 2).unwrap(), &SolverTolerances::default());
        assert_eq!(r.status, Status::Infeasible);
    }

    #[test]
    fn p1_with_full_budget_is_feasible() {
        let a = sample_er(6, 0.5, 2).unwrap();
        let s = build_system(6, SystemKind::P1, &SystemParams { gamma: Some(1.0), ..SystemParams::with_graph(&a) }).unwrap();
        let prob = relax(&s, 2).unwrap();
        for reduce in [true, false] {
            let r = check_feasibility_with(&prob, &SolveOptions { reduce, ..SolveOptions::default() });
            assert_eq!(r.status, Status::Feasible, "reduce = {reduce}");
            let m = r.moments.unwrap();
            assert!(moment_matrix_min_eigenvalue(&prob, &m) >= -1e-6);
        }
    }

    #[test]
    fn fine_er_window_examples() {
        let a = sample_er(10, 0.5, 3).unwrap();
        let d = average_degree(&a);
        let ok = relax(&window_system(&a, SystemKind::E, &er_params(&a, d, 0.0)), 2).unwrap();
        assert_eq!(check_feasibility(&ok, &SolverTolerances::default()).status, Status::Feasible);
        let far = relax(&window_system(&a, SystemKind::E, &er_params(&a, d + 5.0, 0.0)), 2).unwrap();
        assert_eq!(check_feasibility(&far, &SolverTolerances::default()).status, Status::Infeasible);
    }

    #[test]
    fn reduced_and_full_routes_agree() {
        for seed in 0..6 {
            let a = sample_er(5, 0.5, seed).unwrap();
            let d0 = average_degree(&a);
            for (k, d) in [(0usize, d0), (1, d0 + 1.5), (2, d0 - 1.2), (1, 3.9)] {
                let p = SystemParams { gamma: Some(k as f64 / 5.0), sigma: Some(2.0), ..er_params(&a, d.max(0.0), 0.0) };
                let prob = relax(&window_system(&a, SystemKind::C, &p), 2).unwrap();
                let r1 = check_feasibility_with(&prob, &SolveOptions::default());
                let r2 = check_feasibility_with(&prob, &SolveOptions { reduce: false, ..SolveOptions::default() });
                assert_eq!(r1.status, r2.status, "seed {seed} k {k} d {d}");
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = sample_er(7, 0.4, 4).unwrap();
        let p = SystemParams { gamma: Some(2.0 / 7.0), sigma: Some(3.0), ..er_params(&a, 2.0, 0.0) };
        let prob = relax(&window_system(&a, SystemKind::C, &p), 2).unwrap();
        let r1 = check_feasibility(&prob, &SolverTolerances::default());
        let r2 = check_feasibility(&prob, &SolverTolerances::default());
        assert_eq!(r1, r2);
    }
}
