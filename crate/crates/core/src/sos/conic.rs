//! Conic feasibility problems `find y : L y + c in K` and a first-order solver.
//!
//! `K` is a product of zero cones (equalities), nonnegative orthants and PSD cones
//! (stored as scaled half-vectorisations). Rows are normalised when added, so all
//! tolerances are in units of a unit-norm constraint.
//!
//! The default method is Douglas–Rachford splitting between the affine set
//! `{(y, s) : s = L y + c}` and the cone. Each cone is relaxed by a small margin
//! `kappa` so that exactly-feasible instances have an interior; a point counts as
//! feasible when its violation of the unrelaxed cone is at most `kappa + feas_tol`.
//! Infeasibility is reported only with a checked Farkas-type certificate built
//! from the limiting displacement of the iteration.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverTolerances {
    pub feas_tol: f64,
    pub infeas_tol: f64,
    /// Cone relaxation used inside the iteration.
    pub margin: f64,
    pub max_iter: usize,
    pub check_every: usize,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self { feas_tol: 1e-6, infeas_tol: 1e-4, margin: 5e-7, max_iter: 50_000, check_every: 10 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    DouglasRachford,
    /// Alternating projections with Dykstra's correction on the cone step.
    Dykstra,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Feasible,
    Infeasible,
    Undecided,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicSolution {
    pub status: Status,
    /// Feasible: max cone violation. Infeasible: certificate margin. Undecided: max violation.
    pub residual: f64,
    pub iterations: usize,
    pub y: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    Zero,
    NonNeg,
    Psd(usize),
}

#[derive(Clone, Debug)]
struct Block {
    cone: Cone,
    start: usize,
    len: usize,
}

type Row = Vec<(usize, f64)>;

/// Accumulates constraints, normalising each as it is added.
#[derive(Clone, Debug, Default)]
pub struct ConicBuilder {
    dim: usize,
    eq: Vec<(Row, f64)>,
    ge: Vec<(Row, f64)>,
    psd: Vec<(usize, Vec<(Row, f64)>)>,
    constant_violation: f64,
    y_bound: Option<f64>,
}

fn row_norm(r: &Row) -> f64 {
    r.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt()
}

impl ConicBuilder {
    pub fn new(dim: usize) -> Self {
        Self { dim, ..Self::default() }
    }

    /// A priori bound on `||y||` over the feasible set, used to validate certificates.
    pub fn with_y_bound(mut self, bound: f64) -> Self {
        self.y_bound = Some(bound);
        self
    }

    /// `terms . y + constant = 0`
    pub fn add_eq(&mut self, terms: Row, constant: f64) {
        let norm = row_norm(&terms);
        if norm < 1e-14 {
            self.constant_violation = self.constant_violation.max(constant.abs());
        } else {
            self.eq.push((terms.into_iter().map(|(k, c)| (k, c / norm)).collect(), constant / norm));
        }
    }

    /// `terms . y + constant >= 0`
    pub fn add_ge(&mut self, terms: Row, constant: f64) {
        let norm = row_norm(&terms);
        if norm < 1e-14 {
            self.constant_violation = self.constant_violation.max(-constant);
        } else {
            self.ge.push((terms.into_iter().map(|(k, c)| (k, c / norm)).collect(), constant / norm));
        }
    }

    /// Symmetric matrix constraint given by its upper triangle, row-major.
    pub fn add_psd(&mut self, dim: usize, upper: Vec<(Row, f64)>) {
        assert_eq!(upper.len(), dim * (dim + 1) / 2);
        let scale = upper.iter().flat_map(|(r, _)| r.iter().map(|t| t.1.abs())).fold(0.0, f64::max);
        if scale < 1e-14 {
            let m = unsvec_plain(dim, &upper.iter().map(|e| e.1).collect::<Vec<_>>());
            let min = SymmetricEigen::new(m).eigenvalues.min();
            self.constant_violation = self.constant_violation.max(-min);
            return;
        }
        let scaled = upper
            .into_iter()
            .map(|(r, c)| (r.into_iter().map(|(k, v)| (k, v / scale)).collect(), c / scale))
            .collect();
        self.psd.push((dim, scaled));
    }

    pub fn build(self) -> ConicProblem {
        let mut rows = Vec::new();
        let mut offset = Vec::new();
        let mut blocks = Vec::new();
        let mut push_rows = |cone: Cone, items: Vec<(Row, f64)>, rows: &mut Vec<Row>, offset: &mut Vec<f64>| {
            if items.is_empty() {
                return;
            }
            let start = rows.len();
            let len = items.len();
            for (r, c) in items {
                rows.push(r);
                offset.push(c);
            }
            blocks.push(Block { cone, start, len });
        };
        push_rows(Cone::Zero, self.eq, &mut rows, &mut offset);
        push_rows(Cone::NonNeg, self.ge, &mut rows, &mut offset);
        for (dim, upper) in self.psd {
            let mut items = Vec::with_capacity(upper.len());
            for i in 0..dim {
                for j in i..dim {
                    let (r, c) = &upper[i * dim - i * (i + 1) / 2 + j];
                    let w = if i == j { 1.0 } else { SQRT2 };
                    items.push((r.iter().map(|&(k, v)| (k, v * w)).collect(), c * w));
                }
            }
            push_rows(Cone::Psd(dim), items, &mut rows, &mut offset);
        }
        ConicProblem { dim: self.dim, rows, offset, blocks, constant_violation: self.constant_violation, y_bound: self.y_bound }
    }
}

fn unsvec_plain(dim: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
            k += 1;
        }
    }
    m
}

fn unsvec(dim: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            let x = if i == j { v[k] } else { v[k] / SQRT2 };
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let dim = m.nrows();
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            out[k] = if i == j { m[(i, j)] } else { m[(i, j)] * SQRT2 };
            k += 1;
        }
    }
}

/// Projects a symmetric matrix onto `{X : X >= -shift * I}`.
fn clip_psd(m: DMatrix<f64>, shift: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.min() >= -shift {
        return eig.recompose();
    }
    let vals = eig.eigenvalues.map(|l| l.max(-shift));
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&vals) * v.transpose()
}

/// `find y : L y + c in K`.
#[derive(Clone, Debug)]
pub struct ConicProblem {
    dim: usize,
    rows: Vec<Row>,
    offset: Vec<f64>,
    blocks: Vec<Block>,
    constant_violation: f64,
    y_bound: Option<f64>,
}

impl ConicProblem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn cones(&self) -> Vec<(Cone, usize)> {
        self.blocks.iter().map(|b| (b.cone, b.len)).collect()
    }

    fn apply(&self, y: &[f64], out: &mut [f64]) {
        for (k, r) in self.rows.iter().enumerate() {
            out[k] = self.offset[k] + r.iter().map(|&(j, v)| v * y[j]).sum::<f64>();
        }
    }

    fn apply_t(&self, s: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (k, r) in self.rows.iter().enumerate() {
            let sk = s[k];
            if sk != 0.0 {
                for &(j, v) in r {
                    out[j] += v * sk;
                }
            }
        }
    }

    /// Projection of `s` onto the cone relaxed by `shift`.
    fn project(&self, s: &[f64], out: &mut [f64], shift: f64) {
        for b in &self.blocks {
            let (src, dst) = (&s[b.start..b.start + b.len], &mut out[b.start..b.start + b.len]);
            match b.cone {
                Cone::Zero => dst.iter_mut().zip(src).for_each(|(d, &x)| *d = x.clamp(-shift, shift)),
                Cone::NonNeg => dst.iter_mut().zip(src).for_each(|(d, &x)| *d = x.max(-shift)),
                Cone::Psd(dim) => svec_into(&clip_psd(unsvec(dim, src), shift), dst),
            }
        }
    }

    /// Maximum violation of the unrelaxed cone.
    pub fn violation(&self, s: &[f64]) -> f64 {
        let mut worst = self.constant_violation;
        for b in &self.blocks {
            let src = &s[b.start..b.start + b.len];
            let v = match b.cone {
                Cone::Zero => src.iter().fold(0.0_f64, |a, x| a.max(x.abs())),
                Cone::NonNeg => src.iter().fold(0.0_f64, |a, &x| a.max(-x)),
                Cone::Psd(dim) => -SymmetricEigen::new(unsvec(dim, src)).eigenvalues.min(),
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Violation at a given `y`.
    pub fn violation_at(&self, y: &[f64]) -> f64 {
        let mut s = vec![0.0; self.rows.len()];
        self.apply(y, &mut s);
        self.violation(&s)
    }

    /// Checks the candidate certificate `w` (in slack space). Returns the certified
    /// margin, which is negative when it proves infeasibility of the relaxed cone.
    fn certificate_margin(&self, w: &[f64], y_scale: f64, shift: f64) -> Option<f64> {
        let mut wd = vec![0.0; w.len()];
        let mut support = 0.0;
        for b in &self.blocks {
            let (src, dst) = (&w[b.start..b.start + b.len], &mut wd[b.start..b.start + b.len]);
            match b.cone {
                Cone::Zero => dst.copy_from_slice(src),
                Cone::NonNeg => dst.iter_mut().zip(src).for_each(|(d, &x)| *d = x.max(0.0)),
                Cone::Psd(dim) => svec_into(&clip_psd(unsvec(dim, src), 0.0), dst),
            }
        }
        let norm = wd.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return None;
        }
        wd.iter_mut().for_each(|x| *x /= norm);
        for b in &self.blocks {
            let src = &wd[b.start..b.start + b.len];
            support += match b.cone {
                Cone::Zero => src.iter().map(|x| x.abs()).sum::<f64>(),
                Cone::NonNeg => src.iter().sum::<f64>(),
                Cone::Psd(dim) => unsvec(dim, src).trace(),
            };
        }
        let mut lt = vec![0.0; self.dim];
        self.apply_t(&wd, &mut lt);
        let resid = lt.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cw: f64 = wd.iter().zip(&self.offset).map(|(a, b)| a * b).sum();
        let bound = self.y_bound.unwrap_or(y_scale);
        Some(cw + shift * support + resid * bound)
    }

    fn normal_matrix(&self) -> Option<Cholesky<f64, Dyn>> {
        let mut h = DMatrix::<f64>::identity(self.dim, self.dim);
        for r in &self.rows {
            for &(a, va) in r {
                for &(b, vb) in r {
                    h[(a, b)] += va * vb;
                }
            }
        }
        Cholesky::new(h)
    }

    /// Runs the solver from `start` (zeros when `None`).
    pub fn solve(&self, tol: &SolverTolerances, start: Option<&[f64]>, method: Method) -> ConicSolution {
        let m = self.rows.len();
        let mut y: Vec<f64> = start.map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; self.dim]);
        let decide_constant = |v: f64, y: Vec<f64>| {
            let status = if v <= tol.margin + tol.feas_tol {
                Status::Feasible
            } else if v >= tol.infeas_tol {
                Status::Infeasible
            } else {
                Status::Undecided
            };
            ConicSolution { status, residual: v, iterations: 0, y }
        };
        if self.constant_violation > tol.margin + tol.feas_tol {
            return decide_constant(self.constant_violation, y);
        }
        if self.dim == 0 || m == 0 {
            let v = self.violation_at(&y);
            return decide_constant(v, y);
        }
        let chol = match self.normal_matrix() {
            Some(c) => c,
            None => return ConicSolution { status: Status::Undecided, residual: f64::INFINITY, iterations: 0, y },
        };
        let solve_affine = |rhs: Vec<f64>| -> Vec<f64> { chol.solve(&DVector::from_vec(rhs)).data.into() };

        let mut xs = vec![0.0; m];
        self.apply(&y, &mut xs);
        let mut ps = vec![0.0; m];
        let mut qs = vec![0.0; m];
        let mut tmp = vec![0.0; m];
        let mut rhs = vec![0.0; self.dim];
        // Dykstra correction for the cone step
        let mut corr = vec![0.0; m];
        let mut last_violation = f64::INFINITY;

        for it in 1..=tol.max_iter {
            match method {
                Method::DouglasRachford => {
                    self.project(&xs, &mut ps, tol.margin);
                    for k in 0..m {
                        tmp[k] = 2.0 * ps[k] - xs[k] - self.offset[k];
                    }
                }
                Method::Dykstra => {
                    for k in 0..m {
                        tmp[k] = xs[k] + corr[k];
                    }
                    self.project(&tmp, &mut ps, tol.margin);
                    for k in 0..m {
                        corr[k] = tmp[k] - ps[k];
                        tmp[k] = ps[k] - self.offset[k];
                    }
                }
            }
            self.apply_t(&tmp, &mut rhs);
            for (r, yv) in rhs.iter_mut().zip(&y) {
                *r += yv;
            }
            let qy = solve_affine(rhs.clone());
            self.apply(&qy, &mut qs);
            match method {
                Method::DouglasRachford => {
                    for k in 0..m {
                        xs[k] += qs[k] - ps[k];
                    }
                }
                Method::Dykstra => xs.copy_from_slice(&qs),
            }
            y = qy;

            if it % tol.check_every == 0 || it == tol.max_iter {
                let viol = self.violation(&qs);
                last_violation = viol;
                if viol <= tol.margin + tol.feas_tol {
                    return ConicSolution { status: Status::Feasible, residual: viol, iterations: it, y };
                }
                if it >= 2 * tol.check_every {
                    for k in 0..m {
                        tmp[k] = ps[k] - qs[k];
                    }
                    let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let scale = (2.0 * ynorm).max((self.dim as f64).sqrt());
                    if let Some(margin) = self.certificate_margin(&tmp, scale, tol.margin) {
                        if margin <= -tol.infeas_tol {
                            return ConicSolution { status: Status::Infeasible, residual: -margin, iterations: it, y };
                        }
                    }
                }
            }
        }
        ConicSolution { status: Status::Undecided, residual: last_violation, iterations: tol.max_iter, y }
    }
}
