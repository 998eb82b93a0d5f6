//! Symbolic constraint systems over `(Y, z)`.
//!
//! `P1` encodes "Y agrees with A outside a removed set of at most `gamma * n` nodes",
//! `P2`–`P4` are degree and spectral regularity conditions, and `DensityWindow`
//! pins the average degree of `Y` near a target. `C`, `D` and `E` are the unions
//! `P1 + P2`, `P1 + P3` and `P1 + P4`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::poly::{Poly, Var};
use crate::error::{param, Error, Result};
use crate::graph::Graph;
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SystemKind {
    P1,
    P2,
    P3,
    P4,
    C,
    D,
    E,
    DensityWindow,
}

impl SystemKind {
    /// Base systems making up a kind.
    pub fn constituents(self) -> Vec<SystemKind> {
        match self {
            Self::C => vec![Self::P1, Self::P2],
            Self::D => vec![Self::P1, Self::P3],
            Self::E => vec![Self::P1, Self::P4],
            k => vec![k],
        }
    }
}

/// Form of the density window around the target `d`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowForm {
    /// `|d(Y) - d| <= alpha * d`
    #[default]
    Relative,
    /// `|d(Y) - d| <= alpha`
    Absolute,
}

/// Parameters of a system. Fields a kind does not use may be left unset.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SystemParams {
    pub a: Option<Graph>,
    pub gamma: Option<f64>,
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    pub d_hat: Option<f64>,
    pub d_target: Option<f64>,
    pub alpha: Option<f64>,
    pub window: WindowForm,
}

impl SystemParams {
    pub fn with_graph(a: &Graph) -> Self {
        Self { a: Some(a.clone()), ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tag {
    Booleanity(usize),
    Mass,
    BoxLower(usize, usize),
    BoxUpper(usize, usize),
    Symmetry(usize, usize),
    Agreement(usize, usize),
    DegreeUpper(usize),
    DegreeDeviationUpper(usize),
    DegreeDeviationLower(usize),
    SpectralUpper,
    SpectralLower,
    WindowUpper,
    WindowLower,
    Custom,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Body {
    /// `p = 0`
    Eq(Poly),
    /// `p >= 0`
    Ge(Poly),
    /// Symmetric polynomial matrix (row-major, `dim * dim`) that must be PSD.
    Psd { dim: usize, entries: Vec<Poly> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub tag: Tag,
    pub body: Body,
}

impl Constraint {
    pub fn degree(&self) -> usize {
        match &self.body {
            Body::Eq(p) | Body::Ge(p) => p.degree(),
            Body::Psd { entries, .. } => entries.iter().map(Poly::degree).max().unwrap_or(0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialSystem {
    pub n: usize,
    pub kind: SystemKind,
    /// Base kinds whose constraints are listed, in order.
    pub components: Vec<SystemKind>,
    pub params: SystemParams,
    pub constraints: Vec<Constraint>,
}

fn y(i: usize, j: usize) -> Poly {
    Poly::var(Var::Y(i, j))
}

fn z(i: usize) -> Poly {
    Poly::var(Var::Z(i))
}

fn row_sum(n: usize, i: usize) -> Poly {
    let mut p = Poly::zero();
    for j in (0..n).filter(|&j| j != i) {
        p = &p + &y(i, j);
    }
    p
}

/// `d(Y) = sum_{i != j} Y_ij / n` (the diagonal is pinned to zero).
pub fn average_degree_poly(n: usize) -> Poly {
    let mut p = Poly::zero();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            p.add_term(super::poly::Monomial::from_vars(vec![Var::Y(i, j)]), 1.0 / n as f64);
        }
    }
    p
}

fn require(v: Option<f64>, name: &str, kind: SystemKind) -> Result<f64> {
    let v = v.ok_or_else(|| param(format!("system {kind:?} requires `{name}`")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(param(format!("`{name}` must be finite and nonnegative, got {v}")));
    }
    Ok(v)
}

fn base_constraints(n: usize, kind: SystemKind, params: &SystemParams) -> Result<Vec<Constraint>> {
    let mut out = Vec::new();
    let push = |out: &mut Vec<Constraint>, tag, body| out.push(Constraint { tag, body });
    match kind {
        SystemKind::P1 => {
            let a = params.a.as_ref().ok_or_else(|| param("system P1 requires the input graph"))?;
            if a.n() != n {
                return Err(Error::SizeMismatch { expected: n, found: a.n() });
            }
            let gamma = require(params.gamma, "gamma", kind)?;
            if gamma > 1.0 {
                return Err(param(format!("gamma must lie in [0, 1], got {gamma}")));
            }
            for i in 0..n {
                push(&mut out, Tag::Booleanity(i), Body::Eq(&(&z(i) * &z(i)) - &z(i)));
            }
            let mut mass = Poly::constant(-(1.0 - gamma) * n as f64);
            for i in 0..n {
                mass = &mass + &z(i);
            }
            push(&mut out, Tag::Mass, Body::Ge(mass));
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    push(&mut out, Tag::BoxLower(i, j), Body::Ge(y(i, j)));
                    push(&mut out, Tag::BoxUpper(i, j), Body::Ge(&Poly::constant(1.0) - &y(i, j)));
                }
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    push(&mut out, Tag::Symmetry(i, j), Body::Eq(&y(i, j) - &y(j, i)));
                }
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let aij = if a.has_edge(i, j) { 1.0 } else { 0.0 };
                    let diff = &y(i, j) - &Poly::constant(aij);
                    push(&mut out, Tag::Agreement(i, j), Body::Eq(&(&diff * &z(i)) * &z(j)));
                }
            }
        }
        SystemKind::P2 => {
            let sigma = require(params.sigma, "sigma", kind)?;
            let dy = average_degree_poly(n).scale(sigma);
            for i in 0..n {
                push(&mut out, Tag::DegreeUpper(i), Body::Ge(&dy - &row_sum(n, i)));
            }
        }
        SystemKind::P3 => {
            let sigma = require(params.sigma, "sigma", kind)?;
            let d_hat = require(params.d_hat, "d_hat", kind)?;
            for i in 0..n {
                push(&mut out, Tag::DegreeUpper(i), Body::Ge(&Poly::constant(sigma * d_hat) - &row_sum(n, i)));
            }
        }
        SystemKind::P4 => {
            let sigma = require(params.sigma, "sigma", kind)?;
            let delta = require(params.delta, "delta", kind)?;
            let d_hat = require(params.d_hat, "d_hat", kind)?;
            let dy = average_degree_poly(n);
            let slack = Poly::constant(sigma * d_hat.sqrt());
            for i in 0..n {
                let dev = &row_sum(n, i) - &dy;
                push(&mut out, Tag::DegreeDeviationUpper(i), Body::Ge(&slack - &dev));
                push(&mut out, Tag::DegreeDeviationLower(i), Body::Ge(&slack + &dev));
            }
            let bound = delta * d_hat.sqrt();
            let centered: Vec<Poly> = (0..n * n)
                .map(|k| {
                    let (i, j) = (k / n, k % n);
                    let mean = dy.scale(1.0 / n as f64);
                    if i == j {
                        -&mean
                    } else {
                        &y(i, j) - &mean
                    }
                })
                .collect();
            let ident = |k: usize| if k / n == k % n { bound } else { 0.0 };
            let upper = centered.iter().enumerate().map(|(k, p)| &Poly::constant(ident(k)) - p).collect();
            let lower = centered.iter().enumerate().map(|(k, p)| &Poly::constant(ident(k)) + p).collect();
            push(&mut out, Tag::SpectralUpper, Body::Psd { dim: n, entries: upper });
            push(&mut out, Tag::SpectralLower, Body::Psd { dim: n, entries: lower });
        }
        SystemKind::DensityWindow => {
            let d = require(params.d_target, "d_target", kind)?;
            let alpha = require(params.alpha, "alpha", kind)?;
            let width = match params.window {
                WindowForm::Relative => alpha * d,
                WindowForm::Absolute => alpha,
            };
            let dev = &average_degree_poly(n) - &Poly::constant(d);
            push(&mut out, Tag::WindowUpper, Body::Ge(&Poly::constant(width) - &dev));
            push(&mut out, Tag::WindowLower, Body::Ge(&Poly::constant(width) + &dev));
        }
        SystemKind::C | SystemKind::D | SystemKind::E => unreachable!("union kinds are expanded by the caller"),
    }
    Ok(out)
}

/// Builds the constraint list of `kind` on `n` nodes.
pub fn build_system(n: usize, kind: SystemKind, params: &SystemParams) -> Result<PolynomialSystem> {
    if n == 0 {
        return Err(param("systems need n >= 1"));
    }
    let components = kind.constituents();
    let mut constraints = Vec::new();
    for &c in &components {
        constraints.extend(base_constraints(n, c, params)?);
    }
    Ok(PolynomialSystem { n, kind, components, params: params.clone(), constraints })
}

impl PolynomialSystem {
    /// Concatenates the constraints of two systems on the same node set.
    pub fn union(mut self, other: PolynomialSystem) -> Result<PolynomialSystem> {
        if self.n != other.n {
            return Err(Error::SizeMismatch { expected: self.n, found: other.n });
        }
        self.components.extend(other.components);
        self.constraints.extend(other.constraints);
        Ok(self)
    }

    /// Appends an arbitrary constraint.
    pub fn push(&mut self, tag: Tag, body: Body) {
        self.constraints.push(Constraint { tag, body });
    }

    pub fn count(&self, pred: impl Fn(&Tag) -> bool) -> usize {
        self.constraints.iter().filter(|c| pred(&c.tag)).count()
    }

    /// Maximum constraint degree, excluding the degree-3 agreement constraints.
    pub fn max_degree_without_agreement(&self) -> usize {
        self.constraints
            .iter()
            .filter(|c| !matches!(c.tag, Tag::Agreement(..)))
            .map(Constraint::degree)
            .max()
            .unwrap_or(0)
    }
}

/// Tolerance used by [`check_system`].
pub const CHECK_TOL: f64 = 1e-9;

/// Evaluates every constraint at a concrete point. `y` is the full `n x n` matrix,
/// whose diagonal must vanish.
pub fn check_system(system: &PolynomialSystem, y: &DMatrix<f64>, z: &[f64]) -> Result<bool> {
    let n = system.n;
    if y.nrows() != n || y.ncols() != n {
        return Err(Error::SizeMismatch { expected: n, found: y.nrows() });
    }
    if z.len() != n {
        return Err(Error::SizeMismatch { expected: n, found: z.len() });
    }
    if (0..n).any(|i| y[(i, i)].abs() > CHECK_TOL) {
        return Ok(false);
    }
    let value = |v: Var| match v {
        Var::Y(i, j) => y[(i, j)],
        Var::Z(i) => z[i],
    };
    for c in &system.constraints {
        let ok = match &c.body {
            Body::Eq(p) => p.eval(&value).abs() <= CHECK_TOL,
            Body::Ge(p) => p.eval(&value) >= -CHECK_TOL,
            Body::Psd { dim, entries } => {
                let m = DMatrix::from_fn(*dim, *dim, |i, j| {
                    0.5 * (entries[i * dim + j].eval(&value) + entries[j * dim + i].eval(&value))
                });
                linalg::min_eigenvalue(&m) >= -CHECK_TOL * (*dim as f64).max(1.0)
            }
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// [`check_system`] at an integral point `(A*, z*)`.
pub fn check_system_graph(system: &PolynomialSystem, y: &Graph, z: &[bool]) -> Result<bool> {
    let zf: Vec<f64> = z.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    check_system(system, &y.to_matrix(), &zf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{average_degree, sample_er};

    fn params_c(a: &Graph, gamma: f64, sigma: f64) -> SystemParams {
        SystemParams { gamma: Some(gamma), sigma: Some(sigma), ..SystemParams::with_graph(a) }
    }

    #[test]
    fn c_counts_at_n3() {
        let a = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let s = build_system(3, SystemKind::C, &params_c(&a, 0.0, 2.0)).unwrap();
        assert_eq!(s.count(|t| matches!(t, Tag::Booleanity(_))), 3);
        assert_eq!(s.count(|t| matches!(t, Tag::Mass)), 1);
        assert_eq!(s.count(|t| matches!(t, Tag::BoxLower(..) | Tag::BoxUpper(..))), 12);
        assert_eq!(s.count(|t| matches!(t, Tag::Symmetry(..))), 3);
        assert_eq!(s.count(|t| matches!(t, Tag::Agreement(..))), 3);
        assert_eq!(s.count(|t| matches!(t, Tag::DegreeUpper(_))), 3);
        assert_eq!(s.constraints.len(), 25);
    }

    #[test]
    fn unions_expand_exactly() {
        let a = sample_er(4, 0.5, 1).unwrap();
        let p = SystemParams {
            gamma: Some(0.25),
            sigma: Some(3.0),
            delta: Some(2.0),
            d_hat: Some(2.0),
            ..SystemParams::with_graph(&a)
        };
        for (k, parts) in [(SystemKind::C, [SystemKind::P1, SystemKind::P2]), (SystemKind::D, [SystemKind::P1, SystemKind::P3]), (SystemKind::E, [SystemKind::P1, SystemKind::P4])] {
            let whole = build_system(4, k, &p).unwrap();
            let joined = build_system(4, parts[0], &p).unwrap().union(build_system(4, parts[1], &p).unwrap()).unwrap();
            assert_eq!(whole.constraints, joined.constraints);
            assert_eq!(whole.components, parts.to_vec());
        }
    }

    #[test]
    fn missing_params_are_rejected() {
        let a = Graph::empty(3);
        assert!(build_system(3, SystemKind::P1, &SystemParams::default()).is_err());
        assert!(build_system(3, SystemKind::P4, &SystemParams { sigma: Some(1.0), ..SystemParams::with_graph(&a) }).is_err());
        assert!(build_system(3, SystemKind::DensityWindow, &SystemParams { d_target: Some(1.0), ..SystemParams::default() }).is_err());
    }

    #[test]
    fn p1_with_gamma_one_accepts_zero_mask() {
        let a = sample_er(5, 0.5, 2).unwrap();
        let s = build_system(5, SystemKind::P1, &SystemParams { gamma: Some(1.0), ..SystemParams::with_graph(&a) }).unwrap();
        let mass = s.constraints.iter().find(|c| c.tag == Tag::Mass).unwrap();
        if let Body::Ge(p) = &mass.body {
            assert_eq!(p.constant_term(), 0.0);
        }
        let d = 1.7;
        let yv = DMatrix::from_fn(5, 5, |i, j| if i == j { 0.0 } else { d / 5.0 });
        assert!(check_system(&s, &yv, &[0.0; 5]).unwrap());
    }

    #[test]
    fn input_graph_satisfies_its_own_systems() {
        let a = sample_er(10, 0.5, 3).unwrap();
        let d = average_degree(&a);
        let p = SystemParams {
            gamma: Some(0.0),
            sigma: Some(4.0 * 10f64.ln()),
            delta: Some(12.0 * 10f64.ln().sqrt()),
            d_hat: Some(5.0),
            d_target: Some(d),
            alpha: Some(0.01),
            ..SystemParams::with_graph(&a)
        };
        let s = build_system(10, SystemKind::E, &p).unwrap().union(build_system(10, SystemKind::DensityWindow, &p).unwrap()).unwrap();
        assert!(check_system_graph(&s, &a, &[true; 10]).unwrap());
        let mut z = vec![1.0; 10];
        z[0] = 0.5;
        assert!(!check_system(&s, &a.to_matrix(), &z).unwrap());
        let far = build_system(10, SystemKind::DensityWindow, &SystemParams { d_target: Some(d + 5.0), ..p.clone() }).unwrap();
        assert!(!check_system_graph(&far, &a, &[true; 10]).unwrap());
    }
}
