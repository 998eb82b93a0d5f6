//! Level-`l` moment relaxations of polynomial systems.
//!
//! Variables are reindexed densely: the unordered pairs `{i, j}` come first (so
//! `Y_ij` and `Y_ji` share one index and `Y_ii` is identically zero), followed by
//! `z_0 .. z_{n-1}`. Monomials are reduced with `z_i^2 = z_i` and ordered graded-lex.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::poly::{Monomial, Poly, Var};
use super::system::{Body, PolynomialSystem, Tag};
use crate::error::{param, Result};

/// Dense variable layout for `n` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarSpace {
    pub n: usize,
}

impl VarSpace {
    pub fn pairs(&self) -> usize {
        self.n * (self.n.saturating_sub(1)) / 2
    }

    pub fn len(&self) -> usize {
        self.pairs() + self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        a * (2 * self.n - a - 1) / 2 + (b - a - 1)
    }

    pub fn z_index(&self, i: usize) -> usize {
        self.pairs() + i
    }

    pub fn is_z(&self, id: usize) -> bool {
        id >= self.pairs()
    }

    /// Dense id of a variable, or `None` for the pinned diagonal.
    pub fn id(&self, v: Var) -> Option<usize> {
        match v {
            Var::Y(i, j) if i == j => None,
            Var::Y(i, j) => Some(self.pair_index(i, j)),
            Var::Z(i) => Some(self.z_index(i)),
        }
    }

    pub fn pair_of(&self, id: usize) -> (usize, usize) {
        let mut rest = id;
        for a in 0..self.n {
            let len = self.n - a - 1;
            if rest < len {
                return (a, a + 1 + rest);
            }
            rest -= len;
        }
        panic!("pair id out of range")
    }
}

/// Reduced monomial: sorted dense ids, each `z` at most once. Ordered graded-lex.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct RMono(pub Vec<u32>);

impl Ord for RMono {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for RMono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl RMono {
    pub fn degree(&self) -> usize {
        self.0.len()
    }

    fn normalize(mut ids: Vec<u32>, space: &VarSpace) -> RMono {
        ids.sort_unstable();
        ids.dedup_by(|a, b| a == b && space.is_z(*a as usize));
        RMono(ids)
    }

    pub fn mul(&self, other: &RMono, space: &VarSpace) -> RMono {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        RMono::normalize(v, space)
    }

    fn from_monomial(m: &Monomial, space: &VarSpace) -> Option<RMono> {
        let mut ids = Vec::with_capacity(m.degree());
        for &v in m.vars() {
            ids.push(space.id(v)? as u32);
        }
        Some(RMono::normalize(ids, space))
    }
}

/// `sum_k coef_k * y[idx_k]` over moment indices; index 0 is the constant monomial.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearForm {
    pub terms: Vec<(usize, f64)>,
}

impl LinearForm {
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.terms.iter().map(|&(k, c)| c * y[k]).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn compact(mut terms: Vec<(usize, f64)>) -> Self {
        terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (k, c) in terms {
            match out.last_mut() {
                Some(last) if last.0 == k => last.1 += c,
                _ => out.push((k, c)),
            }
        }
        out.retain(|t| t.1.abs() > 1e-14);
        Self { terms: out }
    }
}

/// A PSD block whose entries are linear forms in the moments. Entries are stored
/// for the upper triangle, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentBlock {
    pub label: String,
    pub dim: usize,
    pub upper: Vec<LinearForm>,
}

impl MomentBlock {
    pub fn entry_index(dim: usize, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * dim - a * (a + 1) / 2 + b
    }

    pub fn entry(&self, i: usize, j: usize) -> &LinearForm {
        &self.upper[Self::entry_index(self.dim, i, j)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledForm {
    pub label: String,
    pub form: LinearForm,
}

/// Moment-matrix SDP feasibility instance.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoExpectationProblem {
    pub n: usize,
    pub level: usize,
    pub space: VarSpace,
    /// Monomials by position; position 0 is the constant monomial.
    pub monomials: Vec<RMono>,
    pub monomial_index: BTreeMap<RMono, usize>,
    /// Block 0 is the moment matrix; the rest are localizing matrices.
    pub moment_blocks: Vec<MomentBlock>,
    /// Scalar localizing constraints `form >= 0`.
    pub inequalities: Vec<LabeledForm>,
    pub equalities: Vec<LabeledForm>,
    /// First-moment point (`Y` pairs then `z`) of the lifted input `(A, 1)`, used as a start.
    pub reference_point: Option<Vec<f64>>,
}

impl PseudoExpectationProblem {
    pub fn moment_matrix(&self) -> &MomentBlock {
        &self.moment_blocks[0]
    }

    /// Position of the degree-one monomial of a dense variable id.
    pub fn first_moment_position(&self, id: usize) -> usize {
        self.monomial_index[&RMono(vec![id as u32])]
    }

    /// `E[d(Y)] = 2 * sum_{i<j} E[Y_ij] / n` read off a full moment vector.
    pub fn average_degree(&self, moments: &[f64]) -> f64 {
        let s: f64 = (0..self.space.pairs()).map(|k| moments[self.first_moment_position(k)]).sum();
        2.0 * s / self.n as f64
    }

    /// Whether every constraint other than the moment matrix touches only degree <= 1 moments.
    pub fn is_first_moment_reducible(&self) -> bool {
        let low = |f: &LinearForm| f.terms.iter().all(|&(k, _)| self.monomials[k].degree() <= 1);
        self.level == 2
            && self.equalities.iter().all(|f| low(&f.form))
            && self.inequalities.iter().all(|f| low(&f.form))
            && self.moment_blocks[1..].iter().all(|b| b.upper.iter().all(low))
    }
}

/// All reduced monomials of degree at most `k`, graded-lex.
pub fn monomials_up_to(space: &VarSpace, k: usize) -> Vec<RMono> {
    fn rec(space: &VarSpace, start: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<RMono>) {
        out.push(RMono(cur.clone()));
        if left == 0 {
            return;
        }
        for id in start..space.len() {
            cur.push(id as u32);
            // z variables are idempotent, so never repeat them
            let next = if space.is_z(id) { id + 1 } else { id };
            rec(space, next, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(space, 0, k, &mut Vec::new(), &mut out);
    out.sort();
    out
}

struct Builder {
    space: VarSpace,
    index: BTreeMap<RMono, usize>,
}

impl Builder {
    fn id(&mut self, m: RMono) -> usize {
        let next = self.index.len();
        *self.index.entry(m).or_insert(next)
    }

    /// Linear form of `E[p * m]`.
    fn form(&mut self, p: &Poly, m: &RMono) -> LinearForm {
        let mut terms = Vec::new();
        for (mono, c) in p.terms() {
            if let Some(r) = RMono::from_monomial(mono, &self.space) {
                let prod = r.mul(m, &self.space);
                terms.push((self.id(prod), c));
            }
        }
        LinearForm::compact(terms)
    }
}

/// Builds the level-`level` relaxation of `system`.
///
/// Degree-3 agreement constraints `(Y_ij - A_ij) z_i z_j = 0` are always represented by
/// the valid linear consequences `Y_ij <= 2 - z_i - z_j` (when `A_ij = 0`) and
/// `Y_ij >= z_i + z_j - 1` (when `A_ij = 1`); from level 4 on they are also imposed
/// exactly through localizing equalities.
pub fn relax(system: &PolynomialSystem, level: usize) -> Result<PseudoExpectationProblem> {
    if level < 2 || level % 2 == 1 {
        return Err(param(format!("relaxation level must be even and at least 2, got {level}")));
    }
    let max_deg = system.max_degree_without_agreement();
    if max_deg > level {
        return Err(param(format!("level {level} is below the maximum constraint degree {max_deg}")));
    }
    let space = VarSpace { n: system.n };
    let mut b = Builder { space, index: BTreeMap::new() };
    let one = RMono::default();
    b.id(one.clone());

    let half = level / 2;
    let basis = monomials_up_to(&space, half);
    let all_upto = |k: usize| monomials_up_to(&space, k);

    let psd_block = |b: &mut Builder, label: String, entries: &[Poly], edim: usize, loc: &[RMono]| {
        let dim = edim * loc.len();
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for r in 0..dim {
            for c in r..dim {
                let (er, br) = (r % edim, r / edim);
                let (ec, bc) = (c % edim, c / edim);
                let m = loc[br].mul(&loc[bc], &space);
                let p = &(&entries[er * edim + ec] + &entries[ec * edim + er]) * &Poly::constant(0.5);
                upper.push(b.form(&p, &m));
            }
        }
        MomentBlock { label, dim, upper }
    };

    let mut blocks = vec![psd_block(&mut b, "moment".into(), &[Poly::constant(1.0)], 1, &basis)];
    let mut inequalities = Vec::new();
    let mut equalities = Vec::new();

    for c in &system.constraints {
        let label = c.tag.to_string();
        match (&c.body, c.tag) {
            (Body::Eq(p), Tag::Agreement(i, j)) => {
                let aij = system.params.a.as_ref().map(|a| a.has_edge(i, j)).unwrap_or(false);
                let (yv, zi, zj) = (Poly::var(Var::Y(i, j)), Poly::var(Var::Z(i)), Poly::var(Var::Z(j)));
                let surrogate = if aij {
                    &(&yv - &zi) - &(&zj - &Poly::constant(1.0))
                } else {
                    &(&Poly::constant(2.0) - &zi) - &(&zj + &yv)
                };
                let f = b.form(&surrogate, &one);
                if !f.is_zero() {
                    inequalities.push(LabeledForm { label: format!("{label}/linear"), form: f });
                }
                if p.degree() <= level {
                    for m in all_upto(level - p.degree()) {
                        let f = b.form(p, &m);
                        if !f.is_zero() {
                            equalities.push(LabeledForm { label: label.clone(), form: f });
                        }
                    }
                }
            }
            (Body::Eq(p), _) => {
                for m in all_upto(level - p.degree()) {
                    let f = b.form(p, &m);
                    if !f.is_zero() {
                        equalities.push(LabeledForm { label: label.clone(), form: f });
                    }
                }
            }
            (Body::Ge(p), _) => {
                let loc = monomials_up_to(&space, (level - p.degree()) / 2);
                if loc.len() == 1 {
                    let f = b.form(p, &one);
                    if !f.is_zero() || p.constant_term() < 0.0 {
                        inequalities.push(LabeledForm { label, form: f });
                    }
                } else {
                    blocks.push(psd_block(&mut b, label, &[p.clone()], 1, &loc));
                }
            }
            (Body::Psd { dim, entries }, _) => {
                let deg = entries.iter().map(Poly::degree).max().unwrap_or(0);
                let loc = monomials_up_to(&space, (level - deg) / 2);
                blocks.push(psd_block(&mut b, label, entries, *dim, &loc));
            }
        }
    }

    // renumber monomials in graded-lex order
    let mut order: Vec<(RMono, usize)> = b.index.into_iter().collect();
    order.sort_by(|a, b| a.0.cmp(&b.0));
    let mut remap = vec![0usize; order.len()];
    for (new, (_, old)) in order.iter().enumerate() {
        remap[*old] = new;
    }
    let fix = |f: &mut LinearForm| {
        for t in &mut f.terms {
            t.0 = remap[t.0];
        }
        f.terms.sort_by_key(|t| t.0);
    };
    for blk in &mut blocks {
        blk.upper.iter_mut().for_each(fix);
    }
    inequalities.iter_mut().for_each(|f| fix(&mut f.form));
    equalities.iter_mut().for_each(|f| fix(&mut f.form));
    let monomials: Vec<RMono> = order.into_iter().map(|(m, _)| m).collect();
    let monomial_index = monomials.iter().cloned().enumerate().map(|(k, m)| (m, k)).collect();

    let reference_point = system.params.a.as_ref().map(|a| {
        let mut x = vec![1.0; space.len()];
        for k in 0..space.pairs() {
            let (i, j) = space.pair_of(k);
            x[k] = if a.has_edge(i, j) { 1.0 } else { 0.0 };
        }
        x
    });

    Ok(PseudoExpectationProblem {
        n: system.n,
        level,
        space,
        monomials,
        monomial_index,
        moment_blocks: blocks,
        inequalities,
        equalities,
        reference_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::sos::system::{build_system, SystemKind, SystemParams};

    fn p1(a: &Graph, gamma: f64) -> PolynomialSystem {
        build_system(a.n(), SystemKind::P1, &SystemParams { gamma: Some(gamma), ..SystemParams::with_graph(a) }).unwrap()
    }

    #[test]
    fn pair_indexing_round_trips() {
        let s = VarSpace { n: 7 };
        let mut k = 0;
        for i in 0..7 {
            for j in (i + 1)..7 {
                assert_eq!(s.pair_index(i, j), k);
                assert_eq!(s.pair_index(j, i), k);
                assert_eq!(s.pair_of(k), (i, j));
                k += 1;
            }
        }
    }

    #[test]
    fn moment_matrix_dimension_at_level_two() {
        let a = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let prob = relax(&p1(&a, 0.5), 2).unwrap();
        // one pair variable and two z variables
        assert_eq!(prob.moment_matrix().dim, 1 + 3);
        assert!(prob.equalities.is_empty());
    }

    #[test]
    fn z_idempotence() {
        let s = VarSpace { n: 3 };
        let z1 = RMono(vec![s.z_index(1) as u32]);
        let cube = z1.mul(&z1, &s).mul(&z1, &s);
        assert_eq!(cube, z1);
    }

    #[test]
    fn monomial_counts() {
        let s = VarSpace { n: 4 };
        // 6 pair variables, 4 z variables
        assert_eq!(monomials_up_to(&s, 1).len(), 11);
        assert_eq!(monomials_up_to(&s, 2).len(), 1 + 10 + 21 + 24 + 6);
        let m = monomials_up_to(&s, 2);
        assert!(m.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn level_checks() {
        let a = Graph::empty(3);
        assert!(relax(&p1(&a, 0.0), 3).is_err());
        assert!(relax(&p1(&a, 0.0), 0).is_err());
        let prob = relax(&p1(&a, 0.0), 4).unwrap();
        assert_eq!(prob.moment_matrix().dim, monomials_up_to(&prob.space, 2).len());
        assert!(!prob.equalities.is_empty());
        assert!(!prob.is_first_moment_reducible());
    }

    #[test]
    fn reference_point_is_lifted_input() {
        let a = Graph::from_edges(3, &[(0, 2)]).unwrap();
        let prob = relax(&p1(&a, 0.0), 2).unwrap();
        let x = prob.reference_point.clone().unwrap();
        assert_eq!(x, vec![0.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
        assert!(prob.is_first_moment_reducible());
    }
}
