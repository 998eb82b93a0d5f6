//! Sparse multivariate polynomials over the indeterminates `Y_ij` and `z_i`.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// An indeterminate. `Y(i, j)` is an ordered matrix entry; symmetry is imposed by constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Var {
    Y(usize, usize),
    Z(usize),
}

/// Sorted multiset of variables.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<Var>);

impl Monomial {
    pub fn one() -> Self {
        Self(Vec::new())
    }

    pub fn from_vars(mut vars: Vec<Var>) -> Self {
        vars.sort_unstable();
        Self(vars)
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Monomial::from_vars(v)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    terms: BTreeMap<Monomial, f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn var(v: Var) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::from_vars(vec![v]), 1.0);
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn constant_term(&self) -> f64 {
        self.terms.get(&Monomial::one()).copied().unwrap_or(0.0)
    }

    pub fn scale(&self, c: f64) -> Poly {
        let mut p = Poly::zero();
        for (m, v) in self.terms() {
            p.add_term(m.clone(), v * c);
        }
        p
    }

    pub fn eval(&self, value: &dyn Fn(Var) -> f64) -> f64 {
        self.terms()
            .map(|(m, c)| c * m.vars().iter().map(|&v| value(v)).product::<f64>())
            .sum()
    }

    /// Replaces each variable by a polynomial (typically a constant or another variable).
    pub fn substitute(&self, f: &dyn Fn(Var) -> Poly) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in self.terms() {
            let mut prod = Poly::constant(c);
            for &v in m.vars() {
                prod = &prod * &f(v);
                if prod.is_zero() {
                    break;
                }
            }
            out = &out + &prod;
        }
        out
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut p = self.clone();
        for (m, c) in rhs.terms() {
            p.add_term(m.clone(), c);
        }
        p
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut p = self.clone();
        for (m, c) in rhs.terms() {
            p.add_term(m.clone(), -c);
        }
        p
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut p = Poly::zero();
        for (a, ca) in self.terms() {
            for (b, cb) in rhs.terms() {
                p.add_term(a.mul(b), ca * cb);
            }
        }
        p
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(self, rhs: Poly) -> Poly {
        &self + &rhs
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        &self - &rhs
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        &self * &rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let y = Poly::var(Var::Y(0, 1));
        let z = Poly::var(Var::Z(0));
        let p = &(&y - &Poly::constant(1.0)) * &z;
        assert_eq!(p.degree(), 2);
        assert_eq!(p.eval(&|v| if v == Var::Z(0) { 2.0 } else { 3.0 }), 4.0);
        let q = &p - &p;
        assert!(q.is_zero());
        let s = p.substitute(&|v| if v == Var::Z(0) { Poly::constant(0.0) } else { Poly::var(v) });
        assert!(s.is_zero());
    }

    #[test]
    fn monomials_are_canonical() {
        let a = Monomial::from_vars(vec![Var::Z(1), Var::Y(0, 2)]);
        let b = Monomial::from_vars(vec![Var::Y(0, 2), Var::Z(1)]);
        assert_eq!(a, b);
        assert_eq!(a.mul(&b).degree(), 4);
    }
}
