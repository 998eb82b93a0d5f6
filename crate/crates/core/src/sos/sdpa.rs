//! Export of moment relaxations in SDPA sparse format.
//!
//! The file describes `sum_k F_k y_k - F_0 >= 0` over the moments `y_1 .. y_m`
//! (the constant moment is folded into `F_0`) with a zero objective:
//!
//! ```text
//! " comment lines start with a double quote
//! m                      number of variables
//! nblocks                number of blocks
//! s_1 s_2 ...            block sizes; negative = diagonal (LP) block
//! 0 0 ... 0              objective vector (length m)
//! k b i j v              entry (i, j), i <= j, of block b of F_k, 1-based
//! ```
//!
//! Block 1 is a diagonal block holding the scalar inequalities followed by each
//! equality as a pair of opposite inequalities. The remaining blocks are the moment
//! matrix and the localizing matrices, in the problem's order.

use std::fmt::Write as _;

use super::relax::{LinearForm, PseudoExpectationProblem};
use crate::error::{Error, Result};

/// Renders a problem in SDPA sparse format.
pub fn export_sdpa(problem: &PseudoExpectationProblem) -> String {
    let m = problem.monomials.len() - 1;
    let mut diag: Vec<&LinearForm> = problem.inequalities.iter().map(|f| &f.form).collect();
    let negated: Vec<LinearForm> = problem
        .equalities
        .iter()
        .map(|f| LinearForm { terms: f.form.terms.iter().map(|&(k, c)| (k, -c)).collect() })
        .collect();
    for (e, neg) in problem.equalities.iter().zip(&negated) {
        diag.push(&e.form);
        diag.push(neg);
    }
    let mut sizes: Vec<i64> = Vec::new();
    let has_diag = !diag.is_empty();
    if has_diag {
        sizes.push(-(diag.len() as i64));
    }
    sizes.extend(problem.moment_blocks.iter().map(|b| b.dim as i64));

    let mut out = String::new();
    let _ = writeln!(out, "\" moment relaxation: n = {}, level = {}, variables = moments 1..{m}", problem.n, problem.level);
    let _ = writeln!(out, "{m}");
    let _ = writeln!(out, "{}", sizes.len());
    let _ = writeln!(out, "{}", sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" "));
    let _ = writeln!(out, "{}", vec!["0"; m].join(" "));

    let emit = |out: &mut String, block: usize, i: usize, j: usize, f: &LinearForm| {
        for &(k, c) in &f.terms {
            // constant term goes to F_0 with flipped sign
            let v = if k == 0 { -c } else { c };
            let _ = writeln!(out, "{k} {block} {} {} {v:e}", i + 1, j + 1);
        }
    };
    let mut block = 1;
    if has_diag {
        for (r, f) in diag.iter().enumerate() {
            emit(&mut out, block, r, r, f);
        }
        block += 1;
    }
    for b in &problem.moment_blocks {
        for i in 0..b.dim {
            for j in i..b.dim {
                emit(&mut out, block, i, j, b.entry(i, j));
            }
        }
        block += 1;
    }
    out
}

/// Parsed SDPA sparse file.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpaFile {
    pub m: usize,
    pub block_sizes: Vec<i64>,
    /// `(k, block, i, j, value)`, 1-based as in the file.
    pub entries: Vec<(usize, usize, usize, usize, f64)>,
}

impl SdpaFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('"') && !l.starts_with('*'));
        let mut next = |what: &str| {
            lines.next().ok_or(Error::Parse { line: 0, msg: format!("missing {what}") })
        };
        let perr = |line: usize, msg: &str| Error::Parse { line: line + 1, msg: msg.to_string() };
        let (ln, l) = next("m")?;
        let m: usize = l.trim().parse().map_err(|_| perr(ln, "bad m"))?;
        let (ln, l) = next("block count")?;
        let nb: usize = l.trim().parse().map_err(|_| perr(ln, "bad block count"))?;
        let (ln, l) = next("block sizes")?;
        let block_sizes: Vec<i64> = l
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| perr(ln, "bad block size")))
            .collect::<Result<_>>()?;
        if block_sizes.len() != nb {
            return Err(perr(ln, "block count mismatch"));
        }
        next("objective")?;
        let mut entries = Vec::new();
        for (ln, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 5 {
                return Err(perr(ln, "expected five fields"));
            }
            let p = |s: &str| s.parse::<usize>().map_err(|_| perr(ln, "bad index"));
            let v: f64 = f[4].parse().map_err(|_| perr(ln, "bad value"))?;
            entries.push((p(f[0])?, p(f[1])?, p(f[2])?, p(f[3])?, v));
        }
        Ok(Self { m, block_sizes, entries })
    }

    /// Minimum eigenvalue over blocks of `sum_k F_k y_k - F_0` at `y` (`y[0]` unused).
    pub fn min_eigenvalue(&self, y: &[f64]) -> f64 {
        let mut mats: Vec<nalgebra::DMatrix<f64>> = self
            .block_sizes
            .iter()
            .map(|&s| nalgebra::DMatrix::zeros(s.unsigned_abs() as usize, s.unsigned_abs() as usize))
            .collect();
        for &(k, b, i, j, v) in &self.entries {
            let w = if k == 0 { -v } else { v * y[k] };
            let mat = &mut mats[b - 1];
            mat[(i - 1, j - 1)] += w;
            if i != j {
                mat[(j - 1, i - 1)] += w;
            }
        }
        mats.iter().map(crate::linalg::min_eigenvalue).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sample_er;
    use crate::sos::conic::SolverTolerances;
    use crate::sos::relax::relax;
    use crate::sos::solver::check_feasibility;
    use crate::sos::system::{build_system, SystemKind, SystemParams};

    #[test]
    fn export_round_trip() {
        let a = sample_er(4, 0.5, 1).unwrap();
        let p = SystemParams { gamma: Some(0.5), sigma: Some(3.0), ..SystemParams::with_graph(&a) };
        let prob = relax(&build_system(4, SystemKind::C, &p).unwrap(), 2).unwrap();
        let text = export_sdpa(&prob);
        let f = SdpaFile::parse(&text).unwrap();
        assert_eq!(f.m, prob.monomials.len() - 1);
        assert_eq!(f.block_sizes[0], -(prob.inequalities.len() as i64));
        assert_eq!(f.block_sizes[1], prob.moment_matrix().dim as i64);
        let r = check_feasibility(&prob, &SolverTolerances::default());
        let y = r.moments.unwrap();
        assert!(f.min_eigenvalue(&y) >= -1e-5);
    }
}
