use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ScoreParams;
use crate::error::{param, Error, Result};
use crate::graph::Graph;
use crate::sos::conic::Status;
use crate::sos::relax::relax;
use crate::sos::solver::{check_feasibility_with, FeasibilityResult};
use crate::sos::system::{build_system, PolynomialSystem, SystemKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScoreOutcome {
    /// Smallest feasible `k` on the grid `{0, ..., n}` (so the score is `k` nodes).
    pub score: usize,
    /// Solves that returned [`Status::Undecided`]; these count as infeasible.
    pub undecided: usize,
    pub solves: usize,
}

/// Scores over a grid of candidate densities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreProfile {
    pub grid: Vec<f64>,
    pub scores: Vec<f64>,
    /// True where at least one solve during the bisection was undecided.
    pub undecided_flags: Vec<bool>,
}

impl ScoreProfile {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Score at the grid point nearest to `d`.
    pub fn score_near(&self, d: f64) -> Option<f64> {
        let i = self
            .grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - d).abs().total_cmp(&(b.1 - d).abs()))?
            .0;
        Some(self.scores[i])
    }
}

/// Points `lo, lo + step, ...` not exceeding `hi`.
pub fn score_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0) || !(lo <= hi) {
        return Err(param(format!("invalid grid [{lo}, {hi}] with step {step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| lo + k as f64 * step).collect())
}

/// The system whose relaxation is tested at candidate density `d` and budget `k / n`.
pub fn score_system(a: &Graph, params: &ScoreParams, d: f64, k: usize) -> Result<PolynomialSystem> {
    let n = a.n();
    let mut sp = params.system_params(a, k as f64 / n as f64);
    sp.d_target = Some(d);
    sp.alpha = Some(params.alpha(n));
    build_system(n, params.kind.system(), &sp)?.union(build_system(n, SystemKind::DensityWindow, &sp)?)
}

fn feasible_at(a: &Graph, params: &ScoreParams, d: f64, k: usize) -> Result<FeasibilityResult> {
    let problem = relax(&score_system(a, params, d, k)?, params.level)?;
    Ok(check_feasibility_with(&problem, &params.solve))
}

/// Score `s(d; A)` by bisection over `gamma in {0, 1/n, ..., 1}`, relying on
/// feasibility being monotone in `gamma`.
pub fn sos_score_detailed(d: f64, a: &Graph, params: &ScoreParams) -> Result<ScoreOutcome> {
    params.validate()?;
    let n = a.n();
    if n == 0 {
        return Err(param("score needs at least one node"));
    }
    let (lo, hi) = params.range(n);
    if !(d >= lo - 1e-12 && d <= hi + 1e-12) {
        return Err(param(format!("density {d} outside the admissible range [{lo}, {hi}]")));
    }
    let mut undecided = 0;
    let mut solves = 0;
    let mut feasible = |k: usize| -> Result<bool> {
        solves += 1;
        let r = feasible_at(a, params, d, k)?;
        if r.status == Status::Undecided {
            undecided += 1;
        }
        Ok(r.status == Status::Feasible)
    };
    if !feasible(n)? {
        return Ok(ScoreOutcome { score: n, undecided, solves });
    }
    // invariant: `hi` feasible, everything at or below `lo` infeasible
    let (mut lo, mut hi) = (-1i64, n as i64);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if feasible(mid as usize)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ScoreOutcome { score: hi as usize, undecided, solves })
}

/// Score in units of nodes.
pub fn sos_score(d: f64, a: &Graph, params: &ScoreParams) -> Result<f64> {
    Ok(sos_score_detailed(d, a, params)?.score as f64)
}

/// Scores every grid point, in parallel.
pub fn score_profile(a: &Graph, params: &ScoreParams, grid: &[f64]) -> Result<ScoreProfile> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty score grid".into()));
    }
    let outcomes: Vec<ScoreOutcome> = grid.par_iter().map(|&d| sos_score_detailed(d, a, params)).collect::<Result<_>>()?;
    Ok(ScoreProfile {
        grid: grid.to_vec(),
        scores: outcomes.iter().map(|o| o.score as f64).collect(),
        undecided_flags: outcomes.iter().map(|o| o.undecided > 0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{average_degree, sample_er};
    use crate::mechanism::ScoreKind;

    #[test]
    fn grid_points() {
        assert_eq!(score_grid(0.0, 1.0, 0.25).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(score_grid(0.0, 12.0, 1.0 / 12.0).unwrap().len(), 145);
        assert!(score_grid(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn own_density_scores_zero() {
        let a = sample_er(8, 0.5, 1).unwrap();
        let d = average_degree(&a);
        for kind in [ScoreKind::Coarse, ScoreKind::FineInhomo, ScoreKind::FineEr] {
            let p = ScoreParams::new(kind, 0.1, 1.0).with_d_hat(4.0);
            assert_eq!(sos_score(d, &a, &p).unwrap(), 0.0, "{kind:?}");
        }
    }

    #[test]
    fn scores_are_bounded_by_n() {
        let a = Graph::complete(6);
        let p = ScoreParams::new(ScoreKind::Coarse, 0.1, 1.0);
        for d in [0.0, 1.0, 3.0, 6.0] {
            let s = sos_score(d, &a, &p).unwrap();
            assert!((0.0..=6.0).contains(&s));
        }
        assert!(sos_score(0.0, &a, &p).unwrap() > 0.0);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let a = sample_er(6, 0.5, 2).unwrap();
        let p = ScoreParams::new(ScoreKind::FineInhomo, 0.1, 1.0).with_d_hat(0.1);
        let (_, hi) = p.range(6);
        assert!(sos_score(hi + 0.5, &a, &p).is_err());
        assert!(sos_score(-1.0, &a, &ScoreParams::new(ScoreKind::Coarse, 0.1, 1.0)).is_err());
        assert!(sos_score(1.0, &a, &ScoreParams::new(ScoreKind::FineEr, 0.1, 1.0)).is_err());
    }

    #[test]
    fn feasibility_is_monotone_in_gamma() {
        let a = sample_er(7, 0.4, 3).unwrap();
        let p = ScoreParams::new(ScoreKind::Coarse, 0.1, 1.0);
        let d = average_degree(&a) + 1.7;
        let flags: Vec<bool> = (0..=7).map(|k| feasible_at(&a, &p, d, k).unwrap().status == Status::Feasible).collect();
        let first = flags.iter().position(|&f| f).unwrap();
        assert!(flags[first..].iter().all(|&f| f), "{flags:?}");
        assert_eq!(sos_score(d, &a, &p).unwrap(), first as f64);
    }

    #[test]
    fn profile_matches_pointwise_scores() {
        let a = sample_er(6, 0.5, 4).unwrap();
        let p = ScoreParams::new(ScoreKind::Coarse, 0.1, 1.0);
        let grid = score_grid(0.0, 6.0, 1.0).unwrap();
        let prof = score_profile(&a, &p, &grid).unwrap();
        for (d, s) in prof.grid.iter().zip(&prof.scores) {
            assert_eq!(*s, sos_score(*d, &a, &p).unwrap());
        }
    }
}
