use rand::Rng as _;
use statrs::distribution::{ContinuousCDF, Laplace};

use super::{
    exp_mechanism_sample, score_grid, score_profile, EstimateRecord, PrivacyParams, ScoreKind, ScoreParams, ScoreProfile,
    Stage,
};
use crate::error::{param, Error, Result};
use crate::graph::{edge_density, Graph};
use crate::rng;
use crate::sos::conic::Status;
use crate::sos::relax::relax;
use crate::sos::solver::check_feasibility_with;
use crate::sos::system::build_system;

fn private_stage(kind: ScoreKind) -> Stage {
    match kind {
        ScoreKind::Coarse => Stage::Coarse,
        ScoreKind::FineEr => Stage::FineEr,
        ScoreKind::FineInhomo => Stage::FineInhomo,
    }
}

/// Samples from a precomputed profile; charges `2 epsilon`.
pub fn private_from_profile(
    stage: Stage,
    profile: &ScoreProfile,
    n: usize,
    epsilon: f64,
    seed: u64,
) -> Result<EstimateRecord> {
    let estimate = exp_mechanism_sample(profile, epsilon, seed)?;
    let gamma = profile.score_near(estimate).map(|s| s / n as f64);
    Ok(EstimateRecord { stage, estimate, epsilon_spent: 2.0 * epsilon, gamma_at_estimate: gamma })
}

/// Exponential mechanism over the score of `params.kind`; level and window width come
/// from `privacy` when set there.
pub fn private_estimate(a: &Graph, params: &ScoreParams, privacy: &PrivacyParams, seed: u64) -> Result<EstimateRecord> {
    privacy.validate()?;
    let n = a.n();
    let mut params = params.clone().with_level(privacy.level);
    if let Some(alpha) = privacy.alpha {
        params = params.with_alpha(alpha);
    }
    params.validate()?;
    let (lo, hi) = params.range(n);
    let grid = score_grid(lo, hi, privacy.step(n))?;
    let profile = score_profile(a, &params, &grid)?;
    private_from_profile(private_stage(params.kind), &profile, n, privacy.epsilon, seed)
}

pub fn private_coarse_estimate(a: &Graph, eta: f64, r: f64, privacy: &PrivacyParams, seed: u64) -> Result<EstimateRecord> {
    private_estimate(a, &ScoreParams::new(ScoreKind::Coarse, eta, r), privacy, seed)
}

pub fn private_fine_estimate(
    a: &Graph,
    d_hat: f64,
    kind: ScoreKind,
    eta: f64,
    r: f64,
    privacy: &PrivacyParams,
    seed: u64,
) -> Result<EstimateRecord> {
    if kind == ScoreKind::Coarse {
        return Err(param("private_fine_estimate needs a fine score kind"));
    }
    private_estimate(a, &ScoreParams::new(kind, eta, r).with_d_hat(d_hat), privacy, seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoStageEstimate {
    pub coarse: EstimateRecord,
    pub fine: EstimateRecord,
}

impl TwoStageEstimate {
    pub fn estimate(&self) -> f64 {
        self.fine.estimate
    }

    pub fn epsilon_spent(&self) -> f64 {
        self.coarse.epsilon_spent + self.fine.epsilon_spent
    }
}

/// Coarse then fine, each stage running its mechanism at `epsilon / 4` so the total
/// charge is `epsilon`.
pub fn two_stage_estimate(
    a: &Graph,
    fine_kind: ScoreKind,
    eta: f64,
    r: f64,
    privacy: &PrivacyParams,
    seed: u64,
) -> Result<TwoStageEstimate> {
    privacy.validate()?;
    let stage = PrivacyParams { epsilon: privacy.epsilon / 4.0, ..*privacy };
    let coarse = private_coarse_estimate(a, eta, r, &stage, rng::derive(seed, &[0]))?;
    let fine = private_fine_estimate(a, coarse.estimate, fine_kind, eta, r, &stage, rng::derive(seed, &[1]))?;
    Ok(TwoStageEstimate { coarse, fine })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobustOutcome {
    /// `E~[d(Y)]` at the returned pseudo-expectation.
    pub estimate: f64,
    pub gamma: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves the relaxation of `params.kind` at the robust budget and returns `E~[d(Y)]`.
pub fn robust_estimate(a: &Graph, params: &ScoreParams) -> Result<RobustOutcome> {
    params.validate()?;
    let n = a.n();
    if n == 0 {
        return Err(param("estimation needs at least one node"));
    }
    let gamma = params.robust_gamma();
    let system = build_system(n, params.kind.system(), &params.system_params(a, gamma))?;
    let problem = relax(&system, params.level)?;
    let r = check_feasibility_with(&problem, &params.solve);
    match (r.status, r.moments) {
        (Status::Feasible, Some(m)) => Ok(RobustOutcome {
            estimate: problem.average_degree(&m),
            gamma,
            residual: r.residual,
            iterations: r.iterations,
        }),
        (status, _) => Err(Error::Estimation(format!(
            "{} relaxation is {status:?} at gamma = {gamma} (residual {:.3e})",
            params.kind.name(),
            r.residual
        ))),
    }
}

pub fn robust_coarse(a: &Graph, eta: f64, r: f64) -> Result<f64> {
    Ok(robust_estimate(a, &ScoreParams::new(ScoreKind::Coarse, eta, r))?.estimate)
}

/// Coarse stage for `d_hat`, then the fine relaxation of `kind`. The Erdős–Rényi kind
/// runs its coarse stage with `R = 1`.
pub fn robust_fine(a: &Graph, eta: f64, r: f64, kind: ScoreKind) -> Result<f64> {
    let coarse_r = if kind == ScoreKind::FineEr { 1.0 } else { r };
    let d_hat = robust_coarse(a, eta, coarse_r)?.max(0.0);
    Ok(robust_estimate(a, &ScoreParams::new(kind, eta, r).with_d_hat(d_hat))?.estimate)
}

/// Edge density plus Laplace noise of scale `2 / (epsilon n)`.
pub fn laplace_baseline(a: &Graph, epsilon: f64, seed: u64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(param(format!("epsilon must be positive, got {epsilon}")));
    }
    let density = edge_density(a)?;
    let scale = 2.0 / (epsilon * a.n() as f64);
    if scale == 0.0 {
        return Ok(density);
    }
    let lap = Laplace::new(0.0, scale).map_err(|e| param(e.to_string()))?;
    // inverse CDF on (0, 1); statrs is built against a different rand major version
    let u: f64 = rng::from_seed(seed).random_range(f64::MIN_POSITIVE..1.0);
    Ok(density + lap.inverse_cdf(u))
}

/// Non-private, non-robust edge density.
pub fn empirical_estimate(a: &Graph) -> Result<f64> {
    edge_density(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corruption::{corrupt, CorruptionParams, Strategy};
    use crate::graph::{average_degree, sample_er};
    use crate::mechanism::{mechanism_probabilities, sos_score};
    use crate::stats::mean;

    #[test]
    fn robust_on_empty_graph_is_zero() {
        let g = Graph::empty(6);
        assert!(robust_coarse(&g, 0.1, 1.0).unwrap().abs() < 1e-6);
        assert!(robust_fine(&g, 0.0, 1.0, ScoreKind::FineEr).unwrap().abs() < 1e-6);
        assert!(robust_fine(&g, 0.0, 1.0, ScoreKind::FineInhomo).unwrap().abs() < 1e-6);
    }

    #[test]
    fn robust_coarse_on_complete_graph_within_lemma_window() {
        let n = 8;
        let g = Graph::complete(n);
        let (eta, gamma_star) = (0.1, 0.0);
        let p = ScoreParams::new(ScoreKind::Coarse, eta, 1.0);
        let (gamma, sigma) = (p.robust_gamma(), p.sigma(n));
        let est = robust_coarse(&g, eta, 1.0).unwrap();
        let d_star = average_degree(&g);
        let c = 1.0 - 2.0 * gamma * sigma - 2.0 * gamma_star * sigma;
        // the lemma's window is vacuous once c <= 0; the moment point must still lie in [0, n - 1]
        let lower = if c > 0.0 { c * d_star } else { 0.0 };
        assert!(est >= lower - 1e-6 && est <= (n - 1) as f64 + 1e-6, "{est}");
    }

    #[test]
    fn robust_fine_uncorrupted_close_to_density() {
        for seed in 0..3 {
            let a = sample_er(10, 0.5, seed).unwrap();
            let d = average_degree(&a);
            for kind in [ScoreKind::FineEr, ScoreKind::FineInhomo] {
                let est = robust_fine(&a, 0.0, 1.0, kind).unwrap();
                assert!((est - d).abs() < 1e-3, "{kind:?} {est} vs {d}");
            }
        }
    }

    #[test]
    fn robust_coarse_under_boost() {
        let (n, p, eta) = (12usize, 0.5, 0.1);
        let d0 = n as f64 * p;
        let good = (0..20)
            .filter(|&s| {
                let g = sample_er(n, p, s).unwrap();
                let (a, _) = corrupt(&g, &CorruptionParams::new(eta, Strategy::DegreeBoost, s)).unwrap();
                (robust_coarse(&a, eta, 1.0).unwrap() / d0 - 1.0).abs() <= 0.5
            })
            .count();
        assert!(good >= 17, "{good}/20");
    }

    #[test]
    fn laplace_limits_and_variance() {
        let a = sample_er(20, 0.3, 1).unwrap();
        assert_eq!(laplace_baseline(&a, f64::INFINITY, 3).unwrap(), edge_density(&a).unwrap());
        assert!(laplace_baseline(&a, 0.0, 3).is_err());
        let eps = 1.0;
        let b = 2.0 / (eps * 20.0);
        let density = edge_density(&a).unwrap();
        let draws: Vec<f64> = (0..100_000).map(|s| laplace_baseline(&a, eps, s).unwrap() - density).collect();
        let m = mean(&draws).unwrap();
        let var = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((var / (2.0 * b * b) - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn laplace_empirical_dp_ratio() {
        // neighbouring graphs: node 0 rewired
        let g = sample_er(8, 0.5, 11).unwrap();
        let mut h = g.clone();
        for j in 1..8 {
            h.set_edge(0, j, !g.has_edge(0, j));
        }
        let eps = 1.0;
        let bins = 20;
        let (lo, hi) = (-0.5, 1.5);
        let hist = |x: &Graph| {
            let mut c = vec![0usize; bins];
            for s in 0..100_000 {
                let v = laplace_baseline(x, eps, s).unwrap();
                let k = (((v - lo) / (hi - lo)) * bins as f64).floor().clamp(0.0, bins as f64 - 1.0) as usize;
                c[k] += 1;
            }
            c
        };
        let (cg, ch) = (hist(&g), hist(&h));
        for (a, b) in cg.iter().zip(&ch) {
            if *a >= 1000 && *b >= 1000 {
                let ratio = *a as f64 / *b as f64;
                let se = (1.0 / *a as f64 + 1.0 / *b as f64).sqrt();
                assert!(ratio <= eps.exp() * (1.0 + 3.0 * se) && 1.0 / ratio <= eps.exp() * (1.0 + 3.0 * se));
            }
        }
    }

    #[test]
    fn private_coarse_records_double_epsilon() {
        let a = sample_er(6, 0.5, 1).unwrap();
        let rec = private_coarse_estimate(&a, 0.0, 1.0, &PrivacyParams { grid_step: Some(0.5), ..PrivacyParams::new(0.8) }, 3).unwrap();
        assert_eq!(rec.stage, Stage::Coarse);
        assert_eq!(rec.epsilon_spent, 1.6);
        assert!((0.0..=6.0).contains(&rec.estimate));
    }

    #[test]
    fn zero_epsilon_profile_is_uniform() {
        let a = sample_er(6, 0.5, 2).unwrap();
        let p = ScoreParams::new(ScoreKind::Coarse, 0.1, 1.0);
        let grid = score_grid(0.0, 6.0, 1.0).unwrap();
        let prof = score_profile(&a, &p, &grid).unwrap();
        let probs = mechanism_probabilities(&prof, 0.0).unwrap();
        assert!(probs.iter().all(|&q| (q - 1.0 / 7.0).abs() < 1e-12));
    }

    #[test]
    fn fine_inhomo_range_enforced() {
        let a = sample_er(6, 0.5, 2).unwrap();
        let p = ScoreParams::new(ScoreKind::FineInhomo, 0.2, 1.0).with_d_hat(0.2);
        let (_, hi) = p.range(6);
        assert!(hi < 6.0);
        assert!(sos_score(hi + 0.1, &a, &p).is_err());
        assert!(private_fine_estimate(&a, 1.0, ScoreKind::Coarse, 0.1, 1.0, &PrivacyParams::new(1.0), 0).is_err());
    }

    #[test]
    fn two_stage_accounting() {
        let a = sample_er(6, 0.5, 3).unwrap();
        let privacy = PrivacyParams { grid_step: Some(0.5), ..PrivacyParams::new(2.0) };
        let r = two_stage_estimate(&a, ScoreKind::FineEr, 0.0, 1.0, &privacy, 9).unwrap();
        assert!((r.epsilon_spent() - 2.0).abs() < 1e-12);
        assert_eq!(r.epsilon_spent(), r.coarse.epsilon_spent + r.fine.epsilon_spent);
        assert_eq!(r.estimate(), r.fine.estimate);
    }
}
