use rand::Rng as _;

use super::ScoreProfile;
use crate::error::{param, Error, Result};
use crate::rng;

/// Unnormalised log-weights `-epsilon * score`. Errors if every point is undecided.
pub fn mechanism_log_weights(profile: &ScoreProfile, epsilon: f64) -> Result<Vec<f64>> {
    if profile.is_empty() {
        return Err(param("empty score profile"));
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(param(format!("epsilon must be finite and nonnegative, got {epsilon}")));
    }
    if profile.undecided_flags.iter().all(|&u| u) {
        return Err(Error::AllUndecided);
    }
    Ok(profile.scores.iter().map(|&s| -epsilon * s).collect())
}

/// Exact output distribution over the grid, normalised with log-sum-exp.
pub fn mechanism_probabilities(profile: &ScoreProfile, epsilon: f64) -> Result<Vec<f64>> {
    let w = mechanism_log_weights(profile, epsilon)?;
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = w.iter().map(|x| (x - max).exp()).sum();
    let log_z = max + total.ln();
    Ok(w.iter().map(|x| (x - log_z).exp()).collect())
}

/// Draws a grid point with probability proportional to `exp(-epsilon * score)`.
pub fn exp_mechanism_sample(profile: &ScoreProfile, epsilon: f64, seed: u64) -> Result<f64> {
    let probs = mechanism_probabilities(profile, epsilon)?;
    let u: f64 = rng::from_seed(seed).random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(profile.grid[i]);
        }
    }
    // rounding left the cumulative sum just below one
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1);
    Ok(profile.grid[last])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi_square_gof;

    fn profile(scores: Vec<f64>) -> ScoreProfile {
        let k = scores.len();
        ScoreProfile { grid: (0..k).map(|i| i as f64).collect(), scores, undecided_flags: vec![false; k] }
    }

    fn histogram(p: &ScoreProfile, eps: f64, draws: u64) -> Vec<usize> {
        let mut counts = vec![0; p.len()];
        for s in 0..draws {
            counts[exp_mechanism_sample(p, eps, s).unwrap() as usize] += 1;
        }
        counts
    }

    #[test]
    fn equal_scores_are_uniform() {
        let p = profile(vec![3.0; 10]);
        let counts = histogram(&p, 2.0, 100_000);
        assert!(chi_square_gof(&counts, &[0.1; 10]).unwrap() > 0.001);
    }

    #[test]
    fn zero_epsilon_is_uniform() {
        let p = profile(vec![0.0, 5.0, 1.0, 7.0, 2.0]);
        let probs = mechanism_probabilities(&p, 0.0).unwrap();
        assert!(probs.iter().all(|&q| (q - 0.2).abs() < 1e-15));
    }

    #[test]
    fn dominant_zero_score() {
        let n = 20.0;
        let mut scores = vec![n; 41];
        scores[7] = 0.0;
        let probs = mechanism_probabilities(&profile(scores), 10.0).unwrap();
        assert!(probs[7] >= 1.0 - 40.0 * (-200.0f64).exp());
        assert_eq!(exp_mechanism_sample(&profile(vec![20.0, 0.0, 20.0]), 10.0, 5).unwrap(), 1.0);
    }

    #[test]
    fn shift_invariance() {
        let base = profile(vec![0.0, 2.0, 1.0, 4.0]);
        let shifted = profile(vec![100.0, 102.0, 101.0, 104.0]);
        let a = mechanism_probabilities(&base, 1.3).unwrap();
        let b = mechanism_probabilities(&shifted, 1.3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        for s in 0..50 {
            assert_eq!(exp_mechanism_sample(&base, 1.3, s).unwrap(), exp_mechanism_sample(&shifted, 1.3, s).unwrap());
        }
    }

    #[test]
    fn large_scores_do_not_underflow() {
        let probs = mechanism_probabilities(&profile(vec![1e6, 1e6 + 1.0]), 50.0).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_undecided_is_an_error() {
        let mut p = profile(vec![1.0, 2.0]);
        p.undecided_flags = vec![true, true];
        assert!(matches!(exp_mechanism_sample(&p, 1.0, 0), Err(Error::AllUndecided)));
        let empty = profile(vec![]);
        assert!(exp_mechanism_sample(&empty, 1.0, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn shift_leaves_law_unchanged(scores in proptest::collection::vec(0.0f64..20.0, 1..30), c in -50.0f64..50.0, eps in 0.0f64..5.0) {
            let a = mechanism_probabilities(&profile(scores.clone()), eps).unwrap();
            let b = mechanism_probabilities(&profile(scores.iter().map(|s| s + c).collect()), eps).unwrap();
            for (x, y) in a.iter().zip(&b) {
                proptest::prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let p = profile(vec![0.0, 1.0, 2.0, 0.5]);
        assert_eq!(exp_mechanism_sample(&p, 0.7, 42).unwrap(), exp_mechanism_sample(&p, 0.7, 42).unwrap());
    }
}
