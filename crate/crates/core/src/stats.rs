//! Small statistics helpers: binomial pmfs in log-space, chi-square goodness of fit,
//! quantiles and least-squares slopes.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use crate::error::{param, Result};

pub fn ln_binomial_coeff(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Log of the `Bin(n, p)` pmf at `k`. Returns `-inf` outside the support.
pub fn ln_binomial_pmf(n: u64, p: f64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_binomial_coeff(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()
}

/// Full `Bin(n, p)` pmf vector of length `n + 1`.
pub fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    (0..=n).map(|k| ln_binomial_pmf(n, p, k).exp()).collect()
}

/// Chi-square goodness-of-fit p-value of observed counts against a pmf.
///
/// Adjacent cells are merged left to right until each merged cell has expected count
/// at least 5; a deficient tail is folded into the last full cell.
pub fn chi_square_gof(observed: &[usize], pmf: &[f64]) -> Result<f64> {
    if observed.len() != pmf.len() || observed.is_empty() {
        return Err(param("observed counts and pmf must have equal nonzero length"));
    }
    let total: usize = observed.iter().sum();
    if total == 0 {
        return Err(param("no observations"));
    }
    let mass: f64 = pmf.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(pmf) {
        obs += o as f64;
        exp += p / mass * total as f64;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => cells.push((obs, exp)),
        }
    }
    if cells.len() < 2 {
        return Ok(1.0);
    }
    let stat: f64 = cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dist = ChiSquared::new((cells.len() - 1) as f64).map_err(|e| param(e.to_string()))?;
    Ok(1.0 - dist.cdf(stat))
}

/// Quantile with linear interpolation between order statistics (type 7).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = mean(x)?;
    let my = mean(y)?;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_sums_to_one() {
        for &(n, p) in &[(1u64, 0.5), (50, 0.1), (400, 0.37), (10, 0.0), (10, 1.0)] {
            let s: f64 = binomial_pmf(n, p).iter().sum();
            assert!((s - 1.0).abs() < 1e-10, "n={n} p={p} sum={s}");
        }
        let pmf = binomial_pmf(2, 0.5);
        assert!((pmf[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn quantiles_by_hand() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&v), Some(2.5));
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert!((quantile(&v, 0.9).unwrap() - 3.7).abs() < 1e-12);
        assert_eq!(median(&[5.0]), Some(5.0));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn slope_of_line() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, -1.0, -3.0];
        assert!((ols_slope(&x, &y).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn gof_accepts_exact_and_rejects_shifted() {
        let pmf = binomial_pmf(10, 0.5);
        let exact: Vec<usize> = pmf.iter().map(|p| (p * 10_000.0).round() as usize).collect();
        assert!(chi_square_gof(&exact, &pmf).unwrap() > 0.5);
        let shifted: Vec<usize> = binomial_pmf(10, 0.6).iter().map(|p| (p * 10_000.0).round() as usize).collect();
        assert!(chi_square_gof(&shifted, &pmf).unwrap() < 1e-6);
    }
}
