//! Coupling constructions and hard-instance simulations behind the lower bounds.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::corruption::{budget, hard_instance_pair, sample_hard_instance_coupled};
use crate::error::{check_probability, param, Result};
use crate::graph::{edge_density, node_distance_at_most, undirect, DirectedGraph, Graph};
use crate::rng;
use crate::stats::binomial_pmf;

/// `TV(Bin(n, p), Bin(n, p'))`, from log-space pmfs.
pub fn binomial_tv(n: u64, p: f64, p_prime: f64) -> Result<f64> {
    check_probability("p", p)?;
    check_probability("p_prime", p_prime)?;
    let a = binomial_pmf(n, p);
    let b = binomial_pmf(n, p_prime);
    Ok(0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// `tau(x) = x sqrt((N + 2) / (2 p (1 - p)))` for a shift `x`.
pub fn adell_tau(n: u64, p: f64, x: f64) -> f64 {
    x.abs() * ((n as f64 + 2.0) / (2.0 * p * (1.0 - p))).sqrt()
}

/// `(sqrt(e)/2) tau / (1 - tau)^2`, defined when `tau < 1`.
pub fn adell_bound(tau: f64) -> Option<f64> {
    (tau < 1.0).then(|| 0.5 * std::f64::consts::E.sqrt() * tau / (1.0 - tau).powi(2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CouplingParams {
    pub n: usize,
    pub p0: f64,
    /// Shift defining `p' = (1 - 2 alpha) p0`.
    pub alpha: f64,
    /// Target failure probability, used only for reporting.
    pub beta: f64,
}

impl CouplingParams {
    pub fn new(n: usize, p0: f64, alpha: f64) -> Self {
        Self { n, p0, alpha, beta: 0.1 }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p0", self.p0)?;
        if !(0.0..=0.5).contains(&self.alpha) {
            return Err(param(format!("alpha must lie in [0, 1/2], got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(param(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        Ok(())
    }

    pub fn p_prime(&self) -> f64 {
        (1.0 - 2.0 * self.alpha) * self.p0
    }

    pub fn delta(&self) -> Result<f64> {
        binomial_tv(self.n as u64, self.p0, self.p_prime())
    }

    pub fn tau(&self) -> f64 {
        adell_tau(self.n as u64, self.p0, 2.0 * self.alpha * self.p0)
    }

    /// `log(1/beta) / (epsilon n sqrt(n p0))`, the accuracy floor with unit constant.
    pub fn alpha_floor(&self, epsilon: f64) -> f64 {
        (1.0 / self.beta).ln() / (epsilon * self.n as f64 * (self.n as f64 * self.p0).sqrt())
    }
}

/// Maximal coupling of two pmfs on `0..len`: the draws agree with probability `1 - TV`.
struct MaximalCoupling {
    overlap: Vec<f64>,
    excess_a: Vec<f64>,
    excess_b: Vec<f64>,
    tv: f64,
}

impl MaximalCoupling {
    fn new(a: &[f64], b: &[f64]) -> Self {
        let overlap: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.min(*y)).collect();
        let excess_a = a.iter().zip(&overlap).map(|(x, m)| x - m).collect();
        let excess_b = b.iter().zip(&overlap).map(|(y, m)| y - m).collect();
        let tv = (1.0 - overlap.iter().sum::<f64>()).max(0.0);
        Self { overlap, excess_a, excess_b, tv }
    }

    fn draw(weights: &[f64], u: f64) -> usize {
        let total: f64 = weights.iter().sum();
        let target = u * total;
        let mut acc = 0.0;
        for (k, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return k;
            }
        }
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }

    fn sample(&self, rng: &mut rng::Rng) -> (usize, usize) {
        let u: f64 = rng.random();
        if u >= self.tv {
            let k = Self::draw(&self.overlap, rng.random());
            (k, k)
        } else {
            (Self::draw(&self.excess_a, rng.random()), Self::draw(&self.excess_b, rng.random()))
        }
    }
}

/// A coupled pair `G ~ G(n, p0)`, `G' ~ G(n, p')` and the number of nodes whose
/// outdegrees disagreed.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledPair {
    pub g: Graph,
    pub g_prime: Graph,
    pub dist: usize,
}

/// Draws per-node outdegrees from the maximal coupling of `Bin(n, p0)` and `Bin(n, p')`,
/// realises both out-neighbourhoods as prefixes of one shuffled `[n]` (identical when the
/// degrees agree), drops self-loops and undirects.
pub fn sample_coupled_pair(params: &CouplingParams, seed: u64) -> Result<CoupledPair> {
    params.validate()?;
    let n = params.n;
    let coupling = MaximalCoupling::new(&binomial_pmf(n as u64, params.p0), &binomial_pmf(n as u64, params.p_prime()));
    Ok(sample_with(&coupling, n, seed))
}

fn sample_with(coupling: &MaximalCoupling, n: usize, seed: u64) -> CoupledPair {
    let mut rng = rng::from_seed(seed);
    let (mut a, mut b) = (DirectedGraph::empty(n), DirectedGraph::empty(n));
    let mut dist = 0;
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let (d, d_prime) = coupling.sample(&mut rng);
        if d != d_prime {
            dist += 1;
        }
        let (shuffled, _) = order.partial_shuffle(&mut rng, d.max(d_prime));
        for (k, &j) in shuffled.iter().enumerate() {
            if j != i {
                a.set_arc(i, j, k < d);
                b.set_arc(i, j, k < d_prime);
            }
        }
        order.sort_unstable();
    }
    CoupledPair { g: undirect(&a), g_prime: undirect(&b), dist }
}

/// Draws `trials` coupled pairs in parallel with seeds derived from `seed`.
pub fn coupled_distances(params: &CouplingParams, trials: usize, seed: u64) -> Result<Vec<usize>> {
    params.validate()?;
    let n = params.n;
    let coupling = MaximalCoupling::new(&binomial_pmf(n as u64, params.p0), &binomial_pmf(n as u64, params.p_prime()));
    Ok((0..trials).into_par_iter().map(|t| sample_with(&coupling, n, rng::derive(seed, &[t as u64])).dist).collect())
}

/// Outcome of testing the coupling inequality
/// `P'^2 <= (1 + Delta (e^{2 eps} - 1))^n * P` on a mechanism, where `P'` is the chance the
/// output lands within `alpha p0` of `p'` on `G(n, p')` and `P` the same chance on `G(n, p0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrivacyLbReport {
    pub delta: f64,
    pub mgf: f64,
    pub p_prime_hit: f64,
    pub p0_hit: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Standard error of `lhs - rhs`.
    pub se: f64,
    /// `lhs - rhs > 3 se`.
    pub violated: bool,
    pub alpha_floor: f64,
    /// `(2 log(1 - beta) + log(1/beta)) / (n (e^{2 eps} - 1))`, the smallest `Delta`
    /// compatible with accuracy `1 - beta`.
    pub delta_floor: f64,
}

/// Runs `mechanism` (a density estimator taking a graph and a seed) on both marginals of
/// the coupling. `epsilon` is the mechanism's privacy level.
pub fn privacy_lb_experiment(
    mechanism: &(dyn Fn(&Graph, u64) -> f64 + Sync),
    params: &CouplingParams,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<PrivacyLbReport> {
    params.validate()?;
    if trials == 0 {
        return Err(param("trials must be positive"));
    }
    let n = params.n;
    let coupling = MaximalCoupling::new(&binomial_pmf(n as u64, params.p0), &binomial_pmf(n as u64, params.p_prime()));
    let (target, width) = (params.p_prime(), params.alpha * params.p0);
    let hits: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let pair = sample_with(&coupling, n, rng::derive(seed, &[t as u64, 0]));
            let on_g = mechanism(&pair.g, rng::derive(seed, &[t as u64, 1]));
            let on_gp = mechanism(&pair.g_prime, rng::derive(seed, &[t as u64, 2]));
            ((on_gp - target).abs() < width, (on_g - target).abs() < width)
        })
        .collect();
    let t = trials as f64;
    let pp = hits.iter().filter(|h| h.0).count() as f64 / t;
    let p0 = hits.iter().filter(|h| h.1).count() as f64 / t;
    let delta = coupling.tv;
    let growth = (2.0 * epsilon).exp_m1();
    let mgf = (1.0 + delta * growth).powf(n as f64);
    let (lhs, rhs) = (pp * pp, mgf * p0);
    let se = ((2.0 * pp).powi(2) * pp * (1.0 - pp) / t + mgf * mgf * p0 * (1.0 - p0) / t).sqrt();
    let delta_floor = (2.0 * (1.0 - params.beta).ln() + (1.0 / params.beta).ln()) / (n as f64 * growth);
    Ok(PrivacyLbReport {
        delta,
        mgf,
        p_prime_hit: pp,
        p0_hit: p0,
        lhs,
        rhs,
        se,
        violated: lhs - rhs > 3.0 * se,
        alpha_floor: params.alpha_floor(epsilon),
        delta_floor,
    })
}

/// One row of the coupling sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingRow {
    pub n: usize,
    pub p0: f64,
    pub alpha: f64,
    pub delta: f64,
    pub tau: f64,
    pub tau_below_one: bool,
    pub adell_bound: Option<f64>,
    /// `Delta / (alpha sqrt(n p0))`.
    pub fitted_c: Option<f64>,
    pub mean_dist: f64,
    pub expected_dist: f64,
}

pub fn coupling_sweep(ns: &[usize], p0s: &[f64], alphas: &[f64], trials: usize, seed: u64) -> Result<Vec<CouplingRow>> {
    let mut rows = Vec::new();
    for (ci, (&n, &p0, &alpha)) in cross(ns, p0s, alphas).enumerate() {
        let params = CouplingParams::new(n, p0, alpha);
        params.validate()?;
        let delta = params.delta()?;
        let tau = params.tau();
        let scale = alpha * (n as f64 * p0).sqrt();
        let mean_dist = if trials > 0 {
            coupled_distances(&params, trials, rng::derive(seed, &[ci as u64]))?.iter().sum::<usize>() as f64 / trials as f64
        } else {
            f64::NAN
        };
        rows.push(CouplingRow {
            n,
            p0,
            alpha,
            delta,
            tau,
            tau_below_one: tau < 1.0,
            adell_bound: adell_bound(tau),
            fitted_c: (scale > 0.0).then(|| delta / scale),
            mean_dist,
            expected_dist: n as f64 * delta,
        });
    }
    Ok(rows)
}

fn cross<'a>(a: &'a [usize], b: &'a [f64], c: &'a [f64]) -> impl Iterator<Item = (&'a usize, &'a f64, &'a f64)> + 'a {
    a.iter().flat_map(move |x| b.iter().flat_map(move |y| c.iter().map(move |z| (x, y, z))))
}

/// One row of the robustness hard-instance sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobustInhomoRow {
    pub n: usize,
    pub p0: f64,
    pub eta: f64,
    pub r: f64,
    pub density_high: f64,
    pub density_low: f64,
    pub density_gap: f64,
    /// `r * eta * p0`, the scale of the gap.
    pub gap_scale: f64,
    pub budget: usize,
    /// Whether every sampled pair was within node distance `budget`.
    pub coupling_within_budget: bool,
    pub mean_empirical_gap: f64,
}

pub fn robust_inhomo_sweep(n: usize, p0s: &[f64], etas: &[f64], rs: &[f64], trials: usize, seed: u64) -> Result<Vec<RobustInhomoRow>> {
    let mut rows = Vec::new();
    for (ci, (&p0, &eta, &r)) in p0s.iter().flat_map(|p| etas.iter().flat_map(move |e| rs.iter().map(move |r| (p, e, r)))).enumerate() {
        let (q0, q1) = hard_instance_pair(n, p0, eta, r)?;
        let k = budget(eta, n);
        let samples: Vec<Result<(bool, f64)>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let (g0, g1) = sample_hard_instance_coupled(&q0, &q1, rng::derive(seed, &[ci as u64, t as u64]))?;
                Ok((node_distance_at_most(&g0, &g1, k)?, edge_density(&g0)? - edge_density(&g1)?))
            })
            .collect();
        let samples: Vec<(bool, f64)> = samples.into_iter().collect::<Result<_>>()?;
        let (d0, d1) = (q0.density(), q1.density());
        rows.push(RobustInhomoRow {
            n,
            p0,
            eta,
            r,
            density_high: d0,
            density_low: d1,
            density_gap: d0 - d1,
            gap_scale: r * eta * p0,
            budget: k,
            coupling_within_budget: samples.iter().all(|s| s.0),
            mean_empirical_gap: samples.iter().map(|s| s.1).sum::<f64>() / trials.max(1) as f64,
        });
    }
    Ok(rows)
}

/// One row of the inhomogeneous privacy sweep: a mechanism on both hard instances, with
/// the event "output within `r eta p0 / 2` of the high instance's density".
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrivacyInhomoRow {
    pub n: usize,
    pub p0: f64,
    pub eta: f64,
    pub r: f64,
    pub epsilon: f64,
    pub hit_high: f64,
    pub hit_low: f64,
    /// `e^{epsilon * budget}`: the largest ratio a private mechanism may show.
    pub ratio_bound: f64,
    pub violated: bool,
}

pub fn privacy_inhomo_sweep(
    mechanism: &(dyn Fn(&Graph, f64, u64) -> f64 + Sync),
    n: usize,
    p0: f64,
    etas: &[f64],
    r: f64,
    epsilons: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<PrivacyInhomoRow>> {
    let mut rows = Vec::new();
    for (ci, (&eta, &eps)) in etas.iter().flat_map(|e| epsilons.iter().map(move |x| (e, x))).enumerate() {
        let (q_high, q_low) = hard_instance_pair(n, p0, eta, r)?;
        let (target, width) = (q_high.density(), r * eta * p0 / 2.0);
        let hits: Vec<Result<(bool, bool)>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let (gh, gl) = sample_hard_instance_coupled(&q_high, &q_low, rng::derive(seed, &[ci as u64, t as u64, 0]))?;
                let h = mechanism(&gh, eps, rng::derive(seed, &[ci as u64, t as u64, 1]));
                let l = mechanism(&gl, eps, rng::derive(seed, &[ci as u64, t as u64, 2]));
                Ok(((h - target).abs() < width, (l - target).abs() < width))
            })
            .collect();
        let hits: Vec<(bool, bool)> = hits.into_iter().collect::<Result<_>>()?;
        let t = trials.max(1) as f64;
        let ph = hits.iter().filter(|h| h.0).count() as f64 / t;
        let pl = hits.iter().filter(|h| h.1).count() as f64 / t;
        let ratio_bound = (eps * budget(eta, n) as f64).exp();
        let se = ((ph * (1.0 - ph) + ratio_bound * ratio_bound * pl * (1.0 - pl)) / t).sqrt();
        rows.push(PrivacyInhomoRow {
            n,
            p0,
            eta,
            r,
            epsilon: eps,
            hit_high: ph,
            hit_low: pl,
            ratio_bound,
            violated: ph - ratio_bound * pl > 3.0 * se,
        });
    }
    Ok(rows)
}

/// Serialises rows as CSV with a header.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::node_distance;
    use crate::mechanism::laplace_baseline;
    use crate::stats::chi_square_gof;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn tv_examples() {
        assert_eq!(binomial_tv(10, 0.3, 0.3).unwrap(), 0.0);
        assert_abs_diff_eq!(binomial_tv(1, 0.5, 0.25).unwrap(), 0.25, epsilon = 1e-12);
        let params = CouplingParams::new(100, 0.1, 0.05);
        let delta = params.delta().unwrap();
        assert!(delta <= 2.0 * 0.05 * (100.0f64 * 0.1).sqrt());
        assert!(binomial_tv(3, 1.2, 0.1).is_err());
    }

    #[test]
    fn adell_bound_holds_on_sweep() {
        for n in [20u64, 50, 100, 400] {
            for p in [0.02, 0.05, 0.1, 0.3] {
                for alpha in [0.001, 0.01, 0.03, 0.05, 0.1] {
                    let tau = adell_tau(n, p, 2.0 * alpha * p);
                    if let Some(b) = adell_bound(tau) {
                        assert!(binomial_tv(n, p, (1.0 - 2.0 * alpha) * p).unwrap() <= b);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_shift_gives_identical_graphs() {
        let pair = sample_coupled_pair(&CouplingParams::new(15, 0.3, 0.0), 4).unwrap();
        assert_eq!(pair.g, pair.g_prime);
        assert_eq!(pair.dist, 0);
    }

    #[test]
    fn coupled_distance_law() {
        let params = CouplingParams::new(40, 0.2, 0.05);
        let delta = params.delta().unwrap();
        let dists = coupled_distances(&params, 10_000, 7).unwrap();
        let mut counts = vec![0usize; 41];
        for d in dists {
            counts[d] += 1;
        }
        assert!(chi_square_gof(&counts, &binomial_pmf(40, delta)).unwrap() > 0.01);
    }

    #[test]
    fn coupled_marginals_match_er() {
        let (n, trials) = (8usize, 100_000u64);
        let params = CouplingParams::new(n, 0.4, 0.2);
        let coupling = MaximalCoupling::new(&binomial_pmf(n as u64, 0.4), &binomial_pmf(n as u64, params.p_prime()));
        let mut freq = vec![[0usize; 2]; n * n];
        for s in 0..trials {
            let pair = sample_with(&coupling, n, s);
            for (i, j) in pair.g.edges() {
                freq[i * n + j][0] += 1;
            }
            for (i, j) in pair.g_prime.edges() {
                freq[i * n + j][1] += 1;
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let f = freq[i * n + j];
                assert!((f[0] as f64 / trials as f64 - 0.4).abs() < 0.02);
                assert!((f[1] as f64 / trials as f64 - params.p_prime()).abs() < 0.02);
            }
        }
    }

    #[test]
    fn laplace_respects_coupling_inequality() {
        let params = CouplingParams::new(60, 0.2, 0.01);
        let mech = |g: &Graph, s: u64| laplace_baseline(g, 0.5, s).unwrap();
        let r = privacy_lb_experiment(&mech, &params, 0.5, 4000, 3).unwrap();
        assert!(!r.violated, "{r:?}");
    }

    #[test]
    fn exact_density_violates_inequality() {
        // the non-private estimator separates the two marginals, which no private one can at this epsilon
        let params = CouplingParams::new(100, 0.3, 0.1);
        let mech = |g: &Graph, _s: u64| edge_density(g).unwrap();
        let r = privacy_lb_experiment(&mech, &params, 0.001, 4000, 5).unwrap();
        assert!(r.violated, "{r:?}");
    }

    #[test]
    fn large_epsilon_no_violation() {
        let params = CouplingParams::new(100, 0.3, 0.1);
        let mech = |g: &Graph, s: u64| laplace_baseline(g, 20.0, s).unwrap();
        let r = privacy_lb_experiment(&mech, &params, 20.0, 2000, 6).unwrap();
        assert!(params.alpha > r.alpha_floor);
        assert!(r.p_prime_hit > 0.9 && r.p0_hit < 0.1, "{r:?}");
        assert!(!r.violated);
    }

    #[test]
    fn robust_inhomo_rows() {
        let rows = robust_inhomo_sweep(20, &[0.2], &[0.1, 0.2], &[2.0], 50, 1).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.coupling_within_budget);
            assert!(r.density_gap > 0.0);
        }
        let csv = to_csv(&rows).unwrap();
        assert!(csv.starts_with("n,p0,eta,r,"));
    }

    #[test]
    fn privacy_inhomo_laplace_not_violated() {
        let mech = |g: &Graph, eps: f64, s: u64| laplace_baseline(g, eps, s).unwrap();
        let rows = privacy_inhomo_sweep(&mech, 30, 0.2, &[0.1], 3.0, &[0.5, 2.0], 2000, 2).unwrap();
        assert!(rows.iter().all(|r| !r.violated));
    }

    #[test]
    fn coupling_sweep_rows() {
        let rows = coupling_sweep(&[40], &[0.2], &[0.0, 0.05], 200, 3).unwrap();
        assert_eq!(rows[0].delta, 0.0);
        assert!(rows[1].fitted_c.unwrap() <= 2.0);
        assert!(rows[1].tau_below_one);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tv_is_a_metric(n in 1u64..60, a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
            let ab = binomial_tv(n, a, b).unwrap();
            prop_assert!((ab - binomial_tv(n, b, a).unwrap()).abs() < 1e-12);
            prop_assert!(ab <= binomial_tv(n, a, c).unwrap() + binomial_tv(n, c, b).unwrap() + 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        }

        #[test]
        fn node_distance_bounded_by_coupling(seed in 0u64..10_000, n in 2usize..12, alpha in 0.0f64..0.5) {
            let pair = sample_coupled_pair(&CouplingParams::new(n, 0.4, alpha), seed).unwrap();
            prop_assert!(node_distance(&pair.g, &pair.g_prime).unwrap() <= pair.dist);
        }
    }
}
