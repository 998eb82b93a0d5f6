//! Score functions, exponential-mechanism sampling, and the private and robust
//! density estimators built on them.

mod estimators;
mod exponential;
mod score;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::graph::Graph;
use crate::regularity::{log_inv_eta, DEFAULT_SPECTRAL_C};
use crate::sos::solver::SolveOptions;
use crate::sos::system::{SystemKind, SystemParams, WindowForm};

pub use estimators::{
    empirical_estimate, laplace_baseline, private_coarse_estimate, private_from_profile, private_estimate, private_fine_estimate,
    robust_coarse, robust_estimate, robust_fine, two_stage_estimate, RobustOutcome, TwoStageEstimate,
};
pub use exponential::{exp_mechanism_sample, mechanism_log_weights, mechanism_probabilities};
pub use score::{score_grid, score_profile, score_system, sos_score, sos_score_detailed, ScoreOutcome, ScoreProfile};

/// Which score function to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Coarse,
    FineInhomo,
    FineEr,
}

impl ScoreKind {
    pub fn system(self) -> SystemKind {
        match self {
            Self::Coarse => SystemKind::C,
            Self::FineInhomo => SystemKind::D,
            Self::FineEr => SystemKind::E,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Coarse => "coarse",
            Self::FineInhomo => "fine_inhomo",
            Self::FineEr => "fine_er",
        }
    }
}

/// Parameters of a score function. `sigma`, `delta`, the default `alpha` and the
/// robust-mode `gamma` follow from `kind`, `eta`, `r` and `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreParams {
    pub kind: ScoreKind,
    pub eta: f64,
    pub r: f64,
    /// First-stage estimate, required by the fine kinds.
    pub d_hat: Option<f64>,
    pub spectral_c: f64,
    /// Window width; `None` uses 0.01 for coarse and `n^-2` for the fine kinds.
    pub alpha: Option<f64>,
    pub window: WindowForm,
    pub level: usize,
    pub solve: SolveOptions,
}

impl ScoreParams {
    pub fn new(kind: ScoreKind, eta: f64, r: f64) -> Self {
        Self {
            kind,
            eta,
            r,
            d_hat: None,
            spectral_c: DEFAULT_SPECTRAL_C,
            alpha: None,
            window: WindowForm::Relative,
            level: 2,
            solve: SolveOptions::default(),
        }
    }

    pub fn with_d_hat(mut self, d_hat: f64) -> Self {
        self.d_hat = Some(d_hat);
        self
    }

    pub fn with_level(mut self, level: usize) -> Self {
        self.level = level;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.eta) {
            return Err(param(format!("eta must lie in [0, 0.5], got {}", self.eta)));
        }
        if !(self.r.is_finite() && self.r >= 1.0) {
            return Err(param(format!("R must be finite and at least 1, got {}", self.r)));
        }
        if self.kind != ScoreKind::Coarse {
            match self.d_hat {
                Some(d) if d.is_finite() && d >= 0.0 => {}
                _ => return Err(param(format!("{} score requires a nonnegative d_hat", self.kind.name()))),
            }
        }
        if let Some(a) = self.alpha {
            if !(a.is_finite() && a >= 0.0) {
                return Err(param(format!("alpha must be nonnegative, got {a}")));
            }
        }
        Ok(())
    }

    pub fn sigma(&self, n: usize) -> f64 {
        let l = log_inv_eta(self.eta, n);
        match self.kind {
            ScoreKind::Coarse => 2.0 * l * self.r,
            ScoreKind::FineInhomo => 10.0 * l * self.r,
            ScoreKind::FineEr => 4.0 * ln_n(n),
        }
    }

    pub fn delta(&self, n: usize) -> f64 {
        4.0 * self.spectral_c * ln_n(n).sqrt()
    }

    pub fn alpha(&self, n: usize) -> f64 {
        self.alpha.unwrap_or(match self.kind {
            ScoreKind::Coarse => 0.01,
            _ => 1.0 / (n as f64 * n as f64),
        })
    }

    /// Budget used by the robust (non-private) estimators.
    pub fn robust_gamma(&self) -> f64 {
        match self.kind {
            ScoreKind::FineEr => self.eta,
            _ => (2.0 * self.eta).min(1.0),
        }
    }

    /// Admissible densities: `[0, min(sigma d_hat, n)]` for fine inhomogeneous, `[0, n]` otherwise.
    pub fn range(&self, n: usize) -> (f64, f64) {
        match (self.kind, self.d_hat) {
            (ScoreKind::FineInhomo, Some(d_hat)) => (0.0, (self.sigma(n) * d_hat).min(n as f64)),
            _ => (0.0, n as f64),
        }
    }

    /// System parameters for the regularity part at budget `gamma`, without the window.
    pub fn system_params(&self, a: &Graph, gamma: f64) -> SystemParams {
        let n = a.n();
        let mut p = SystemParams { gamma: Some(gamma), sigma: Some(self.sigma(n)), window: self.window, ..SystemParams::with_graph(a) };
        if self.kind != ScoreKind::Coarse {
            p.d_hat = self.d_hat;
        }
        if self.kind == ScoreKind::FineEr {
            p.delta = Some(self.delta(n));
        }
        p
    }
}

fn ln_n(n: usize) -> f64 {
    (n.max(2) as f64).ln()
}

/// Privacy-side parameters of a mechanism run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub level: usize,
    pub alpha: Option<f64>,
    /// Spacing of candidate densities; `None` means `1/n`.
    pub grid_step: Option<f64>,
}

impl PrivacyParams {
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon, level: 2, alpha: None, grid_step: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(param(format!("epsilon must be finite and nonnegative, got {}", self.epsilon)));
        }
        if let Some(s) = self.grid_step {
            if !(s.is_finite() && s > 0.0) {
                return Err(param(format!("grid_step must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn step(&self, n: usize) -> f64 {
        self.grid_step.unwrap_or(1.0 / n.max(1) as f64)
    }
}

/// Which estimator produced a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Coarse,
    FineEr,
    FineInhomo,
    RobustCoarse,
    RobustFine,
    Laplace,
    Empirical,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Self::Coarse => "coarse",
            Self::FineEr => "fine_er",
            Self::FineInhomo => "fine_inhomo",
            Self::RobustCoarse => "robust_coarse",
            Self::RobustFine => "robust_fine",
            Self::Laplace => "laplace",
            Self::Empirical => "empirical",
        }
    }
}

/// One estimate. `estimate` is an average degree, so the edge density is `estimate / n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub stage: Stage,
    pub estimate: f64,
    pub epsilon_spent: f64,
    pub gamma_at_estimate: Option<f64>,
}
