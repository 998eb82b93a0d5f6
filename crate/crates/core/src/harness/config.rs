use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corruption::Strategy;
use crate::error::{Error, Result};
use crate::graph::{ModelParams, ProbabilityMatrix};

/// Estimators the harness can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    Laplace,
    Empirical,
    Coarse,
    /// Private fine stage alone, with `d_hat` set to the model's `d0`.
    Fine,
    TwoStage,
    RobustCoarse,
    RobustFine,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 7] =
        [Self::Laplace, Self::Empirical, Self::Coarse, Self::Fine, Self::TwoStage, Self::RobustCoarse, Self::RobustFine];

    pub fn name(self) -> &'static str {
        match self {
            Self::Laplace => "laplace",
            Self::Empirical => "empirical",
            Self::Coarse => "coarse",
            Self::Fine => "fine",
            Self::TwoStage => "two_stage",
            Self::RobustCoarse => "robust_coarse",
            Self::RobustFine => "robust_fine",
        }
    }

    pub fn is_private(self) -> bool {
        matches!(self, Self::Laplace | Self::Coarse | Self::Fine | Self::TwoStage)
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        if key == "robust" {
            return Ok(Self::RobustFine);
        }
        Self::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::Parameter(format!("unknown mechanism `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Er,
    Inhomo,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default)]
    pub kind: ModelKind,
    /// CSV `i,j,q` file for the inhomogeneous model, relative to the config file.
    pub q_file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub p: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub eta: Vec<f64>,
    #[serde(default = "default_levels")]
    pub level: Vec<usize>,
}

fn default_levels() -> Vec<usize> {
    vec![2]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSection {
    /// Candidate spacing for the exponential mechanism; default `1/n`.
    pub grid_step: Option<f64>,
    /// Score window width; default per score kind.
    pub alpha: Option<f64>,
    /// Spectral constant in `delta = 4 C sqrt(log n)`.
    pub spectral_c: Option<f64>,
}

/// Experiment configuration, read from TOML.
///
/// ```toml
/// seed_base = 7
/// trials = 20
/// output_dir = "out/eps-sweep"
/// mechanisms = ["laplace", "empirical"]
/// adversary = "degree_boost"        # or "none"
///
/// [model]
/// kind = "er"                       # or "inhomo" with q_file = "q.csv"
///
/// [sweep]
/// n = [500]
/// p = [0.1]
/// epsilon = [0.5, 1.0, 2.0]
/// eta = [0.0]
/// level = [2]
///
/// [mechanism]
/// grid_step = 0.25
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed_base: u64,
    pub trials: usize,
    pub output_dir: PathBuf,
    pub mechanisms: Vec<MechanismKind>,
    #[serde(default = "default_adversary")]
    pub adversary: String,
    /// Pick the highest-degree nodes to corrupt instead of uniform ones.
    #[serde(default)]
    pub targeted: bool,
    /// Worker threads; 0 uses the rayon default.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub model: ModelSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub mechanism: MechanismSection,
}

fn default_adversary() -> String {
    "none".into()
}

fn config_err(path: &str, msg: impl Into<String>) -> Error {
    Error::Config { path: path.into(), msg: msg.into() }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let path = e.span().map(|s| format!("bytes {}..{}", s.start, s.end)).unwrap_or_else(|| "<root>".into());
            config_err(&path, e.message())
        })?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `q_file` is resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(q), Some(dir)) = (cfg.model.q_file.as_mut(), path.parent()) {
            if q.is_relative() {
                *q = dir.join(&*q);
            }
        }
        Ok(cfg)
    }

    pub fn strategy(&self) -> Result<Option<Strategy>> {
        match self.adversary.as_str() {
            "none" => Ok(None),
            s => s.parse().map(Some).map_err(|_| config_err("adversary", format!("unknown adversary `{s}`"))),
        }
    }

    /// Loads the probability matrix of an inhomogeneous model.
    pub fn q_matrix(&self) -> Result<Option<ProbabilityMatrix>> {
        match (self.model.kind, &self.model.q_file) {
            (ModelKind::Er, _) => Ok(None),
            (ModelKind::Inhomo, None) => Err(config_err("model.q_file", "the inhomogeneous model needs a q_file")),
            (ModelKind::Inhomo, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_err("model.q_file", format!("{}: {e}", path.display())))?;
                ProbabilityMatrix::from_csv(&text).map(Some).map_err(|e| config_err("model.q_file", e.to_string()))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_err("trials", "must be at least 1"));
        }
        if self.mechanisms.is_empty() {
            return Err(config_err("mechanisms", "must be nonempty"));
        }
        let s = &self.sweep;
        if self.model.kind == ModelKind::Er {
            if s.n.is_empty() {
                return Err(config_err("sweep.n", "must be nonempty"));
            }
            if s.p.is_empty() {
                return Err(config_err("sweep.p", "must be nonempty"));
            }
        }
        if let Some(&n) = s.n.iter().find(|&&n| n < 2) {
            return Err(config_err("sweep.n", format!("every n must be at least 2, got {n}")));
        }
        if let Some(&p) = s.p.iter().find(|&&p| !(0.0..=1.0).contains(&p)) {
            return Err(config_err("sweep.p", format!("every p must lie in [0, 1], got {p}")));
        }
        if s.epsilon.is_empty() {
            return Err(config_err("sweep.epsilon", "must be nonempty"));
        }
        if let Some(&e) = s.epsilon.iter().find(|&&e| !(e.is_finite() && e > 0.0)) {
            return Err(config_err("sweep.epsilon", format!("every epsilon must be positive, got {e}")));
        }
        if s.eta.is_empty() {
            return Err(config_err("sweep.eta", "must be nonempty"));
        }
        if let Some(&e) = s.eta.iter().find(|&&e| !(0.0..=0.5).contains(&e)) {
            return Err(config_err("sweep.eta", format!("every eta must lie in [0, 0.5], got {e}")));
        }
        if s.level.is_empty() {
            return Err(config_err("sweep.level", "must be nonempty"));
        }
        if let Some(&l) = s.level.iter().find(|&&l| l < 2 || l % 2 == 1) {
            return Err(config_err("sweep.level", format!("levels must be even and at least 2, got {l}")));
        }
        if let Some(step) = self.mechanism.grid_step {
            if !(step.is_finite() && step > 0.0) {
                return Err(config_err("mechanism.grid_step", "must be positive"));
            }
        }
        self.strategy()?;
        self.q_matrix()?;
        Ok(())
    }

    /// Sweep cells in a fixed order: model size/density, then epsilon, eta, level, mechanism.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let models: Vec<ModelParams> = match self.q_matrix()? {
            Some(q) => vec![ModelParams::from_matrix(&q)],
            None => {
                let mut out = Vec::new();
                for &n in &self.sweep.n {
                    for &p in &self.sweep.p {
                        out.push(ModelParams::er(n, p)?);
                    }
                }
                out
            }
        };
        let mut cells = Vec::new();
        for model in models {
            for &epsilon in &self.sweep.epsilon {
                for &eta in &self.sweep.eta {
                    for &level in &self.sweep.level {
                        for &mechanism in &self.mechanisms {
                            cells.push(Cell { index: cells.len(), model, epsilon, eta, level, mechanism });
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

/// One point of the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub index: usize,
    pub model: ModelParams,
    pub epsilon: f64,
    pub eta: f64,
    pub level: usize,
    pub mechanism: MechanismKind,
}
