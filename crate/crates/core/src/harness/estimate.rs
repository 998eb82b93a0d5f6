use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use super::config::{MechanismKind, ModelKind};
use super::rows_csv;
use crate::corruption::{corrupt, CorruptionParams, CorruptionReceipt, Strategy};
use crate::error::{param, Result};
use crate::graph::{sample_er, sample_inhomogeneous, ModelParams, ProbabilityMatrix};
use crate::mechanism::{
    empirical_estimate, laplace_baseline, private_coarse_estimate, private_fine_estimate, robust_estimate, two_stage_estimate,
    EstimateRecord, PrivacyParams, ScoreKind, ScoreParams, Stage,
};
use crate::rng;

pub const ESTIMATES_HEADER: &str = "# nodedp estimates v1";

/// A single estimation run. `epsilon` is the total privacy budget of the run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRequest {
    pub model: ModelKind,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub q_file: Option<PathBuf>,
    pub eta: f64,
    pub adversary: Option<Strategy>,
    pub targeted: bool,
    pub epsilon: f64,
    pub mechanism: MechanismKind,
    pub level: usize,
    pub grid_step: Option<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl EstimateRequest {
    pub fn er(n: usize, p: f64, mechanism: MechanismKind, seed: u64) -> Self {
        Self {
            model: ModelKind::Er,
            n: Some(n),
            p: Some(p),
            q_file: None,
            eta: 0.0,
            adversary: None,
            targeted: false,
            epsilon: 1.0,
            mechanism,
            level: 2,
            grid_step: None,
            seed,
            out: None,
        }
    }
}

#[derive(Serialize)]
struct Row<'a> {
    stage: &'a str,
    estimate: f64,
    density: f64,
    epsilon_spent: f64,
    gamma_at_estimate: Option<f64>,
}

/// Samples a graph, applies the adversary and runs one mechanism. Multi-stage
/// mechanisms return one record per stage, final stage last. With `out` set, writes
/// `estimates.csv`, `receipt.csv` and `metadata.json` there.
pub fn run_estimate(req: &EstimateRequest) -> Result<Vec<EstimateRecord>> {
    if !(0.0..=0.5).contains(&req.eta) {
        return Err(param(format!("eta must lie in [0, 0.5], got {}", req.eta)));
    }
    let q = match req.model {
        ModelKind::Inhomo => {
            let path = req.q_file.as_ref().ok_or_else(|| param("the inhomogeneous model needs --q-file"))?;
            Some(ProbabilityMatrix::from_csv(&fs::read_to_string(path)?)?)
        }
        ModelKind::Er => None,
    };
    let model = match &q {
        Some(q) => ModelParams::from_matrix(q),
        None => {
            let n = req.n.ok_or_else(|| param("the Erdős–Rényi model needs --n"))?;
            ModelParams::er(n, req.p.ok_or_else(|| param("the Erdős–Rényi model needs --p"))?)?
        }
    };
    let g = match &q {
        Some(q) => sample_inhomogeneous(q, rng::derive(req.seed, &[0])),
        None => sample_er(model.n, model.p0, rng::derive(req.seed, &[0]))?,
    };
    let (a, receipt) = match req.adversary {
        Some(s) if req.eta > 0.0 => {
            let mut cp = CorruptionParams::new(req.eta, s, rng::derive(req.seed, &[1]));
            cp.targeted_high_degree = req.targeted;
            corrupt(&g, &cp)?
        }
        _ => (g, CorruptionReceipt::clean(model.n)),
    };

    let seed = rng::derive(req.seed, &[2]);
    let n = model.n as f64;
    let privacy = PrivacyParams { epsilon: req.epsilon, level: req.level, alpha: None, grid_step: req.grid_step };
    let half = PrivacyParams { epsilon: req.epsilon / 2.0, ..privacy };
    let fine_kind = if q.is_some() { ScoreKind::FineInhomo } else { ScoreKind::FineEr };
    let robust = |stage, p: ScoreParams| -> Result<EstimateRecord> {
        let o = robust_estimate(&a, &p.with_level(req.level))?;
        Ok(EstimateRecord { stage, estimate: o.estimate, epsilon_spent: 0.0, gamma_at_estimate: Some(o.gamma) })
    };
    let records = match req.mechanism {
        MechanismKind::Laplace => vec![EstimateRecord {
            stage: Stage::Laplace,
            estimate: laplace_baseline(&a, req.epsilon, seed)? * n,
            epsilon_spent: req.epsilon,
            gamma_at_estimate: None,
        }],
        MechanismKind::Empirical => vec![EstimateRecord {
            stage: Stage::Empirical,
            estimate: empirical_estimate(&a)? * n,
            epsilon_spent: 0.0,
            gamma_at_estimate: None,
        }],
        MechanismKind::Coarse => vec![private_coarse_estimate(&a, req.eta, model.r, &half, seed)?],
        MechanismKind::Fine => vec![private_fine_estimate(&a, model.d0, fine_kind, req.eta, model.r, &half, seed)?],
        MechanismKind::TwoStage => {
            let t = two_stage_estimate(&a, fine_kind, req.eta, model.r, &privacy, seed)?;
            vec![t.coarse, t.fine]
        }
        MechanismKind::RobustCoarse => vec![robust(Stage::RobustCoarse, ScoreParams::new(ScoreKind::Coarse, req.eta, model.r))?],
        MechanismKind::RobustFine => {
            let coarse_r = if fine_kind == ScoreKind::FineEr { 1.0 } else { model.r };
            let coarse = robust(Stage::RobustCoarse, ScoreParams::new(ScoreKind::Coarse, req.eta, coarse_r))?;
            let fine = robust(Stage::RobustFine, ScoreParams::new(fine_kind, req.eta, model.r).with_d_hat(coarse.estimate.max(0.0)))?;
            vec![coarse, fine]
        }
    };

    if let Some(out) = &req.out {
        fs::create_dir_all(out)?;
        let rows: Vec<Row> = records
            .iter()
            .map(|r| Row {
                stage: r.stage.name(),
                estimate: r.estimate,
                density: r.estimate / n,
                epsilon_spent: r.epsilon_spent,
                gamma_at_estimate: r.gamma_at_estimate,
            })
            .collect();
        fs::write(out.join("estimates.csv"), rows_csv(ESTIMATES_HEADER, &rows)?)?;
        fs::write(out.join("receipt.csv"), receipt.to_csv())?;
        let metadata = serde_json::json!({
            "crate_version": env!("CARGO_PKG_VERSION"),
            "request": req,
            "model": model,
            "corrupted_nodes": receipt.corrupted_nodes.len(),
            "stage_epsilon": match req.mechanism {
                MechanismKind::Coarse | MechanismKind::Fine => Some(half.epsilon),
                MechanismKind::TwoStage => Some(req.epsilon / 4.0),
                MechanismKind::Laplace => Some(req.epsilon),
                _ => None,
            },
        });
        fs::write(out.join("metadata.json"), serde_json::to_string_pretty(&metadata)? + "\n")?;
    }
    Ok(records)
}
