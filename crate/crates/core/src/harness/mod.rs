//! Seeded experiment sweeps: trial execution, aggregation and CSV persistence.
//!
//! Output layout of [`run_experiment`]:
//!
//! ```text
//! <output_dir>/
//!   cells/cell_0000.csv     trial rows of one cell
//!   cells/timing_0000.csv   wall-clock times of that cell
//!   manifest.txt            indices of completed cells, one per line
//!   trials.csv              all trial rows, cell-major
//!   summary.csv             one row per cell
//!   timings.csv             per-trial wall-clock times
//!   metadata.json           resolved configuration
//! ```
//!
//! Wall-clock times live only in the timing files so every other file is a pure
//! function of the configuration.

mod config;
mod estimate;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corruption::{corrupt, CorruptionParams, CorruptionReceipt, Strategy};
use crate::error::{Error, Result};
use crate::graph::{sample_er, sample_inhomogeneous, Graph, ProbabilityMatrix};
use crate::mechanism::{
    empirical_estimate, laplace_baseline, private_coarse_estimate, private_fine_estimate, robust_estimate, two_stage_estimate, PrivacyParams,
    ScoreKind, ScoreParams,
};
use crate::rng;
use crate::stats::{mean, median, quantile};

pub use config::{Cell, ExperimentConfig, MechanismKind, MechanismSection, ModelKind, ModelSection, SweepSection};
pub use estimate::{run_estimate, EstimateRequest};

pub const TRIALS_HEADER: &str = "# nodedp trials v1";
pub const SUMMARY_HEADER: &str = "# nodedp summary v1";
pub const TIMINGS_HEADER: &str = "# nodedp timings v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Error,
}

/// One trial of one cell. `estimate` is in degree units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub mechanism: MechanismKind,
    pub adversary: String,
    pub n: usize,
    pub p0: f64,
    pub d0: f64,
    pub r: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub level: usize,
    pub corrupted: usize,
    pub status: TrialStatus,
    pub estimate: Option<f64>,
    pub relative_error: Option<f64>,
    pub gamma_at_estimate: Option<f64>,
    pub epsilon_spent: Option<f64>,
    pub solver_iterations: Option<usize>,
    pub solver_residual: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_ms: f64,
}

/// Per-cell aggregate over the trials that succeeded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cell: usize,
    pub mechanism: MechanismKind,
    pub adversary: String,
    pub n: usize,
    pub p0: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub level: usize,
    pub count: usize,
    pub errors: usize,
    pub median_relative_error: Option<f64>,
    pub p90_relative_error: Option<f64>,
    pub mean_estimate: Option<f64>,
    #[serde(skip)]
    pub mean_wall_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct TimingRow {
    cell: usize,
    trial: usize,
    wall_ms: f64,
}

/// Groups records by cell (ascending) and summarises each group.
pub fn aggregate(records: &[RunRecord]) -> Vec<SummaryRow> {
    let cells: BTreeSet<usize> = records.iter().map(|r| r.cell).collect();
    cells
        .into_iter()
        .map(|cell| {
            let group: Vec<&RunRecord> = records.iter().filter(|r| r.cell == cell).collect();
            let first = group[0];
            let errs: Vec<f64> = group.iter().filter_map(|r| r.relative_error).collect();
            let ests: Vec<f64> = group.iter().filter_map(|r| r.estimate).collect();
            let walls: Vec<f64> = group.iter().map(|r| r.wall_ms).collect();
            SummaryRow {
                cell,
                mechanism: first.mechanism,
                adversary: first.adversary.clone(),
                n: first.n,
                p0: first.p0,
                epsilon: first.epsilon,
                eta: first.eta,
                level: first.level,
                count: group.len(),
                errors: group.iter().filter(|r| r.status == TrialStatus::Error).count(),
                median_relative_error: median(&errs),
                p90_relative_error: quantile(&errs, 0.9),
                mean_estimate: mean(&ests),
                mean_wall_ms: mean(&walls).unwrap_or(0.0),
            }
        })
        .collect()
}

/// What a finished (or partially finished) run produced.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub cells_total: usize,
    pub cells_run: usize,
    pub cells_resumed: usize,
    pub failed_trials: usize,
}

impl RunReport {
    pub fn is_complete(&self) -> bool {
        self.cells_run + self.cells_resumed == self.cells_total
    }

    /// Process exit code: 0 on success, 3 when any trial failed or cells are missing.
    pub fn exit_code(&self) -> i32 {
        if self.failed_trials == 0 && self.is_complete() {
            0
        } else {
            3
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Skip cells listed in the manifest of a previous run.
    pub resume: bool,
    /// Stop after this many newly executed cells.
    pub max_cells: Option<usize>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_experiment_with(cfg, RunOptions::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunReport> {
    cfg.validate()?;
    let cells = cfg.cells()?;
    let strategy = cfg.strategy()?;
    let q = cfg.q_matrix()?;
    let out = &cfg.output_dir;
    let cell_dir = out.join("cells");
    if !opts.resume && cell_dir.exists() {
        fs::remove_dir_all(&cell_dir)?;
    }
    fs::create_dir_all(&cell_dir)?;

    let manifest_path = out.join("manifest.txt");
    let mut done = BTreeSet::new();
    if opts.resume {
        if let Ok(text) = fs::read_to_string(&manifest_path) {
            done.extend(text.lines().filter_map(|l| l.trim().parse::<usize>().ok()));
        }
    } else {
        fs::write(&manifest_path, "")?;
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build().map_err(|e| Error::Parameter(e.to_string()))?;
    let ctx = TrialContext { cfg, strategy, q: q.as_ref() };

    let mut cells_run = 0;
    let mut cells_resumed = 0;
    for cell in &cells {
        if done.contains(&cell.index) {
            cells_resumed += 1;
            continue;
        }
        if opts.max_cells.is_some_and(|m| cells_run >= m) {
            continue;
        }
        let records: Vec<RunRecord> = pool.install(|| (0..cfg.trials).into_par_iter().map(|t| ctx.run_trial(cell, t)).collect());
        fs::write(cell_dir.join(format!("cell_{:04}.csv", cell.index)), records_csv(&records)?)?;
        let timings: Vec<TimingRow> = records.iter().map(|r| TimingRow { cell: r.cell, trial: r.trial, wall_ms: r.wall_ms }).collect();
        fs::write(cell_dir.join(format!("timing_{:04}.csv", cell.index)), rows_csv(TIMINGS_HEADER, &timings)?)?;
        let mut manifest = fs::OpenOptions::new().append(true).create(true).open(&manifest_path)?;
        writeln!(manifest, "{}", cell.index)?;
        cells_run += 1;
    }

    // assemble from the cell files so resumed and fresh runs go through the same path
    let mut records = Vec::new();
    let mut timings = Vec::new();
    let mut present = Vec::new();
    for cell in &cells {
        let path = cell_dir.join(format!("cell_{:04}.csv", cell.index));
        if !path.exists() {
            continue;
        }
        let mut rows: Vec<RunRecord> = read_rows(&path)?;
        let times: Vec<TimingRow> = read_rows(&cell_dir.join(format!("timing_{:04}.csv", cell.index))).unwrap_or_default();
        for (r, t) in rows.iter_mut().zip(&times) {
            r.wall_ms = t.wall_ms;
        }
        timings.extend(times);
        records.extend(rows);
        present.push(cell.index);
    }
    let summary = aggregate(&records);
    fs::write(out.join("trials.csv"), records_csv(&records)?)?;
    fs::write(out.join("summary.csv"), rows_csv(SUMMARY_HEADER, &summary)?)?;
    fs::write(out.join("timings.csv"), rows_csv(TIMINGS_HEADER, &timings)?)?;
    let metadata = serde_json::json!({
        "crate_version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "cells_total": cells.len(),
        "cells_present": present,
    });
    fs::write(out.join("metadata.json"), serde_json::to_string_pretty(&metadata)? + "\n")?;

    let failed_trials = records.iter().filter(|r| r.status == TrialStatus::Error).count();
    Ok(RunReport { output_dir: out.clone(), records, summary, cells_total: cells.len(), cells_run, cells_resumed, failed_trials })
}

struct TrialContext<'a> {
    cfg: &'a ExperimentConfig,
    strategy: Option<Strategy>,
    q: Option<&'a ProbabilityMatrix>,
}

/// Result of one estimator call, in degree units.
struct Outcome {
    estimate: f64,
    gamma: Option<f64>,
    epsilon_spent: f64,
    iterations: Option<usize>,
    residual: Option<f64>,
}

impl TrialContext<'_> {
    fn run_trial(&self, cell: &Cell, trial: usize) -> RunRecord {
        let seed = rng::derive(self.cfg.seed_base, &[cell.index as u64, trial as u64]);
        let start = Instant::now();
        let (corrupted, result) = match self.observe(cell, seed) {
            Ok((g, receipt)) => (receipt.corrupted_nodes.len(), self.estimate(cell, &g, rng::derive(seed, &[2]))),
            Err(e) => (0, Err(e)),
        };
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let m = &cell.model;
        let mut rec = RunRecord {
            cell: cell.index,
            trial,
            seed,
            mechanism: cell.mechanism,
            adversary: self.cfg.adversary.clone(),
            n: m.n,
            p0: m.p0,
            d0: m.d0,
            r: m.r,
            epsilon: cell.epsilon,
            eta: cell.eta,
            level: cell.level,
            corrupted,
            status: TrialStatus::Ok,
            estimate: None,
            relative_error: None,
            gamma_at_estimate: None,
            epsilon_spent: None,
            solver_iterations: None,
            solver_residual: None,
            error: None,
            wall_ms,
        };
        match result {
            Ok(o) => {
                rec.estimate = Some(o.estimate);
                rec.relative_error = Some(relative_error(o.estimate, m.d0));
                rec.gamma_at_estimate = o.gamma;
                rec.epsilon_spent = Some(o.epsilon_spent);
                rec.solver_iterations = o.iterations;
                rec.solver_residual = o.residual;
            }
            Err(e) => {
                rec.status = TrialStatus::Error;
                rec.error = Some(e.to_string());
            }
        }
        rec
    }

    /// Samples the clean graph and applies the adversary.
    fn observe(&self, cell: &Cell, seed: u64) -> Result<(Graph, CorruptionReceipt)> {
        let n = cell.model.n;
        let g = match self.q {
            Some(q) => sample_inhomogeneous(q, rng::derive(seed, &[0])),
            None => sample_er(n, cell.model.p0, rng::derive(seed, &[0]))?,
        };
        match self.strategy {
            Some(s) if cell.eta > 0.0 => {
                let mut params = CorruptionParams::new(cell.eta, s, rng::derive(seed, &[1]));
                params.targeted_high_degree = self.cfg.targeted;
                corrupt(&g, &params)
            }
            _ => Ok((g, CorruptionReceipt::clean(n))),
        }
    }

    fn estimate(&self, cell: &Cell, a: &Graph, seed: u64) -> Result<Outcome> {
        let m = &cell.model;
        let privacy = PrivacyParams {
            epsilon: cell.epsilon,
            level: cell.level,
            alpha: self.cfg.mechanism.alpha,
            grid_step: self.cfg.mechanism.grid_step,
        };
        let fine_kind = if self.q.is_some() { ScoreKind::FineInhomo } else { ScoreKind::FineEr };
        let score = |kind| {
            let mut p = ScoreParams::new(kind, cell.eta, m.r).with_level(cell.level);
            if let Some(c) = self.cfg.mechanism.spectral_c {
                p.spectral_c = c;
            }
            p
        };
        dispatch(cell.mechanism, a, m.d0, cell.eta, m.r, fine_kind, &privacy, score, seed)
    }
}

/// Runs one mechanism. `epsilon` in `privacy` is the total budget: the single-stage private
/// mechanisms run at `epsilon / 2` because each charges twice its parameter.
#[allow(clippy::too_many_arguments)]
fn dispatch(
    mechanism: MechanismKind,
    a: &Graph,
    d0: f64,
    eta: f64,
    r: f64,
    fine_kind: ScoreKind,
    privacy: &PrivacyParams,
    score: impl Fn(ScoreKind) -> ScoreParams,
    seed: u64,
) -> Result<Outcome> {
    let n = a.n() as f64;
    let half = PrivacyParams { epsilon: privacy.epsilon / 2.0, ..*privacy };
    let plain = |estimate, epsilon_spent| Outcome { estimate, gamma: None, epsilon_spent, iterations: None, residual: None };
    let private = |rec: crate::mechanism::EstimateRecord| Outcome {
        estimate: rec.estimate,
        gamma: rec.gamma_at_estimate,
        epsilon_spent: rec.epsilon_spent,
        iterations: None,
        residual: None,
    };
    match mechanism {
        MechanismKind::Laplace => Ok(plain(laplace_baseline(a, privacy.epsilon, seed)? * n, privacy.epsilon)),
        MechanismKind::Empirical => Ok(plain(empirical_estimate(a)? * n, 0.0)),
        MechanismKind::Coarse => private_coarse_estimate(a, eta, r, &half, seed).map(private),
        MechanismKind::Fine => private_fine_estimate(a, d0, fine_kind, eta, r, &half, seed).map(private),
        MechanismKind::TwoStage => {
            let t = two_stage_estimate(a, fine_kind, eta, r, privacy, seed)?;
            Ok(Outcome { epsilon_spent: t.epsilon_spent(), ..private(t.fine) })
        }
        MechanismKind::RobustCoarse => {
            let o = robust_estimate(a, &score(ScoreKind::Coarse))?;
            Ok(Outcome { estimate: o.estimate, gamma: Some(o.gamma), epsilon_spent: 0.0, iterations: Some(o.iterations), residual: Some(o.residual) })
        }
        MechanismKind::RobustFine => {
            let coarse = if fine_kind == ScoreKind::FineEr { ScoreParams { r: 1.0, ..score(ScoreKind::Coarse) } } else { score(ScoreKind::Coarse) };
            let d_hat = robust_estimate(a, &coarse)?.estimate.max(0.0);
            let o = robust_estimate(a, &score(fine_kind).with_d_hat(d_hat))?;
            Ok(Outcome { estimate: o.estimate, gamma: Some(o.gamma), epsilon_spent: 0.0, iterations: Some(o.iterations), residual: Some(o.residual) })
        }
    }
}

/// `|est / d0 - 1|`; equal to the density-scale error since both sides share the factor `n`.
pub fn relative_error(estimate: f64, d0: f64) -> f64 {
    if d0 == 0.0 {
        if estimate == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (estimate / d0 - 1.0).abs()
    }
}

fn records_csv(records: &[RunRecord]) -> Result<String> {
    rows_csv(TRIALS_HEADER, records)
}

/// CSV with a leading version comment line.
fn rows_csv<T: Serialize>(header: &str, rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv output is utf-8");
    Ok(format!("{header}\n{body}"))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Reads a `trials.csv` or cell file back into records (wall times are zero).
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    read_rows(path)
}
