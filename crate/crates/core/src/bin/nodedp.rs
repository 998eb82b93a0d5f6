use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nodedp::corruption::Strategy;
use nodedp::graph::sample_er;
use nodedp::harness::{run_estimate, run_experiment_with, EstimateRequest, ExperimentConfig, MechanismKind, ModelKind, RunOptions};
use nodedp::lower_bounds::{coupling_sweep, privacy_inhomo_sweep, robust_inhomo_sweep, to_csv};
use nodedp::mechanism::{empirical_estimate, laplace_baseline, score_system, ScoreKind, ScoreParams};
use nodedp::sos::{export_sdpa, relax};
use nodedp::{rng, Error, Result};

#[derive(Parser)]
#[command(name = "nodedp", version, about = "Node-private and robust edge-density estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one graph, optionally corrupt it, and run one estimator.
    Estimate(EstimateArgs),
    /// Lower-bound simulation sweeps, written as CSV.
    Lowerbound(LowerboundArgs),
    /// Run an experiment sweep from a TOML config.
    Run(RunArgs),
    /// Write the relaxation of one score feasibility problem in SDPA sparse format.
    ExportSdpa(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Er,
    Inhomo,
}

#[derive(clap::Args)]
struct EstimateArgs {
    #[arg(long, value_enum, default_value = "er")]
    model: Model,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// CSV of `i,j,q` entries for the inhomogeneous model.
    #[arg(long)]
    q_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// random_rewire, degree_boost, degree_delete, planted_dense_rows, or none.
    #[arg(long, default_value = "none")]
    adversary: String,
    /// Corrupt the highest-degree nodes instead of uniform ones.
    #[arg(long)]
    targeted: bool,
    /// Total privacy budget.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// coarse, fine, two-stage, robust, robust-coarse, laplace or empirical.
    #[arg(long, default_value = "two-stage")]
    mechanism: String,
    #[arg(long, default_value_t = 2)]
    level: usize,
    /// Candidate spacing for the exponential mechanism (default 1/n).
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LbKind {
    Coupling,
    RobustInhomo,
    PrivacyInhomo,
}

#[derive(clap::Args)]
struct LowerboundArgs {
    #[arg(long, value_enum)]
    kind: LbKind,
    #[arg(long, value_delimiter = ',', default_value = "40,80,160")]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    p: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05")]
    alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1")]
    eta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    r: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1")]
    epsilon: Vec<f64>,
    /// Density estimator tested by privacy-inhomo: laplace or empirical.
    #[arg(long, default_value = "laplace")]
    mechanism: String,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed_base: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Skip cells already listed in the output manifest.
    #[arg(long)]
    resume: bool,
    /// Stop after this many newly executed cells.
    #[arg(long)]
    max_cells: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Coarse,
    FineInhomo,
    FineEr,
}

#[derive(clap::Args)]
struct ExportArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "coarse")]
    kind: Kind,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// Candidate average degree.
    #[arg(long)]
    d: f64,
    /// Budget numerator: the system uses gamma = k / n.
    #[arg(long, default_value_t = 0)]
    k: usize,
    /// First-stage estimate for the fine kinds.
    #[arg(long)]
    d_hat: Option<f64>,
    #[arg(long, default_value_t = 2)]
    level: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn estimate(args: EstimateArgs) -> Result<ExitCode> {
    let adversary = match args.adversary.as_str() {
        "none" => None,
        s => Some(s.parse::<Strategy>()?),
    };
    let req = EstimateRequest {
        model: match args.model {
            Model::Er => ModelKind::Er,
            Model::Inhomo => ModelKind::Inhomo,
        },
        n: args.n,
        p: args.p,
        q_file: args.q_file,
        eta: args.eta,
        adversary,
        targeted: args.targeted,
        epsilon: args.epsilon,
        mechanism: args.mechanism.parse::<MechanismKind>()?,
        level: args.level,
        grid_step: args.grid_step,
        seed: args.seed,
        out: args.out,
    };
    for r in run_estimate(&req)? {
        println!("{}\t{:.6}\tepsilon_spent={}", r.stage.name(), r.estimate, r.epsilon_spent);
    }
    Ok(ExitCode::SUCCESS)
}

fn lowerbound(args: LowerboundArgs) -> Result<ExitCode> {
    let csv = match args.kind {
        LbKind::Coupling => to_csv(&coupling_sweep(&args.n, &args.p, &args.alpha, args.trials, args.seed)?)?,
        LbKind::RobustInhomo => to_csv(&robust_inhomo_sweep(args.n[0], &args.p, &args.eta, &args.r, args.trials, args.seed)?)?,
        LbKind::PrivacyInhomo => {
            let mech: Box<dyn Fn(&nodedp::Graph, f64, u64) -> f64 + Sync> = match args.mechanism.as_str() {
                "laplace" => Box::new(|g, eps, seed| laplace_baseline(g, eps, seed).unwrap_or(f64::NAN)),
                "empirical" => Box::new(|g, _, _| empirical_estimate(g).unwrap_or(f64::NAN)),
                other => return Err(Error::Parameter(format!("privacy-inhomo supports laplace or empirical, got `{other}`"))),
            };
            to_csv(&privacy_inhomo_sweep(&*mech, args.n[0], args.p[0], &args.eta, args.r[0], &args.epsilon, args.trials, args.seed)?)?
        }
    };
    emit(args.out.as_ref(), &csv)?;
    Ok(ExitCode::SUCCESS)
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed_base {
        cfg.seed_base = s;
    }
    if let Some(d) = args.output_dir {
        cfg.output_dir = d;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    let report = run_experiment_with(&cfg, RunOptions { resume: args.resume, max_cells: args.max_cells })?;
    println!(
        "{} of {} cells present ({} run, {} resumed), {} failed trials -> {}",
        report.cells_run + report.cells_resumed,
        report.cells_total,
        report.cells_run,
        report.cells_resumed,
        report.failed_trials,
        report.output_dir.display()
    );
    Ok(ExitCode::from(report.exit_code() as u8))
}

fn export(args: ExportArgs) -> Result<ExitCode> {
    let a = sample_er(args.n, args.p, rng::derive(args.seed, &[0]))?;
    let kind = match args.kind {
        Kind::Coarse => ScoreKind::Coarse,
        Kind::FineInhomo => ScoreKind::FineInhomo,
        Kind::FineEr => ScoreKind::FineEr,
    };
    let mut params = ScoreParams::new(kind, args.eta, 1.0);
    if let Some(d) = args.d_hat {
        params = params.with_d_hat(d);
    }
    params.validate()?;
    let problem = relax(&score_system(&a, &params, args.d, args.k)?, args.level)?;
    emit(args.out.as_ref(), &export_sdpa(&problem))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Lowerbound(a) => lowerbound(a),
        Command::Run(a) => run(a),
        Command::ExportSdpa(a) => export(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        match e {
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Estimation(_) | Error::AllUndecided => ExitCode::from(1),
            _ => ExitCode::from(2),
        }
    })
}
