//! `moc` — command-line front end for the consistency-regularizer toolkit.
//!
//! Every invocation prints exactly one JSON document: the result object on
//! stdout (exit 0), or `{"status":"error","error_kind":…,"message":…}` on
//! stderr (exit 1). `MOC_SEED` overrides any seed given by flag or config.

use std::env;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use moc_core::descriptor::DEFAULT_EPS;
use moc_core::gradcheck::{check_spd_gradients, check_svo_gradients};
use moc_core::harness::check_convergence;
use moc_core::io;
use moc_core::spd::{grad_r_spd, lem_distance_sq, SpdMatrix};
use moc_core::svo::{svo_grad, DEFAULT_MARGIN};

#[derive(Parser)]
#[command(name = "moc", version, about = "Manifold-order consistency toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the view-order ranking penalty on an embedding table
    Svo {
        /// CSV with header azimuth_deg,e_0,…,e_{D-1}
        #[arg(long)]
        embeddings: PathBuf,
        /// Hinge margin on consecutive similarity drops
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        delta: f64,
        /// Include per-embedding gradients in the report
        #[arg(long)]
        grad: bool,
    },
    /// Squared log-Euclidean distance between two SPD matrices
    Spd {
        /// Headerless square CSV, the moving matrix
        #[arg(long)]
        current: PathBuf,
        /// Headerless square CSV, the fixed target
        #[arg(long)]
        target: PathBuf,
        /// Tikhonov shift added inside the matrix logarithms
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        /// Include the gradient with respect to the moving matrix
        #[arg(long)]
        grad: bool,
    },
    /// Build the extended SPD descriptor from a feature-map stack directory
    Descriptor {
        /// Directory holding stack.json and view_<azimuth>.csv files
        #[arg(long)]
        stack: PathBuf,
        /// Patch side for sample pooling
        #[arg(long, default_value_t = 4)]
        patch: usize,
        /// Tikhonov shift added to the pooled covariance
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        /// Write the descriptor matrix as headerless CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify analytic gradients against central finite differences
    Gradcheck {
        /// Which sweep to run: spd, svo, or all
        #[arg(long, default_value = "all")]
        target: String,
        /// Number of random instances per sweep
        #[arg(long, default_value_t = 50)]
        instances: usize,
        /// Generator seed (MOC_SEED overrides)
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the synthetic optimization harness from a JSON config
    Optimize {
        /// Harness configuration file
        #[arg(long)]
        config: PathBuf,
        /// Where to write the per-iteration trace CSV
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Override the config seed (MOC_SEED overrides both)
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum CliError {
    Core(moc_core::Error),
    Usage(String),
}

impl From<moc_core::Error> for CliError {
    fn from(e: moc_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Usage(_) => "UsageError",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Usage(m) => m.clone(),
        }
    }
}

/// Seed priority: MOC_SEED environment variable, then the explicit source.
fn resolve_seed(explicit: u64) -> Result<u64, CliError> {
    match env::var("MOC_SEED") {
        Ok(raw) => raw.trim().parse().map_err(|_| {
            CliError::Usage(format!("MOC_SEED must be an unsigned integer, got {raw:?}"))
        }),
        Err(_) => Ok(explicit),
    }
}

fn vector_rows(m: &moc_core::nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    match cli.command {
        Command::Svo { embeddings, delta, grad } => {
            let seq = io::read_embeddings_csv(&embeddings)?;
            let g = svo_grad(&seq, delta)?;
            let mut out = json!({
                "status": "ok",
                "command": "svo",
                "k": seq.len_k(),
                "dim": seq.dim(),
                "delta": delta,
                "loss": g.result.loss,
                "min_gap": g.result.min_gap(),
                "azimuths": seq.azimuths(),
                "sims": g.result.sims,
                "active": g.result.active,
            });
            if grad {
                let rows: Vec<Vec<f64>> =
                    g.grads.iter().map(|v| v.iter().copied().collect()).collect();
                out["grads"] = json!(rows);
            }
            Ok(out)
        }
        Command::Spd { current, target, eps, grad } => {
            let c = SpdMatrix::new(io::read_matrix_csv(&current)?)?;
            let t = SpdMatrix::new(io::read_matrix_csv(&target)?)?;
            let d2 = lem_distance_sq(&c, &t, eps)?;
            let mut out = json!({
                "status": "ok",
                "command": "spd",
                "dim": c.dim(),
                "eps": eps,
                "distance_sq": d2,
                "distance": d2.sqrt(),
            });
            if grad {
                let g = grad_r_spd(&c, &t, eps)?;
                out["grad"] = json!(vector_rows(g.matrix()));
            }
            Ok(out)
        }
        Command::Descriptor { stack, patch, eps, out } => {
            let maps = io::read_feature_stack(&stack)?;
            let weights = moc_core::descriptor::LuminanceWeights::default();
            let desc = moc_core::descriptor::build_descriptor(&maps, &weights, patch, eps)?;
            let (det_c, det_sigma_reg) = desc.schur_det_pair();
            let mut report = json!({
                "status": "ok",
                "command": "descriptor",
                "views": maps.views().len(),
                "dim_d": desc.dim_d(),
                "dim": desc.dim_d() + 1,
                "eps_used": desc.eps_used(),
                "min_eigval": desc.spd().factorization().min_eigval(),
                "det_c": det_c,
                "det_sigma_reg": det_sigma_reg,
            });
            if let Some(path) = out {
                io::write_matrix_csv(&path, desc.spd().matrix())?;
                report["out"] = json!(path.display().to_string());
            }
            Ok(report)
        }
        Command::Gradcheck { target, instances, seed } => {
            let seed = resolve_seed(seed)?;
            let reports = match target.as_str() {
                "spd" => vec![check_spd_gradients(seed, instances)?],
                "svo" => vec![check_svo_gradients(seed, instances)?],
                "all" => vec![
                    check_spd_gradients(seed, instances)?,
                    check_svo_gradients(seed, instances)?,
                ],
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown gradcheck target {other:?}; expected spd, svo, or all"
                    )))
                }
            };
            let passed = reports.iter().all(|r| r.passed);
            Ok(json!({
                "status": "ok",
                "command": "gradcheck",
                "reports": reports,
                "passed": passed,
            }))
        }
        Command::Optimize { config, trace, seed } => {
            let mut cfg = io::load_harness_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.seed = resolve_seed(cfg.seed)?;
            let (_, run) = moc_core::harness::run_harness(&cfg)?;
            let report = check_convergence(&run, DEFAULT_MARGIN)?;
            let last = run.last().expect("trace always has rows");
            let mut out = json!({
                "status": "ok",
                "command": "optimize",
                "seed": cfg.seed,
                "iterations": cfg.iterations(),
                "trace_rows": run.rows.len(),
                "converged": report.svo_satisfied,
                "final": {
                    "iter": last.iter,
                    "total": last.total,
                    "r_svo": last.r_svo,
                    "r_spd": last.r_spd,
                    "lambda_svo": last.lambda_svo,
                    "lambda_spd": last.lambda_spd,
                    "min_gap": last.min_gap,
                    "lem_dist": last.lem_dist,
                },
            });
            if let Some(path) = trace {
                io::write_trace_csv(&path, &run)?;
                out["trace_path"] = json!(path.display().to_string());
            }
            Ok(out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(value) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("report serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let doc = json!({
                "status": "error",
                "error_kind": e.kind(),
                "message": e.message(),
            });
            eprintln!("{}", serde_json::to_string_pretty(&doc).expect("report serializes"));
            ExitCode::FAILURE
        }
    }
}
