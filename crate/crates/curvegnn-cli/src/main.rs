//! `curvegnn`: curvature computation, depth assignment, depth-adaptive GNN
//! training, heat-flow checks, and diffusion simulation from the shell.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure. Every run
//! writes a manifest (config echo + SHA-256 of each input) next to its output.

mod commands;
mod config;
mod errors;
mod manifest;
mod table;

use clap::{Parser, Subcommand};

use crate::commands::*;
use crate::errors::CliResult;

#[derive(Parser)]
#[command(
    name = "curvegnn",
    version,
    about = "Curvature-driven depth-adaptive graph learning"
)]
struct Cli {
    /// Worker threads for parallel sections (fallback: CURVEGNN_WORKERS).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-vertex curvature (exact oracle or learned estimator).
    #[command(subcommand)]
    Curvature(CurvatureCmd),
    /// Stopping depths from curvature ranks and a threshold percent.
    DepthAssign(DepthAssignArgs),
    /// Train a depth-adaptive GNN with the joint task + curvature loss.
    Train(TrainArgs),
    /// Heat-semigroup evolution of a vertex function.
    Heatflow(HeatflowArgs),
    /// Local mixing time against the curvature bound.
    Mixing(MixingArgs),
    /// IC/LT diffusion simulators.
    #[command(subcommand)]
    Diffusion(DiffusionCmd),
    /// Operator fields (Laplacian, local variation, convexity) as CSV.
    #[command(subcommand)]
    Ops(OpsCmd),
    /// Summarize a run directory (or a sweep of run directories).
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum CurvatureCmd {
    /// Exact curvature via the local eigenvalue pencil.
    Exact(CurvatureExactArgs),
    /// Learned curvature via the function-family estimator.
    Learn(CurvatureLearnArgs),
}

#[derive(Subcommand)]
enum DiffusionCmd {
    /// Monte Carlo activation probabilities under IC or LT.
    Simulate(DiffusionSimulateArgs),
}

#[derive(Subcommand)]
enum OpsCmd {
    /// Evaluate Δf, Γ(f,f), Γ₂(f,f) for a function file.
    Eval(OpsEvalArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    let workers = cli.workers.or_else(|| {
        std::env::var("CURVEGNN_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(workers) = workers {
        // ignore "already built" in case of repeated init
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    match cli.command {
        Command::Curvature(CurvatureCmd::Exact(args)) => curvature_exact(args),
        Command::Curvature(CurvatureCmd::Learn(args)) => curvature_learn(args),
        Command::DepthAssign(args) => depth_assign(args),
        Command::Train(args) => train_cmd(args),
        Command::Heatflow(args) => heatflow_cmd(args),
        Command::Mixing(args) => mixing_cmd(args),
        Command::Diffusion(DiffusionCmd::Simulate(args)) => diffusion_simulate(args),
        Command::Ops(OpsCmd::Eval(args)) => ops_eval(args),
        Command::Report(args) => report_cmd(args),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
