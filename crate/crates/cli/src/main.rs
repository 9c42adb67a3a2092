use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sphere_fem::config::{ExperimentConfig, ExperimentKind};
use sphere_fem::experiments::run_experiment;

#[derive(Parser)]
#[command(
    name = "sphere-fem",
    version,
    about = "Unit-sphere constrained finite element experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Errors of the smooth test problem under mesh refinement.
    ConvergenceSpace(Common),
    /// Time self-convergence on a fixed mesh.
    ConvergenceTime(Common),
    /// Energy of a point singularity moved across the grid.
    BarrierScan(Common),
    /// Energy history of a full simulation.
    Dynamics(Common),
    /// Sign check of the off-diagonal stiffness entries.
    CheckMesh(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Direct,
    Uzawa,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Euler,
    CrankNicolson,
}

#[derive(Args)]
struct Common {
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Normalize nodal values after every step.
    #[arg(long)]
    renormalize: bool,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long)]
    quad_order: Option<usize>,
    /// Further `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Self::ConvergenceSpace(c) => (ExperimentKind::ConvergenceSpace, c),
            Self::ConvergenceTime(c) => (ExperimentKind::ConvergenceTime, c),
            Self::BarrierScan(c) => (ExperimentKind::BarrierScan, c),
            Self::Dynamics(c) => (ExperimentKind::Dynamics, c),
            Self::CheckMesh(c) => (ExperimentKind::CheckMesh, c),
        }
    }
}

fn load(common: &Common) -> sphere_fem::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.scheme {
        cfg.set(
            "scheme",
            match s {
                SchemeArg::Euler => "euler",
                SchemeArg::CrankNicolson => "crank-nicolson",
            },
        )?;
    }
    if common.renormalize {
        cfg.renormalize = true;
    }
    if let Some(s) = common.solver {
        cfg.set(
            "solver",
            match s {
                SolverArg::Direct => "direct",
                SolverArg::Uzawa => "uzawa",
            },
        )?;
    }
    if let Some(q) = common.quad_order {
        cfg.quad_order = q;
    }
    for pair in &common.set {
        cfg.set_pair(pair)?;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> sphere_fem::Result<()> {
    let (kind, common) = cli.command.split();
    let cfg = load(&common)?;
    let report = run_experiment(kind, &cfg)?;
    match &cfg.output {
        Some(out) => {
            for p in report.save(out)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            report.write_csv(&mut lock)?;
            lock.flush()?;
        }
    }
    eprintln!("{}", report.summary());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
