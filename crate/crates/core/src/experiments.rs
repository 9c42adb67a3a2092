//! Runners for the experiment families and their CSV reports.
//!
//! Independent refinement levels, time steps and grids run concurrently;
//! results are always collected in input order, so identical configurations
//! give byte-identical CSV.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{
    axis_path, barrier_scan, error_norms_q, error_norms_u, h1_norm, negnorm, negnorm_q, oscillation_amplitude,
    rho_estimator, BarrierPoint, DualNorm, ErrorNorms, SingularIC, SmoothTestProblem,
};
use crate::assembly::{assemble_stiffness, NodalField};
use crate::config::{ExperimentConfig, ExperimentKind, GridSpec, InitialCondition};
use crate::error::{Error, Result};
use crate::linsolve::SaddleOptions;
use crate::mesh::{build_structured_2d_with, build_structured_3d, check_h5, BoxDomain, Mesh};
use crate::schemes::{
    prepare_initial, run_simulation, CnOptions, ModelParams, Operators, SimulationConfig, Trajectory,
};

/// Shortest round-trip text of an optional value; blank when absent.
fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Simulation settings for a run with time step `k` to `t_final`.
pub fn simulation_config(cfg: &ExperimentConfig, gamma: f64, k: f64, t_final: f64) -> Result<SimulationConfig> {
    let params = ModelParams::new(gamma, cfg.alpha, k, t_final)?;
    Ok(SimulationConfig {
        scheme: cfg.scheme,
        params,
        cn: CnOptions {
            fp_tol: cfg.fp_tol,
            fp_maxiter: cfg.fp_maxiter,
            renormalize: cfg.renormalize,
        },
        solver: SaddleOptions {
            method: cfg.solver,
            tol: cfg.solver_tol,
            max_iter: cfg.solver_maxiter,
        },
        multiplier: cfg.multiplier,
    })
}

/// Grid with `2^{i+1}` cells per axis on `(-1, 1)²`, so that `h = 2^-i`.
pub fn smooth_level_mesh(cfg: &ExperimentConfig, level: u32) -> Result<Mesh> {
    let n = 1usize << (level + 1);
    build_structured_2d_with(n, n, &SmoothTestProblem::domain(), cfg.pattern, cfg.phase)
}

pub fn grid_mesh(cfg: &ExperimentConfig, grid: &GridSpec, domain: &BoxDomain) -> Result<Mesh> {
    match *grid.0.as_slice() {
        [nx, ny] => build_structured_2d_with(nx, ny, domain, cfg.pattern, cfg.phase),
        [nx, ny, nz] => build_structured_3d(nx, ny, nz, domain),
        _ => Err(Error::Config(format!("grid {grid} needs two or three counts"))),
    }
}

fn smooth_problem(cfg: &ExperimentConfig, kind: ExperimentKind) -> SmoothTestProblem {
    SmoothTestProblem {
        gamma: cfg.gamma_for(kind),
        ..SmoothTestProblem::default()
    }
}

/// Time at which the final multiplier approximates the exact one.
fn multiplier_time(sim: &SimulationConfig) -> f64 {
    let t = sim.params.t_final();
    match sim.scheme {
        crate::schemes::Scheme::CrankNicolson if sim.params.n_steps > 0 => t - 0.5 * sim.params.k,
        _ => t,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceRow {
    pub level: u32,
    pub h: f64,
    pub n: usize,
    pub k: f64,
    pub steps: usize,
    pub u: ErrorNorms,
    pub q: ErrorNorms,
    pub q_dual_h10: f64,
    pub q_dual_h1: f64,
    pub max_fp_iters: Option<usize>,
    pub global_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceReport {
    pub rows: Vec<SpaceRow>,
}

pub const SPACE_CSV_HEADER: &str = "level,h,n,k,steps,\
u_l1,u_l1_rate,u_l2,u_l2_rate,u_linf,u_linf_rate,u_h1,u_h1_rate,\
q_l1,q_l1_rate,q_l2,q_l2_rate,q_linf,q_linf_rate,q_h1,q_h1_rate,\
q_dual_h10,q_dual_h10_rate,q_dual_h1,q_dual_h1_rate,max_fp_iters,energy_residual";

impl SpaceReport {
    /// Observed orders of one column, `None` for the first row.
    pub fn rates(&self, column: impl Fn(&SpaceRow) -> f64) -> Vec<Option<f64>> {
        let e: Vec<f64> = self.rows.iter().map(&column).collect();
        let h: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        crate::analysis::convergence_rates(&e, &h).expect("equal lengths")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let cols: [fn(&SpaceRow) -> f64; 10] = [
            |r| r.u.l1,
            |r| r.u.l2,
            |r| r.u.linf,
            |r| r.u.h1,
            |r| r.q.l1,
            |r| r.q.l2,
            |r| r.q.linf,
            |r| r.q.h1,
            |r| r.q_dual_h10,
            |r| r.q_dual_h1,
        ];
        let rates: Vec<Vec<Option<f64>>> = cols.iter().map(|c| self.rates(c)).collect();
        writeln!(w, "{SPACE_CSV_HEADER}")?;
        for (i, r) in self.rows.iter().enumerate() {
            let mut line = format!("{},{},{},{},{}", r.level, r.h, r.n, r.k, r.steps);
            for (c, rate) in cols.iter().zip(&rates) {
                line.push_str(&format!(",{},{}", c(r), opt(rate[i])));
            }
            let fp = r.max_fp_iters.map(|v| v.to_string()).unwrap_or_default();
            line.push_str(&format!(",{fp},{}", r.global_residual));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Runs the smooth test problem to the final time on `h = 2^-i` for every
/// level and measures the errors of the field and of the multiplier.
pub fn run_convergence_space(cfg: &ExperimentConfig) -> Result<SpaceReport> {
    let kind = ExperimentKind::ConvergenceSpace;
    cfg.validate(kind)?;
    let levels: Vec<u32> = cfg.levels.iter().collect();
    let rows = levels
        .par_iter()
        .map(|&level| space_level(cfg, level))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpaceReport { rows })
}

fn space_level(cfg: &ExperimentConfig, level: u32) -> Result<SpaceRow> {
    let kind = ExperimentKind::ConvergenceSpace;
    let problem = smooth_problem(cfg, kind);
    let mesh = smooth_level_mesh(cfg, level)?;
    let ops = Operators::new(&mesh)?;
    let sim = simulation_config(cfg, problem.gamma, cfg.k_for(kind), cfg.t_final_for(kind))?;
    let u0 = prepare_initial(&mesh, 2, |x, o| problem.u(x, 0.0, o))?;
    let tr = run_simulation(&ops, u0, &sim, |_| {})?;
    let t = sim.params.t_final();
    let tq = multiplier_time(&sim);
    let q = &tr.final_state.q;
    Ok(SpaceRow {
        level,
        h: 0.5f64.powi(level as i32),
        n: 1 << (level + 1),
        k: sim.params.k,
        steps: sim.params.n_steps,
        u: error_norms_u(&mesh, &tr.final_state.u, &problem, t, cfg.quad_order)?,
        q: error_norms_q(&mesh, q, &problem, tq, cfg.quad_order)?,
        q_dual_h10: negnorm_q(&mesh, &ops, q, &problem, tq, cfg.quad_order, DualNorm::H10)?,
        q_dual_h1: negnorm_q(&mesh, &ops, q, &problem, tq, cfg.quad_order, DualNorm::H1)?,
        max_fp_iters: tr.steps.iter().filter_map(|r| r.fp_iters).max(),
        global_residual: tr.global_residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeRow {
    pub j: u32,
    pub k: f64,
    /// `‖u^k - u^{k/2}‖_{H¹}`.
    pub increment: f64,
    /// `log₂ ρ` from this and the previous increment.
    pub rate: Option<f64>,
    /// Set when the finer increment vanishes.
    pub overflow: bool,
    /// `H¹`-dual norm of `q^k - q^{k/2}` at the half-step time of `k`.
    pub q_increment: f64,
    pub ref_u_h1: Option<f64>,
    pub ref_q_dual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeReport {
    pub level: u32,
    pub rows: Vec<TimeRow>,
}

pub const TIME_CSV_HEADER: &str = "level,j,k,increment,rate,q_increment,ref_u_h1,ref_q_dual";

impl TimeReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TIME_CSV_HEADER}")?;
        for r in &self.rows {
            let rate = if r.overflow { "inf".to_string() } else { opt(r.rate) };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                self.level,
                r.j,
                r.k,
                r.increment,
                rate,
                r.q_increment,
                opt(r.ref_u_h1),
                opt(r.ref_q_dual)
            )?;
        }
        Ok(())
    }
}

/// Steps whose multipliers combine linearly to the multiplier at time `tau`.
/// Step `n` of the Crank-Nicolson scheme carries `q` at `(n - 1/2) k`, the
/// Euler scheme at `n k`.
fn multiplier_weights(sim: &SimulationConfig, tau: f64) -> Vec<(usize, f64)> {
    let k = sim.params.k;
    let shift = match sim.scheme {
        crate::schemes::Scheme::CrankNicolson => 0.5,
        crate::schemes::Scheme::Euler => 0.0,
    };
    let s = tau / k + shift;
    let n0 = (s + 1e-9).floor();
    let w = s - n0;
    let n0 = (n0 as usize).min(sim.params.n_steps);
    if w < 1e-9 || n0 == sim.params.n_steps {
        vec![(n0, 1.0)]
    } else {
        vec![(n0, 1.0 - w), (n0 + 1, w)]
    }
}

struct TimeRun {
    k: f64,
    u: NodalField,
    /// Multiplier at each requested time.
    q: Vec<NodalField>,
}

fn time_run(ops: &Operators, u0: &NodalField, sim: &SimulationConfig, times: &[f64]) -> Result<TimeRun> {
    let weights: Vec<Vec<(usize, f64)>> = times.iter().map(|&t| multiplier_weights(sim, t)).collect();
    let mut q: Vec<NodalField> = vec![NodalField::zeros(u0.n_vertices(), 1); times.len()];
    let tr = run_simulation(ops, u0.clone(), sim, |state| {
        for (qi, w) in q.iter_mut().zip(&weights) {
            for &(n, c) in w {
                if n == state.step {
                    for (a, b) in qi.values_mut().iter_mut().zip(state.q.values()) {
                        *a += c * b;
                    }
                }
            }
        }
    })?;
    Ok(TimeRun {
        k: sim.params.k,
        u: tr.final_state.u,
        q,
    })
}

/// Self-convergence in time on a fixed grid: runs `k_j = k0 2^-j` for every
/// `j` in range plus one finer step. Multipliers of two runs are compared at
/// the half-step time of the coarser one, interpolating the finer run
/// linearly between its own half steps.
pub fn run_convergence_time(cfg: &ExperimentConfig) -> Result<TimeReport> {
    let kind = ExperimentKind::ConvergenceTime;
    cfg.validate(kind)?;
    let problem = smooth_problem(cfg, kind);
    let mesh = smooth_level_mesh(cfg, cfg.level)?;
    let ops = Operators::new(&mesh)?;
    let u0 = prepare_initial(&mesh, 2, |x, o| problem.u(x, 0.0, o))?;
    let t_final = cfg.t_final_for(kind);
    let sim_for = |j: u32| simulation_config(cfg, problem.gamma, cfg.k0 * 0.5f64.powi(j as i32), t_final);
    let js: Vec<u32> = (cfg.steps.first..=cfg.steps.last + 1).collect();
    let sims = js.iter().map(|&j| sim_for(j)).collect::<Result<Vec<_>>>()?;
    let own: Vec<f64> = sims.iter().map(multiplier_time).collect();
    // Run i is compared with run i - 1 at that run's time and with run i + 1
    // at its own; the reference is compared with every row.
    let mut jobs: Vec<(SimulationConfig, Vec<f64>)> = sims
        .iter()
        .enumerate()
        .map(|(i, sim)| {
            let mut t = vec![own[i]];
            if i > 0 {
                t.push(own[i - 1]);
            }
            (*sim, t)
        })
        .collect();
    if let Some(r) = cfg.reference_j {
        jobs.push((sim_for(r)?, own[..own.len() - 1].to_vec()));
    }
    let runs = jobs
        .par_iter()
        .map(|(sim, times)| time_run(&ops, &u0, sim, times))
        .collect::<Result<Vec<_>>>()?;
    let n = js.len();
    let (runs, reference) = runs.split_at(n);
    let dual = |a: &NodalField, b: &NodalField| -> Result<f64> {
        negnorm(&mesh, &ops, &a.sub(b)?, |_| 0.0, cfg.quad_order, DualNorm::H1)
    };
    let mut rows = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let (a, b) = (&runs[i], &runs[i + 1]);
        let increment = h1_norm(&a.u.sub(&b.u)?, &ops.mass, &ops.stiffness)?;
        let (rate, overflow) = if i == 0 {
            (None, false)
        } else {
            match rho_estimator(&runs[i - 1].u, &a.u, &b.u, &ops) {
                Ok(est) if est.overflow => (None, true),
                Ok(est) => (Some(est.rate), false),
                Err(_) => (None, false),
            }
        };
        let (ref_u_h1, ref_q_dual) = match reference.first() {
            Some(r) => (
                Some(h1_norm(&r.u.sub(&a.u)?, &ops.mass, &ops.stiffness)?),
                Some(dual(&r.q[i], &a.q[0])?),
            ),
            None => (None, None),
        };
        rows.push(TimeRow {
            j: js[i],
            k: a.k,
            increment,
            rate,
            overflow,
            q_increment: dual(&a.q[0], &b.q[1])?,
            ref_u_h1,
            ref_q_dual,
        });
    }
    Ok(TimeReport { level: cfg.level, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierGrid {
    pub grid: GridSpec,
    /// Cell width along the scan axis.
    pub dx: f64,
    pub points: Vec<BarrierPoint>,
    /// Median detrended energy range over windows of two cells.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    pub grids: Vec<BarrierGrid>,
}

pub const BARRIER_CSV_HEADER: &str = "nx,ny,nz,dx,x0,y0,z0,energy";

impl BarrierReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{BARRIER_CSV_HEADER}")?;
        for g in &self.grids {
            let c = &g.grid.0;
            let nz = c.get(2).map(|v| v.to_string()).unwrap_or_default();
            for p in &g.points {
                let z = p.x0.get(2).map(|v| v.to_string()).unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{nz},{},{},{},{z},{}",
                    c[0],
                    c[1],
                    g.dx,
                    p.x0[0],
                    p.x0[1],
                    opt(p.energy)
                )?;
            }
        }
        Ok(())
    }
}

/// Energy of an interpolated point singularity moved along one axis, for
/// every configured grid.
pub fn run_barrier_scan(cfg: &ExperimentConfig) -> Result<BarrierReport> {
    cfg.validate(ExperimentKind::BarrierScan)?;
    let domain = cfg.domain_for(cfg.dim)?;
    let offset = cfg.path_offset.clone().unwrap_or_else(|| vec![0.0; cfg.dim - 1]);
    let grids = cfg
        .grids_for()
        .into_iter()
        .map(|grid| {
            let mesh = grid_mesh(cfg, &grid, &domain)?;
            let stiffness = assemble_stiffness(&mesh)?;
            let axis = cfg.path_axis;
            let dx = mesh.spacing()[axis];
            let cells = (cfg.path_end - cfg.path_start) / dx;
            let samples = (cells * cfg.samples_per_cell as f64).ceil() as usize + 1;
            let path: Vec<Vec<f64>> = axis_path(cfg.path_start, cfg.path_end, samples, &offset)
                .into_iter()
                .map(|mut p| {
                    let s = p.remove(0);
                    p.insert(axis, s);
                    p
                })
                .collect();
            let points = barrier_scan(&mesh, &stiffness, &path)?;
            let (s, e): (Vec<f64>, Vec<f64>) = points.iter().filter_map(|p| p.energy.map(|e| (p.x0[axis], e))).unzip();
            let amplitude = oscillation_amplitude(&s, &e, 2.0 * dx)?;
            Ok(BarrierGrid {
                grid,
                dx,
                points,
                amplitude,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BarrierReport { grids })
}

#[derive(Debug, Clone)]
pub struct DynamicsRun {
    pub grid: GridSpec,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone)]
pub struct DynamicsReport {
    pub runs: Vec<DynamicsRun>,
}

/// Full simulations from the configured initial condition on every grid.
pub fn run_dynamics(cfg: &ExperimentConfig) -> Result<DynamicsReport> {
    let kind = ExperimentKind::Dynamics;
    cfg.validate(kind)?;
    let domain = match (cfg.ic, &cfg.domain) {
        (InitialCondition::Smooth, None) => SmoothTestProblem::domain(),
        _ => cfg.domain_for(cfg.dim)?,
    };
    let sim = simulation_config(cfg, cfg.gamma_for(kind), cfg.k_for(kind), cfg.t_final_for(kind))?;
    let runs = cfg
        .grids_for()
        .into_par_iter()
        .map(|grid| {
            let mesh = grid_mesh(cfg, &grid, &domain)?;
            let ops = Operators::new(&mesh)?;
            let u0 = match cfg.ic {
                InitialCondition::Singular => {
                    let ic = SingularIC {
                        delta: cfg.delta_for(cfg.dim),
                        dim: cfg.dim,
                    };
                    ic.interpolate(&mesh)?
                }
                InitialCondition::Smooth => {
                    let p = smooth_problem(cfg, kind);
                    prepare_initial(&mesh, 2, |x, o| p.u(x, 0.0, o))?
                }
            };
            let trajectory = run_simulation(&ops, u0, &sim, |_| {})?;
            Ok(DynamicsRun { grid, trajectory })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DynamicsReport { runs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshRow {
    pub grid: GridSpec,
    pub vertices: usize,
    pub cells: usize,
    pub h: f64,
    pub quasi_uniformity: f64,
    pub passes: bool,
    pub violations: usize,
    pub max_violation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshReport {
    pub rows: Vec<MeshRow>,
}

pub const MESH_CSV_HEADER: &str =
    "nx,ny,nz,vertices,cells,h,quasi_uniformity,nonpositive_offdiag,violations,max_violation";

impl MeshReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{MESH_CSV_HEADER}")?;
        for r in &self.rows {
            let c = &r.grid.0;
            let nz = c.get(2).map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{nz},{},{},{},{},{},{},{}",
                c[0],
                c[1],
                r.vertices,
                r.cells,
                r.h,
                r.quasi_uniformity,
                r.passes,
                r.violations,
                opt(r.max_violation)
            )?;
        }
        Ok(())
    }
}

/// Nonpositive off-diagonal stiffness check for every configured grid.
pub fn run_check_mesh(cfg: &ExperimentConfig) -> Result<MeshReport> {
    cfg.validate(ExperimentKind::CheckMesh)?;
    let domain = cfg.domain_for(cfg.dim)?;
    let rows = cfg
        .grids_for()
        .into_iter()
        .map(|grid| {
            let mesh = grid_mesh(cfg, &grid, &domain)?;
            let report = check_h5(&mesh, &assemble_stiffness(&mesh)?)?;
            Ok(MeshRow {
                vertices: mesh.n_vertices(),
                cells: mesh.n_cells(),
                h: mesh.h(),
                quasi_uniformity: mesh.quasi_uniformity(),
                passes: report.passes,
                violations: report.violations.len(),
                max_violation: report.violations.iter().map(|v| v.2).reduce(f64::max),
                grid,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeshReport { rows })
}

#[derive(Debug, Clone)]
pub enum ExperimentReport {
    Space(SpaceReport),
    Time(TimeReport),
    Barrier(BarrierReport),
    Dynamics(DynamicsReport),
    Mesh(MeshReport),
}

pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Ok(match kind {
        ExperimentKind::ConvergenceSpace => ExperimentReport::Space(run_convergence_space(cfg)?),
        ExperimentKind::ConvergenceTime => ExperimentReport::Time(run_convergence_time(cfg)?),
        ExperimentKind::BarrierScan => ExperimentReport::Barrier(run_barrier_scan(cfg)?),
        ExperimentKind::Dynamics => ExperimentReport::Dynamics(run_dynamics(cfg)?),
        ExperimentKind::CheckMesh => ExperimentReport::Mesh(run_check_mesh(cfg)?),
    })
}

/// `out.csv` becomes `out-34x17.csv`.
pub fn per_grid_path(out: &Path, grid: &GridSpec) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("dynamics");
    let name = match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}-{grid}.{ext}"),
        None => format!("{stem}-{grid}"),
    };
    out.with_file_name(name)
}

impl ExperimentReport {
    /// Writes the report as one CSV stream. Dynamics reports with several
    /// grids need [`ExperimentReport::save`] instead.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        match self {
            Self::Space(r) => r.write_csv(w),
            Self::Time(r) => r.write_csv(w),
            Self::Barrier(r) => r.write_csv(w),
            Self::Mesh(r) => r.write_csv(w),
            Self::Dynamics(r) => match r.runs.as_slice() {
                [run] => run.trajectory.write_csv(w),
                _ => Err(Error::Config(
                    "a dynamics run over several grids needs an output path".into(),
                )),
            },
        }
    }

    /// Writes to `out`; a dynamics report over several grids writes one file
    /// per grid next to it. Returns the files written.
    pub fn save(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let create = |p: &Path| -> Result<std::io::BufWriter<std::fs::File>> {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Ok(std::io::BufWriter::new(std::fs::File::create(p)?))
        };
        match self {
            Self::Dynamics(r) if r.runs.len() > 1 => r
                .runs
                .iter()
                .map(|run| {
                    let p = per_grid_path(out, &run.grid);
                    let mut f = create(&p)?;
                    run.trajectory.write_csv(&mut f)?;
                    f.flush()?;
                    Ok(p)
                })
                .collect(),
            _ => {
                let mut f = create(out)?;
                self.write_csv(&mut f)?;
                f.flush()?;
                Ok(vec![out.to_path_buf()])
            }
        }
    }

    /// Short human-readable digest for the terminal.
    pub fn summary(&self) -> String {
        match self {
            Self::Space(r) => {
                let rates = r.rates(|row| row.u.l2);
                let last = rates.last().copied().flatten();
                format!(
                    "{} levels; finest L2 error {:.3e} (rate {})",
                    r.rows.len(),
                    r.rows.last().map_or(f64::NAN, |row| row.u.l2),
                    last.map_or("-".into(), |v| format!("{v:.3}"))
                )
            }
            Self::Time(r) => format!(
                "{} increments on level {}; last rate {}",
                r.rows.len(),
                r.level,
                r.rows
                    .last()
                    .and_then(|x| x.rate)
                    .map_or("-".into(), |v| format!("{v:.4}"))
            ),
            Self::Barrier(r) => r
                .grids
                .iter()
                .map(|g| format!("{}: oscillation amplitude {:.4}", g.grid, g.amplitude))
                .collect::<Vec<_>>()
                .join("\n"),
            Self::Dynamics(r) => r
                .runs
                .iter()
                .map(|run| {
                    format!(
                        "{}: energy {:.6} -> {:.6}, energy law defect {:.2e}",
                        run.grid,
                        run.trajectory.initial.energy,
                        run.trajectory.final_state.report.energy,
                        run.trajectory.global_residual
                    )
                })
                .collect::<Vec<_>>()
                .join("\n"),
            Self::Mesh(r) => r
                .rows
                .iter()
                .map(|m| {
                    format!(
                        "{}: {}",
                        m.grid,
                        if m.passes {
                            "nonpositive off-diagonals"
                        } else {
                            "positive off-diagonal entries"
                        }
                    )
                })
                .collect::<Vec<_>>()
                .join("\n"),
        }
    }
}
