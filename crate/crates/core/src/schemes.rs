//! Time integration of the constrained flow: the linearly implicit Euler
//! scheme, the Crank-Nicolson scheme solved by a fixed-point iteration on
//! the half-step unknowns, multiplier recovery and per-step diagnostics.
//!
//! Both schemes solve saddle-point systems whose constraint block is
//! diagonal in the nodes: row `a` carries the unit direction `d_a` in the
//! columns of node `a`. The multiplier unknown of that system is a nodal
//! force `λ_a`; the finite element multiplier is recovered from it through
//! the lumped mass by default, or the consistent mass on request.

use std::io::Write;

use crate::assembly::{
    assemble_lumped_mass, assemble_mass, assemble_stiffness, dirichlet_energy, nodal_interpolate, normalize_nodal,
    LumpedMass, NodalField, NORM_GUARD,
};
use crate::error::{Error, Result};
use crate::linsolve::{SaddleMethod, SaddleOptions, SaddleSolver, SaddleSystem, SpdFactor, VectorBlock};
use crate::mesh::Mesh;
use crate::sparse::SparseOperator;

/// Physical and discretization parameters of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Diffusion coefficient.
    pub gamma: f64,
    /// Gilbert damping weight of the precession term.
    pub alpha: f64,
    /// Time step.
    pub k: f64,
    pub n_steps: usize,
}

impl ModelParams {
    /// Parameters for a run to `t_final`, which must be a whole number of steps.
    pub fn new(gamma: f64, alpha: f64, k: f64, t_final: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidInput(format!("time step must be positive, got {k}")));
        }
        if !(t_final >= 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidInput(format!(
                "final time must be nonnegative, got {t_final}"
            )));
        }
        let n = (t_final / k).round();
        if (n * k - t_final).abs() > 1e-9 * t_final.max(k) {
            return Err(Error::InvalidInput(format!(
                "final time {t_final} is not a whole number of steps of size {k}"
            )));
        }
        let p = Self {
            gamma,
            alpha,
            k,
            n_steps: n as usize,
        };
        p.check()?;
        Ok(p)
    }

    pub fn t_final(&self) -> f64 {
        self.n_steps as f64 * self.k
    }

    fn check(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidInput(format!(
                "alpha must be nonnegative, got {}",
                self.alpha
            )));
        }
        if !(self.k > 0.0) {
            return Err(Error::InvalidInput(format!(
                "time step must be positive, got {}",
                self.k
            )));
        }
        Ok(())
    }

    /// Checks the parameters against the field dimension.
    pub fn validate(&self, components: usize) -> Result<()> {
        self.check()?;
        if components == 2 && self.alpha != 0.0 {
            return Err(Error::InvalidInput("alpha must be 0 for two-component fields".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    Euler,
    #[default]
    CrankNicolson,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Self::Euler),
            "crank-nicolson" | "cn" => Ok(Self::CrankNicolson),
            _ => Err(Error::Config(format!(
                "unknown scheme `{s}` (expected euler or crank-nicolson)"
            ))),
        }
    }
}

/// Options of the Crank-Nicolson fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnOptions {
    /// Stop when `‖w⁽ⁱ⁺¹⁾ - w⁽ⁱ⁾‖_h ≤ fp_tol ‖w⁽ⁱ⁾‖_h`.
    pub fp_tol: f64,
    pub fp_maxiter: usize,
    /// Normalize the nodal values after each step.
    pub renormalize: bool,
}

impl Default for CnOptions {
    fn default() -> Self {
        Self {
            fp_tol: 1e-13,
            fp_maxiter: 100,
            renormalize: false,
        }
    }
}

/// Mass used to turn the nodal constraint forces into the finite element
/// multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultiplierMass {
    /// `q_a = λ_a / (c μ_a)`: the coupling term evaluated with the lumped product.
    #[default]
    Lumped,
    /// `M q = λ / c` with the consistent mass matrix.
    Consistent,
}

impl std::str::FromStr for MultiplierMass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lumped" => Ok(Self::Lumped),
            "consistent" => Ok(Self::Consistent),
            _ => Err(Error::Config(format!(
                "unknown multiplier mass `{s}` (expected lumped or consistent)"
            ))),
        }
    }
}

/// Mesh operators shared by all steps of a run.
pub struct Operators {
    pub stiffness: SparseOperator,
    pub mass: SparseOperator,
    pub lumped: LumpedMass,
    mass_factor: SpdFactor,
    h1_factor: SpdFactor,
    interior: Vec<usize>,
    interior_factor: Option<SpdFactor>,
}

impl Operators {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let stiffness = assemble_stiffness(mesh)?;
        let mass = assemble_mass(mesh)?;
        let lumped = assemble_lumped_mass(mesh);
        let mass_factor = SpdFactor::new(&mass)?;
        let h1_factor = SpdFactor::new(&mass.add_scaled(1.0, &stiffness, 1.0)?)?;
        let interior = mesh.interior_vertices();
        let interior_factor = if interior.is_empty() {
            None
        } else {
            Some(SpdFactor::new(&stiffness.restrict(&interior))?)
        };
        Ok(Self {
            stiffness,
            mass,
            lumped,
            mass_factor,
            h1_factor,
            interior,
            interior_factor,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.lumped.len()
    }

    /// Solves `M x = b` with the consistent mass matrix.
    pub fn mass_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.mass_factor.solve_in_place(&mut x);
        x
    }

    /// Solves `(M + K) x = b` over all vertices.
    pub fn h1_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.h1_factor.solve_in_place(&mut x);
        x
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Solves `K_int r = b` on the interior vertices; `None` without interior vertices.
    pub fn interior_stiffness_solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        self.interior_factor.as_ref().map(|f| {
            let mut x = b.to_vec();
            f.solve_in_place(&mut x);
            x
        })
    }

    /// Discrete dual norm of a P1 scalar field `q`: the `H¹₀` norm of the
    /// Riesz representative of `f ↦ (q, f)` on interior-vertex test functions.
    pub fn discrete_negnorm(&self, q: &NodalField) -> Result<f64> {
        let mq = self.mass.mul_vec(q.values());
        let b: Vec<f64> = self.interior.iter().map(|&a| mq[a]).collect();
        let r = self.interior_stiffness_solve(&b).ok_or(Error::NoInteriorVertices)?;
        let s: f64 = r.iter().zip(&b).map(|(r, b)| r * b).sum();
        Ok(s.max(0.0).sqrt())
    }
}

/// Diagnostics of one time level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    /// `‖∇u‖²`.
    pub energy: f64,
    /// Energy dissipated over the step, the left-hand sum term of the energy law.
    pub dissipation: f64,
    /// Absolute defect of the per-step energy identity.
    pub energy_residual: f64,
    pub min_norm: f64,
    pub max_norm: f64,
    pub fp_iters: Option<usize>,
    pub q_negnorm: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StepState {
    pub u: NodalField,
    /// Latest multiplier (at the half step for Crank-Nicolson).
    pub q: NodalField,
    pub time: f64,
    pub step: usize,
    pub report: StepReport,
}

/// Nodal interpolation of `u0` followed by nodal normalization.
pub fn prepare_initial<F>(mesh: &Mesh, components: usize, u0: F) -> Result<NodalField>
where
    F: Fn(&[f64], &mut [f64]),
{
    normalize_nodal(&nodal_interpolate(mesh, components, u0)?)
}

/// Solves `M q = -c` with `c_ā = Σ_a (u_a·u_ā) K_aā`, the multiplier consistent
/// with a nodally unit field.
pub fn recover_multiplier(u: &NodalField, ops: &Operators) -> Result<NodalField> {
    recover_multiplier_with(u, ops, MultiplierMass::Consistent)
}

/// As [`recover_multiplier`], with the mass matrix of choice.
pub fn recover_multiplier_with(u: &NodalField, ops: &Operators, mass: MultiplierMass) -> Result<NodalField> {
    if u.n_vertices() != ops.n_vertices() {
        return Err(Error::ShapeMismatch(format!(
            "field has {} vertices, operators {}",
            u.n_vertices(),
            ops.n_vertices()
        )));
    }
    for (a, n) in u.nodal_norms().into_iter().enumerate() {
        if (n - 1.0).abs() > 1e-8 {
            return Err(Error::NotUnit { vertex: a, norm: n });
        }
    }
    let k = &ops.stiffness;
    let rhs: Vec<f64> = (0..k.n_rows())
        .map(|ab| {
            let ub = u.at(ab);
            -k.row(ab)
                .map(|(a, v)| v * u.at(a).iter().zip(ub).map(|(x, y)| x * y).sum::<f64>())
                .sum::<f64>()
        })
        .collect();
    let q = match mass {
        MultiplierMass::Consistent => ops.mass_solve(&rhs),
        MultiplierMass::Lumped => rhs.iter().zip(ops.lumped.weights()).map(|(c, mu)| c / mu).collect(),
    };
    NodalField::from_values(1, q)
}

fn directions(w: &NodalField) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    let m = w.components();
    let mut d = Vec::with_capacity(w.n_vertices());
    let mut norms = Vec::with_capacity(w.n_vertices());
    for a in 0..w.n_vertices() {
        let wa = w.at(a);
        let n = wa.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n >= NORM_GUARD) {
            return Err(Error::NearZeroNorm {
                vertex: a,
                norm: n,
                guard: NORM_GUARD,
            });
        }
        let mut da = [0.0; 3];
        for i in 0..m {
            da[i] = wa[i] / n;
        }
        d.push(da);
        norms.push(n);
    }
    Ok((d, norms))
}

fn constraint_block(d: &[[f64; 3]], m: usize) -> SparseOperator {
    let mut t = Vec::with_capacity(d.len() * m);
    for (a, da) in d.iter().enumerate() {
        for i in 0..m {
            t.push((a, a * m + i, da[i]));
        }
    }
    SparseOperator::from_triplets(d.len(), d.len() * m, &t, false).expect("indices in range by construction")
}

fn energy_of(u: &NodalField, ops: &Operators) -> Result<f64> {
    dirichlet_energy(u, &ops.stiffness)
}

fn lumped_sq_norm(v: &[f64], m: usize, lumped: &LumpedMass) -> f64 {
    lumped
        .weights()
        .iter()
        .enumerate()
        .map(|(a, mu)| mu * v[a * m..(a + 1) * m].iter().map(|x| x * x).sum::<f64>())
        .sum()
}

fn norm_range(u: &NodalField) -> (f64, f64) {
    u.nodal_norms()
        .into_iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), n| (lo.min(n), hi.max(n)))
}

/// Advances a nodal field in time with one of the two schemes.
pub struct Stepper<'a> {
    ops: &'a Operators,
    params: ModelParams,
    scheme: Scheme,
    cn: CnOptions,
    solver: SaddleSolver,
    multiplier: MultiplierMass,
    components: usize,
    // Constant A block (absent for Euler with damping, where it depends on uⁿ).
    a_block: Option<VectorBlock>,
    last_lambda: Option<Vec<f64>>,
}

impl<'a> Stepper<'a> {
    pub fn new(ops: &'a Operators, cfg: &SimulationConfig, components: usize) -> Result<Self> {
        let SimulationConfig {
            scheme,
            params,
            cn,
            solver,
            multiplier,
        } = *cfg;
        params.validate(components)?;
        if !(2..=3).contains(&components) {
            return Err(Error::InvalidInput(format!(
                "fields must have 2 or 3 components, got {components}"
            )));
        }
        if scheme == Scheme::CrankNicolson && params.alpha != 0.0 {
            return Err(Error::InvalidInput(
                "the Crank-Nicolson solver requires alpha = 0".into(),
            ));
        }
        if !(cn.fp_tol > 0.0) || cn.fp_maxiter == 0 {
            return Err(Error::InvalidInput(
                "fixed-point tolerance and iteration cap must be positive".into(),
            ));
        }
        let mu = ops.lumped.weights();
        let a_block = match scheme {
            Scheme::Euler if params.alpha == 0.0 => {
                let d: Vec<f64> = mu.iter().map(|m| m / params.k).collect();
                Some(VectorBlock::ComponentDiagonal {
                    scalar: SparseOperator::diagonal(&d).add_scaled(1.0, &ops.stiffness, params.gamma)?,
                    components,
                })
            }
            Scheme::Euler => None,
            Scheme::CrankNicolson => Some(VectorBlock::ComponentDiagonal {
                scalar: SparseOperator::diagonal(mu).add_scaled(1.0, &ops.stiffness, 0.5 * params.gamma * params.k)?,
                components,
            }),
        };
        Ok(Self {
            ops,
            params,
            scheme,
            cn,
            solver: SaddleSolver::new(solver),
            multiplier,
            components,
            a_block,
            last_lambda: None,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// State at time 0 for a nodally unit initial field.
    pub fn initial_state(&self, u0: NodalField) -> Result<StepState> {
        self.check_field(&u0)?;
        let q = match recover_multiplier_with(&u0, self.ops, self.multiplier) {
            Ok(q) => q,
            Err(Error::NotUnit { .. }) => NodalField::zeros(u0.n_vertices(), 1),
            Err(e) => return Err(e),
        };
        let (min_norm, max_norm) = norm_range(&u0);
        let report = StepReport {
            step: 0,
            time: 0.0,
            energy: energy_of(&u0, self.ops)?,
            min_norm,
            max_norm,
            ..Default::default()
        };
        Ok(StepState {
            u: u0,
            q,
            time: 0.0,
            step: 0,
            report,
        })
    }

    fn check_field(&self, u: &NodalField) -> Result<()> {
        if u.components() != self.components || u.n_vertices() != self.ops.n_vertices() {
            return Err(Error::ShapeMismatch(format!(
                "field has {} vertices with {} components, expected {} with {}",
                u.n_vertices(),
                u.components(),
                self.ops.n_vertices(),
                self.components
            )));
        }
        Ok(())
    }

    pub fn step(&mut self, state: &StepState) -> Result<StepState> {
        self.check_field(&state.u)?;
        match self.scheme {
            Scheme::Euler => self.euler_step(state),
            Scheme::CrankNicolson => self.cn_step(state),
        }
    }

    fn euler_a_block(&self, u: &NodalField) -> Result<VectorBlock> {
        if let Some(a) = &self.a_block {
            return Ok(a.clone());
        }
        // Damped case: per-node blocks (μ_a/k)(I + α [uⁿ_a]×) plus γK per component.
        let m = self.components;
        let p = &self.params;
        let mut t: Vec<(usize, usize, f64)> = self
            .ops
            .stiffness
            .triplets()
            .flat_map(|(r, c, v)| (0..m).map(move |i| (r * m + i, c * m + i, p.gamma * v)))
            .collect();
        for (a, mu) in self.ops.lumped.weights().iter().enumerate() {
            let s = mu / p.k;
            let ua = u.at(a);
            let cross = [[0.0, -ua[2], ua[1]], [ua[2], 0.0, -ua[0]], [-ua[1], ua[0], 0.0]];
            for i in 0..m {
                t.push((a * m + i, a * m + i, s));
                for j in 0..m {
                    if i != j && cross[i][j] != 0.0 {
                        t.push((a * m + i, a * m + j, s * p.alpha * cross[i][j]));
                    }
                }
            }
        }
        let n = u.n_vertices() * m;
        Ok(VectorBlock::General(SparseOperator::from_triplets(n, n, &t, false)?))
    }

    fn multiplier_from_lambda(&self, lambda: &[f64], scale: f64) -> Result<NodalField> {
        let q = match self.multiplier {
            MultiplierMass::Lumped => lambda
                .iter()
                .zip(self.ops.lumped.weights())
                .map(|(l, mu)| l / (scale * mu))
                .collect(),
            MultiplierMass::Consistent => {
                let mut q = self.ops.mass_solve(lambda);
                q.iter_mut().for_each(|x| *x /= scale);
                q
            }
        };
        NodalField::from_values(1, q)
    }

    /// One step of the linearly implicit Euler scheme.
    fn euler_step(&mut self, state: &StepState) -> Result<StepState> {
        let p = self.params;
        let m = self.components;
        let un = &state.u;
        let (d, norms) = directions(un)?;
        let mu = self.ops.lumped.weights();
        let mut rhs_u = un.values().to_vec();
        for (a, mu) in mu.iter().enumerate() {
            rhs_u[a * m..(a + 1) * m].iter_mut().for_each(|x| *x *= mu / p.k);
        }
        let sys = SaddleSystem {
            a: self.euler_a_block(un)?,
            b: constraint_block(&d, m),
            rhs_u,
            rhs_q: norms,
        };
        let sol = self.solver.solve(&sys, self.last_lambda.as_deref())?;
        let u_next = NodalField::from_values(m, sol.u)?;
        let q = self.multiplier_from_lambda(&sol.q, p.gamma)?;
        self.last_lambda = Some(sol.q);

        let e0 = state.report.energy;
        let e1 = energy_of(&u_next, self.ops)?;
        let mut du = u_next.sub(un)?;
        du.scale(1.0 / p.k);
        let grad_du = energy_of(&du, self.ops)?;
        let dissipation = p.k * (lumped_sq_norm(du.values(), m, &self.ops.lumped) + 0.5 * p.gamma * p.k * grad_du);
        let energy_residual = (dissipation + 0.5 * p.gamma * (e1 - e0)).abs();
        self.finish(state, u_next, q, e1, dissipation, energy_residual, None)
    }

    /// One Crank-Nicolson step by fixed-point iteration on `w = u^{n+1/2}`.
    fn cn_step(&mut self, state: &StepState) -> Result<StepState> {
        let p = self.params;
        let m = self.components;
        let un = &state.u;
        let half = 0.5 * p.gamma * p.k;
        let mu = self.ops.lumped.weights();
        let mut rhs_u = un.values().to_vec();
        for (a, mu) in mu.iter().enumerate() {
            rhs_u[a * m..(a + 1) * m].iter_mut().for_each(|x| *x *= mu);
        }
        let defect: Vec<f64> = un.nodal_norms().iter().map(|n| 1.0 - n * n).collect();
        let a_block = self.a_block.clone().expect("constant A block for Crank-Nicolson");

        let mut w = un.clone();
        let mut lambda = self.last_lambda.clone();
        let mut iters = 0;
        let mut increment = f64::INFINITY;
        while iters < self.cn.fp_maxiter {
            iters += 1;
            let (d, wn) = directions(&w)?;
            let rhs_q: Vec<f64> = (0..un.n_vertices())
                .map(|a| {
                    let ua = un.at(a);
                    (0..m).map(|i| d[a][i] * ua[i]).sum::<f64>() + defect[a] / (4.0 * wn[a])
                })
                .collect();
            let sys = SaddleSystem {
                a: a_block.clone(),
                b: constraint_block(&d, m),
                rhs_u: rhs_u.clone(),
                rhs_q,
            };
            let sol = self.solver.solve(&sys, lambda.as_deref())?;
            let diff: Vec<f64> = sol.u.iter().zip(w.values()).map(|(a, b)| a - b).collect();
            let inc = lumped_sq_norm(&diff, m, &self.ops.lumped).sqrt();
            let scale = lumped_sq_norm(w.values(), m, &self.ops.lumped).sqrt();
            w = NodalField::from_values(m, sol.u)?;
            lambda = Some(sol.q);
            increment = if scale > 0.0 { inc / scale } else { inc };
            if inc <= self.cn.fp_tol * scale {
                break;
            }
        }
        if !(increment <= self.cn.fp_tol) {
            return Err(Error::FixedPoint {
                iterations: iters,
                increment,
            });
        }
        let lambda = lambda.expect("at least one iteration");
        let q = self.multiplier_from_lambda(&lambda, half)?;
        self.last_lambda = Some(lambda);

        let mut next: Vec<f64> = w.values().iter().zip(un.values()).map(|(w, u)| 2.0 * w - u).collect();
        if self.cn.renormalize {
            next = normalize_nodal(&NodalField::from_values(m, next)?)?.into_values();
        }
        let u_next = NodalField::from_values(m, next)?;
        let e0 = state.report.energy;
        let e1 = energy_of(&u_next, self.ops)?;
        let du: Vec<f64> = u_next
            .values()
            .iter()
            .zip(un.values())
            .map(|(a, b)| (a - b) / p.k)
            .collect();
        let dissipation = p.k * lumped_sq_norm(&du, m, &self.ops.lumped);
        let energy_residual = (dissipation + 0.5 * p.gamma * (e1 - e0)).abs();
        self.finish(state, u_next, q, e1, dissipation, energy_residual, Some(iters))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        state: &StepState,
        u: NodalField,
        q: NodalField,
        energy: f64,
        dissipation: f64,
        energy_residual: f64,
        fp_iters: Option<usize>,
    ) -> Result<StepState> {
        let (min_norm, max_norm) = norm_range(&u);
        let q_negnorm = match self.ops.discrete_negnorm(&q) {
            Ok(v) => Some(v),
            Err(Error::NoInteriorVertices) => None,
            Err(e) => return Err(e),
        };
        let step = state.step + 1;
        let time = step as f64 * self.params.k;
        Ok(StepState {
            u,
            q,
            time,
            step,
            report: StepReport {
                step,
                time,
                energy,
                dissipation,
                energy_residual,
                min_norm,
                max_norm,
                fp_iters,
                q_negnorm,
            },
        })
    }
}

/// Settings of a full simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub scheme: Scheme,
    pub params: ModelParams,
    pub cn: CnOptions,
    pub solver: SaddleOptions,
    pub multiplier: MultiplierMass,
}

impl SimulationConfig {
    pub fn new(scheme: Scheme, params: ModelParams) -> Self {
        Self {
            scheme,
            params,
            cn: CnOptions::default(),
            solver: default_solver_options(SaddleMethod::Direct),
            multiplier: MultiplierMass::default(),
        }
    }
}

/// Saddle-point solver settings used by the time steppers.
pub fn default_solver_options(method: SaddleMethod) -> SaddleOptions {
    SaddleOptions {
        method,
        tol: 1e-13,
        max_iter: 1000,
    }
}

/// Result of [`run_simulation`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial: StepReport,
    pub steps: Vec<StepReport>,
    pub final_state: StepState,
    /// Defect of the summed energy law, relative to `(γ/2)‖∇u⁰‖²`
    /// (absolute when that energy vanishes).
    pub global_residual: f64,
}

impl Trajectory {
    /// All reports including the initial one.
    pub fn reports(&self) -> impl Iterator<Item = &StepReport> {
        std::iter::once(&self.initial).chain(&self.steps)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_step_csv(w, self.reports())
    }
}

/// Runs `cfg.params.n_steps` steps from `u0`, calling `observe` on every state.
pub fn run_simulation(
    ops: &Operators,
    u0: NodalField,
    cfg: &SimulationConfig,
    mut observe: impl FnMut(&StepState),
) -> Result<Trajectory> {
    let mut stepper = Stepper::new(ops, cfg, u0.components())?;
    let mut state = stepper.initial_state(u0)?;
    observe(&state);
    let initial = state.report.clone();
    let mut steps = Vec::with_capacity(cfg.params.n_steps);
    let mut dissipated = 0.0;
    for _ in 0..cfg.params.n_steps {
        state = stepper.step(&state)?;
        observe(&state);
        dissipated += state.report.dissipation;
        steps.push(state.report.clone());
    }
    let half_gamma = 0.5 * cfg.params.gamma;
    let e0 = half_gamma * initial.energy;
    let defect = (dissipated + half_gamma * state.report.energy - e0).abs();
    let global_residual = if e0 > 0.0 { defect / e0 } else { defect };
    Ok(Trajectory {
        initial,
        steps,
        final_state: state,
        global_residual,
    })
}

pub const STEP_CSV_HEADER: &str = "step,time,energy,dissipation,energy_residual,min_norm,max_norm,fp_iters,q_negnorm";

/// Writes the per-step log; absent values are left blank.
pub fn write_step_csv<'r, W: Write>(mut w: W, reports: impl IntoIterator<Item = &'r StepReport>) -> Result<()> {
    writeln!(w, "{STEP_CSV_HEADER}")?;
    for r in reports {
        let fp = r.fp_iters.map(|v| v.to_string()).unwrap_or_default();
        let qn = r.q_negnorm.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.step, r.time, r.energy, r.dissipation, r.energy_residual, r.min_norm, r.max_norm, fp, qn
        )?;
    }
    Ok(())
}
