//! Flat `key = value` experiment configuration.
//!
//! One setting per line; `#` starts a comment. Keys are listed in
//! [`ExperimentConfig::set`]. Settings that depend on the experiment (time
//! step, diffusion coefficient, grids) stay unset until [`ExperimentConfig`]
//! resolves them for a given experiment.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::SingularIC;
use crate::error::{Error, Result};
use crate::linsolve::SaddleMethod;
use crate::mesh::{BoxDomain, DiagonalPattern, DiagonalPhase};
use crate::schemes::{MultiplierMass, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    ConvergenceSpace,
    ConvergenceTime,
    BarrierScan,
    Dynamics,
    CheckMesh,
}

impl ExperimentKind {
    pub const ALL: [Self; 5] = [
        Self::ConvergenceSpace,
        Self::ConvergenceTime,
        Self::BarrierScan,
        Self::Dynamics,
        Self::CheckMesh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ConvergenceSpace => "convergence-space",
            Self::ConvergenceTime => "convergence-time",
            Self::BarrierScan => "barrier-scan",
            Self::Dynamics => "dynamics",
            Self::CheckMesh => "check-mesh",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Initial condition of a dynamics run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialCondition {
    /// Two point singularities blended along the first axis.
    #[default]
    Singular,
    /// The smooth exact solution at `t = 0`.
    Smooth,
}

impl FromStr for InitialCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "singular" => Ok(Self::Singular),
            "smooth" => Ok(Self::Smooth),
            _ => Err(Error::Config(format!(
                "unknown initial condition `{s}` (expected singular or smooth)"
            ))),
        }
    }
}

/// Inclusive integer range written `a..b` or as a single value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexRange {
    pub first: u32,
    pub last: u32,
}

impl IndexRange {
    pub fn iter(&self) -> impl Iterator<Item = u32> {
        self.first..=self.last
    }
}

impl FromStr for IndexRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid range `{s}` (expected `a..b` or a single integer)"));
        let (a, b) = match s.split_once("..") {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (s.trim(), s.trim()),
        };
        let first: u32 = a.parse().map_err(|_| bad())?;
        let last: u32 = b.parse().map_err(|_| bad())?;
        if last < first {
            return Err(Error::Config(format!("range `{s}` is empty")));
        }
        Ok(Self { first, last })
    }
}

impl fmt::Display for IndexRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.first, self.last)
    }
}

/// Cell counts of a structured grid, written `34x17` or `20x17x17`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec(pub Vec<usize>);

impl GridSpec {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let counts: Vec<usize> = s
            .split('x')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("invalid grid `{s}` (expected e.g. 34x17)")))?;
        if !(2..=3).contains(&counts.len()) || counts.contains(&0) {
            return Err(Error::Config(format!("grid `{s}` needs two or three positive counts")));
        }
        Ok(Self(counts))
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub scheme: Scheme,
    pub solver: SaddleMethod,
    pub solver_tol: f64,
    pub solver_maxiter: usize,
    pub multiplier: MultiplierMass,
    pub gamma: Option<f64>,
    pub alpha: f64,
    pub k: Option<f64>,
    pub t_final: Option<f64>,
    /// Refinement indices `i` with `h = 2^-i` on `(-1, 1)²`.
    pub levels: IndexRange,
    /// Refinement index of a time-convergence study.
    pub level: u32,
    /// Time-step indices `j` with `k = k0 2^-j`.
    pub steps: IndexRange,
    pub k0: f64,
    pub reference_j: Option<u32>,
    pub quad_order: usize,
    pub fp_tol: f64,
    pub fp_maxiter: usize,
    pub renormalize: bool,
    pub dim: usize,
    pub grids: Vec<GridSpec>,
    pub pattern: DiagonalPattern,
    pub phase: DiagonalPhase,
    pub domain: Option<BoxDomain>,
    pub ic: InitialCondition,
    pub delta: Option<f64>,
    /// Axis the scan moves along.
    pub path_axis: usize,
    pub path_start: f64,
    pub path_end: f64,
    /// Fixed values of the other coordinates, in axis order.
    pub path_offset: Option<Vec<f64>>,
    pub samples_per_cell: usize,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            scheme: Scheme::CrankNicolson,
            solver: SaddleMethod::Direct,
            solver_tol: 1e-13,
            solver_maxiter: 1000,
            multiplier: MultiplierMass::Lumped,
            gamma: None,
            alpha: 0.0,
            k: None,
            t_final: None,
            levels: IndexRange { first: 1, last: 4 },
            level: 3,
            steps: IndexRange { first: 0, last: 5 },
            k0: 0.1,
            reference_j: None,
            quad_order: 4,
            fp_tol: 1e-13,
            fp_maxiter: 100,
            renormalize: false,
            dim: 2,
            grids: Vec::new(),
            pattern: DiagonalPattern::Checkerboard,
            phase: DiagonalPhase::Even,
            domain: None,
            ic: InitialCondition::Singular,
            delta: None,
            path_axis: 0,
            path_start: -2.0,
            path_end: 0.0,
            path_offset: None,
            samples_per_cell: 8,
            output: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "invalid value `{value}` for `{key}` (expected true or false)"
        ))),
    }
}

fn parse_solver(value: &str) -> Result<SaddleMethod> {
    match value {
        "direct" => Ok(SaddleMethod::Direct),
        "uzawa" => Ok(SaddleMethod::Uzawa),
        _ => Err(Error::Config(format!(
            "unknown solver `{value}` (expected direct or uzawa)"
        ))),
    }
}

impl ExperimentConfig {
    /// Parses configuration text; repeated keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: `{key}` is set twice", n + 1)));
            }
            cfg.set(key, value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_config_prefix(e))))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_config_prefix(e))))
    }

    /// Sets one key; later calls override earlier ones.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = Some(value.parse()?),
            "scheme" => self.scheme = value.parse()?,
            "solver" => self.solver = parse_solver(value)?,
            "solver_tol" => self.solver_tol = parse(key, value)?,
            "solver_maxiter" => self.solver_maxiter = parse(key, value)?,
            "multiplier" => self.multiplier = value.parse()?,
            "gamma" => self.gamma = Some(parse(key, value)?),
            "alpha" => self.alpha = parse(key, value)?,
            "k" => self.k = Some(parse(key, value)?),
            "t_final" => self.t_final = Some(parse(key, value)?),
            "levels" => self.levels = value.parse()?,
            "level" => self.level = parse(key, value)?,
            "steps" => self.steps = value.parse()?,
            "k0" => self.k0 = parse(key, value)?,
            "reference_j" => {
                self.reference_j = if value == "none" {
                    None
                } else {
                    Some(parse(key, value)?)
                };
            }
            "quad_order" => self.quad_order = parse(key, value)?,
            "fp_tol" => self.fp_tol = parse(key, value)?,
            "fp_maxiter" => self.fp_maxiter = parse(key, value)?,
            "renormalize" => self.renormalize = parse_bool(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            "grids" => {
                self.grids = value
                    .split(',')
                    .map(|g| g.trim().parse())
                    .collect::<Result<Vec<GridSpec>>>()?;
            }
            "pattern" => self.pattern = value.parse()?,
            "phase" => self.phase = value.parse()?,
            "domain" => {
                let v = parse_list(key, value)?;
                if v.len() % 2 != 0 || !(4..=6).contains(&v.len()) {
                    return Err(Error::Config(format!(
                        "`domain` needs lo,hi pairs for two or three axes, got `{value}`"
                    )));
                }
                let lo: Vec<f64> = v.iter().step_by(2).copied().collect();
                let hi: Vec<f64> = v.iter().skip(1).step_by(2).copied().collect();
                self.domain = Some(BoxDomain::new(&lo, &hi).map_err(|e| Error::Config(e.to_string()))?);
            }
            "ic" => self.ic = value.parse()?,
            "delta" => self.delta = Some(parse(key, value)?),
            "path_axis" => self.path_axis = parse(key, value)?,
            "path_start" => self.path_start = parse(key, value)?,
            "path_end" => self.path_end = parse(key, value)?,
            "path_offset" => self.path_offset = Some(parse_list(key, value)?),
            "samples_per_cell" => self.samples_per_cell = parse(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{pair}` is not of the form key=value")))?;
        self.set(k.trim(), v.trim())
    }

    /// Diffusion coefficient: 0.01 for the convergence studies, 1 otherwise.
    pub fn gamma_for(&self, kind: ExperimentKind) -> f64 {
        self.gamma.unwrap_or(match kind {
            ExperimentKind::ConvergenceSpace | ExperimentKind::ConvergenceTime => 0.01,
            _ => 1.0,
        })
    }

    /// Time step: `0.1 · 2⁻⁴` for space convergence, `1e-3` for dynamics.
    pub fn k_for(&self, kind: ExperimentKind) -> f64 {
        self.k.unwrap_or(match kind {
            ExperimentKind::ConvergenceSpace => 0.1 / 16.0,
            _ => 1e-3,
        })
    }

    pub fn t_final_for(&self, kind: ExperimentKind) -> f64 {
        self.t_final.unwrap_or(match kind {
            ExperimentKind::Dynamics => 0.1,
            _ => 1.0,
        })
    }

    pub fn delta_for(&self, dim: usize) -> f64 {
        self.delta.unwrap_or(SingularIC::canonical(dim).delta)
    }

    /// Box of a grid experiment; defaults to the two-singularity box.
    pub fn domain_for(&self, dim: usize) -> Result<BoxDomain> {
        match &self.domain {
            Some(d) if d.dim() != dim => Err(Error::Config(format!(
                "domain has {} axes but the grid has {dim}",
                d.dim()
            ))),
            Some(d) => Ok(d.clone()),
            None => Ok(SingularIC::domain(dim)),
        }
    }

    /// Grids of a grid experiment; the default is the coarsest isotropic
    /// grid of the two-singularity box.
    pub fn grids_for(&self) -> Vec<GridSpec> {
        if !self.grids.is_empty() {
            return self.grids.clone();
        }
        vec![GridSpec(if self.dim == 3 { vec![20, 10, 10] } else { vec![34, 17] })]
    }

    /// Checks the invariants relevant to `kind`, naming the violated one.
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if let Some(e) = self.experiment {
            if e != kind {
                return fail(format!("config is for `{e}` but `{kind}` was requested"));
            }
        }
        if !(2..=3).contains(&self.dim) {
            return fail(format!("dim must be 2 or 3, got {}", self.dim));
        }
        for g in &self.grids {
            if g.dim() != self.dim {
                return fail(format!("grid {g} does not have dim = {} axes", self.dim));
            }
        }
        if self.quad_order == 0 {
            return fail("quad_order must be positive".into());
        }
        if !(self.fp_tol > 0.0) || self.fp_maxiter == 0 {
            return fail("fp_tol and fp_maxiter must be positive".into());
        }
        if !(self.solver_tol > 0.0) || self.solver_maxiter == 0 {
            return fail("solver_tol and solver_maxiter must be positive".into());
        }
        let gamma = self.gamma_for(kind);
        if !(gamma > 0.0) {
            return fail(format!("gamma must be positive, got {gamma}"));
        }
        if !(self.alpha >= 0.0) {
            return fail(format!("alpha must be nonnegative, got {}", self.alpha));
        }
        let uses_dynamics = matches!(
            kind,
            ExperimentKind::ConvergenceSpace | ExperimentKind::ConvergenceTime | ExperimentKind::Dynamics
        );
        if uses_dynamics {
            let components = if kind == ExperimentKind::Dynamics { self.dim } else { 2 };
            if self.alpha != 0.0 && components == 2 {
                return fail("alpha must be 0 for two-component fields".into());
            }
            if self.alpha != 0.0 && self.scheme == Scheme::CrankNicolson {
                return fail("crank-nicolson requires alpha = 0".into());
            }
            if self.alpha != 0.0 && self.solver == SaddleMethod::Uzawa {
                return fail("the uzawa solver requires a symmetric block, i.e. alpha = 0".into());
            }
        }
        match kind {
            ExperimentKind::ConvergenceSpace => {
                if self.levels.last > 12 {
                    return fail(format!("levels {} reach beyond i = 12", self.levels));
                }
            }
            ExperimentKind::ConvergenceTime => {
                if self.level > 12 {
                    return fail(format!("level {} is beyond i = 12", self.level));
                }
                if !(self.k0 > 0.0) {
                    return fail(format!("k0 must be positive, got {}", self.k0));
                }
                if self.steps.last > 20 || self.reference_j.is_some_and(|r| r > 20) {
                    return fail("time-step indices must not exceed 20".into());
                }
                if let Some(r) = self.reference_j {
                    if r <= self.steps.last + 1 {
                        return fail(format!(
                            "reference_j = {r} must exceed the finest compared index {}",
                            self.steps.last + 1
                        ));
                    }
                }
            }
            ExperimentKind::BarrierScan => {
                if self.samples_per_cell < 8 {
                    return fail(format!(
                        "samples_per_cell must be at least 8, got {}",
                        self.samples_per_cell
                    ));
                }
                if self.path_axis >= self.dim {
                    return fail(format!("path_axis must be below dim = {}", self.dim));
                }
                if !(self.path_end > self.path_start) {
                    return fail("path_end must exceed path_start".into());
                }
                if let Some(o) = &self.path_offset {
                    if o.len() + 1 != self.dim {
                        return fail(format!("path_offset needs {} coordinates", self.dim - 1));
                    }
                }
                self.domain_for(self.dim)?;
            }
            ExperimentKind::Dynamics => {
                if self.ic == InitialCondition::Smooth && self.dim != 2 {
                    return fail("the smooth initial condition is two-dimensional".into());
                }
                if !(self.delta_for(self.dim) >= 0.0) {
                    return fail("delta must be nonnegative".into());
                }
                self.domain_for(self.dim)?;
            }
            ExperimentKind::CheckMesh => {
                self.domain_for(self.dim)?;
            }
        }
        if uses_dynamics {
            let k = match kind {
                ExperimentKind::ConvergenceTime => self.k0,
                _ => self.k_for(kind),
            };
            let t = self.t_final_for(kind);
            if !(k > 0.0) || !(t >= 0.0) {
                return fail(format!("time step {k} and final time {t} must be positive"));
            }
        }
        Ok(())
    }
}

fn strip_config_prefix(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}
