//! Exact solutions, error norms, convergence rates and the singular-field
//! diagnostics used by the experiments.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::assembly::{cell_energy, dirichlet_energy, load_vector, nodal_interpolate, NodalField, PointFn};
use crate::error::{Error, Result};
use crate::mesh::{BoxDomain, Mesh};
use crate::quadrature::SimplexRule;
use crate::schemes::Operators;
use crate::sparse::SparseOperator;

/// Smooth exact solution of the undamped 2D flow on `(-1, 1)²`:
/// `u = (cos θ, sin θ)` with `θ = Θ e^{-γ(kx² + ky²)t} cos(kx x) cos(ky y)`
/// and multiplier `q = -|∇θ|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothTestProblem {
    pub theta_amp: f64,
    pub kx: f64,
    pub ky: f64,
    pub gamma: f64,
}

impl Default for SmoothTestProblem {
    fn default() -> Self {
        Self {
            theta_amp: PI,
            kx: PI,
            ky: 2.0 * PI,
            gamma: 0.01,
        }
    }
}

impl SmoothTestProblem {
    pub fn domain() -> BoxDomain {
        BoxDomain::new(&[-1.0, -1.0], &[1.0, 1.0]).expect("valid box")
    }

    fn decay(&self, t: f64) -> f64 {
        self.theta_amp * (-self.gamma * (self.kx * self.kx + self.ky * self.ky) * t).exp()
    }

    pub fn theta(&self, x: &[f64], t: f64) -> f64 {
        self.decay(t) * (self.kx * x[0]).cos() * (self.ky * x[1]).cos()
    }

    pub fn grad_theta(&self, x: &[f64], t: f64) -> [f64; 2] {
        let e = self.decay(t);
        let (cx, sx) = ((self.kx * x[0]).cos(), (self.kx * x[0]).sin());
        let (cy, sy) = ((self.ky * x[1]).cos(), (self.ky * x[1]).sin());
        [-e * self.kx * sx * cy, -e * self.ky * cx * sy]
    }

    pub fn u(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let th = self.theta(x, t);
        out[0] = th.cos();
        out[1] = th.sin();
    }

    /// `∂u_i/∂x_j` stored row-major in `out[2 i + j]`.
    pub fn grad_u(&self, x: &[f64], t: f64, out: &mut [f64]) {
        let th = self.theta(x, t);
        let g = self.grad_theta(x, t);
        let (s, c) = th.sin_cos();
        out[0] = -s * g[0];
        out[1] = -s * g[1];
        out[2] = c * g[0];
        out[3] = c * g[1];
    }

    pub fn q(&self, x: &[f64], t: f64) -> f64 {
        let g = self.grad_theta(x, t);
        -(g[0] * g[0] + g[1] * g[1])
    }

    pub fn grad_q(&self, x: &[f64], t: f64) -> [f64; 2] {
        let e = self.decay(t);
        let th = self.theta(x, t);
        let g = self.grad_theta(x, t);
        let txx = -self.kx * self.kx * th;
        let tyy = -self.ky * self.ky * th;
        let txy = e * self.kx * self.ky * (self.kx * x[0]).sin() * (self.ky * x[1]).sin();
        [-2.0 * (g[0] * txx + g[1] * txy), -2.0 * (g[0] * txy + g[1] * tyy)]
    }
}

/// Two-singularity initial field `u₀ = ũ₀/|ũ₀|` with
/// `ũ₀ = w (x + δe₁) + (1 - w)(-(x - δe₁))` and `w = 1/(1 + e^{5x})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularIC {
    pub delta: f64,
    pub dim: usize,
}

impl SingularIC {
    /// `δ = 0.0625` in 2D, `δ = 0.5` in 3D.
    pub fn canonical(dim: usize) -> Self {
        Self {
            delta: if dim == 2 { 0.0625 } else { 0.5 },
            dim,
        }
    }

    /// `(-2, 2) × (-1, 1)^{dim-1}`.
    pub fn domain(dim: usize) -> BoxDomain {
        let mut lo = vec![-1.0; dim];
        let mut hi = vec![1.0; dim];
        lo[0] = -2.0;
        hi[0] = 2.0;
        BoxDomain::new(&lo, &hi).expect("valid box")
    }

    pub fn blend(x0: f64) -> f64 {
        1.0 / (1.0 + (5.0 * x0).exp())
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let w = Self::blend(x[0]);
        let mut n2 = 0.0;
        for i in 0..self.dim {
            let shift = if i == 0 { self.delta } else { 0.0 };
            let v = w * (x[i] + shift) - (1.0 - w) * (x[i] - shift);
            out[i] = v;
            n2 += v * v;
        }
        let n = n2.sqrt();
        if !(n > 0.0) {
            return Err(Error::Singular(x[..self.dim].to_vec()));
        }
        out[..self.dim].iter_mut().for_each(|v| *v /= n);
        Ok(())
    }

    /// Nodal interpolant of the normalized field.
    pub fn interpolate(&self, mesh: &Mesh) -> Result<NodalField> {
        nodal_interpolate(mesh, self.dim, |x, out| {
            if self.eval(x, out).is_err() {
                out.fill(f64::NAN);
            }
        })
    }
}

/// Error norms of a nodal field against a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub l1: f64,
    pub l2: f64,
    /// Maximum over quadrature points and vertices.
    pub linf: f64,
    /// Full `H¹` norm (`L²` plus gradient part).
    pub h1: f64,
}

/// Error norms of `uh` against `value`/`grad` by per-cell quadrature. Pointwise
/// errors use the Euclidean norm over components; `grad` writes `∂v_i/∂x_j` to
/// `out[i * dim + j]`.
pub fn error_norms<V, G>(mesh: &Mesh, uh: &NodalField, value: V, grad: G, quad_degree: usize) -> Result<ErrorNorms>
where
    V: Fn(&[f64], &mut [f64]),
    G: Fn(&[f64], &mut [f64]),
{
    uh.check_mesh(mesh)?;
    let dim = mesh.dim();
    let m = uh.components();
    let rule = SimplexRule::new(dim, quad_degree);
    let mut x = vec![0.0; dim];
    let mut ex = vec![0.0; m];
    let mut eh = vec![0.0; m];
    let mut gx = vec![0.0; m * dim];
    let (mut l1, mut l2, mut linf, mut h1) = (0.0, 0.0, 0.0f64, 0.0);
    for c in 0..mesh.n_cells() {
        let vol = mesh.cell_volume(c);
        let gh: Vec<[f64; 3]> = (0..m).map(|i| uh.grad_in_cell(mesh, c, i)).collect();
        for (bary, w) in rule.iter() {
            mesh.map_point(c, bary, &mut x);
            value(&x, &mut ex);
            uh.eval_in_cell(mesh, c, bary, &mut eh);
            let e2: f64 = ex.iter().zip(&eh).map(|(a, b)| (a - b) * (a - b)).sum();
            l1 += vol * w * e2.sqrt();
            l2 += vol * w * e2;
            linf = linf.max(e2.sqrt());
            grad(&x, &mut gx);
            let mut g2 = 0.0;
            for i in 0..m {
                for j in 0..dim {
                    let d = gx[i * dim + j] - gh[i][j];
                    g2 += d * d;
                }
            }
            h1 += vol * w * g2;
        }
    }
    for a in 0..mesh.n_vertices() {
        value(mesh.vertex(a), &mut ex);
        let e2: f64 = ex.iter().zip(uh.at(a)).map(|(a, b)| (a - b) * (a - b)).sum();
        linf = linf.max(e2.sqrt());
    }
    Ok(ErrorNorms {
        l1,
        l2: l2.sqrt(),
        linf,
        h1: (l2 + h1).sqrt(),
    })
}

pub fn error_norms_u(
    mesh: &Mesh,
    uh: &NodalField,
    problem: &SmoothTestProblem,
    t: f64,
    quad_degree: usize,
) -> Result<ErrorNorms> {
    error_norms(
        mesh,
        uh,
        |x, o| problem.u(x, t, o),
        |x, o| problem.grad_u(x, t, o),
        quad_degree,
    )
}

pub fn error_norms_q(
    mesh: &Mesh,
    qh: &NodalField,
    problem: &SmoothTestProblem,
    t: f64,
    quad_degree: usize,
) -> Result<ErrorNorms> {
    error_norms(
        mesh,
        qh,
        |x, o| o[0] = problem.q(x, t),
        |x, o| o.copy_from_slice(&problem.grad_q(x, t)),
        quad_degree,
    )
}

/// Test space and inner product of the discrete dual norm of `q - q_h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DualNorm {
    /// Interior-vertex P1 functions with the gradient inner product.
    #[default]
    H10,
    /// All P1 functions with the full `H¹` inner product `M + K`.
    H1,
}

impl std::str::FromStr for DualNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h10" => Ok(Self::H10),
            "h1" => Ok(Self::H1),
            _ => Err(Error::Config(format!("unknown dual norm `{s}` (expected h10 or h1)"))),
        }
    }
}

/// Dual-norm surrogate of `q - q_h`: `sup (q - q_h, f) / ‖f‖` over the P1
/// test space of `norm`, evaluated through the Riesz representative.
pub fn negnorm<Q>(
    mesh: &Mesh,
    ops: &Operators,
    qh: &NodalField,
    q: Q,
    quad_degree: usize,
    norm: DualNorm,
) -> Result<f64>
where
    Q: Fn(&[f64]) -> f64,
{
    if qh.components() != 1 || qh.n_vertices() != mesh.n_vertices() {
        return Err(Error::ShapeMismatch(
            "multiplier must be a scalar field on the mesh".into(),
        ));
    }
    if norm == DualNorm::H10 && ops.interior().is_empty() {
        return Err(Error::NoInteriorVertices);
    }
    let rule = SimplexRule::new(mesh.dim(), quad_degree);
    let exact = load_vector(mesh, &PointFn::new(1, |x: &[f64], o: &mut [f64]| o[0] = q(x)), &rule);
    let discrete = ops.mass.mul_vec(qh.values());
    let (b, r) = match norm {
        DualNorm::H10 => {
            let b: Vec<f64> = ops.interior().iter().map(|&a| exact[a] - discrete[a]).collect();
            let r = ops.interior_stiffness_solve(&b).ok_or(Error::NoInteriorVertices)?;
            (b, r)
        }
        DualNorm::H1 => {
            let b: Vec<f64> = exact.iter().zip(&discrete).map(|(e, d)| e - d).collect();
            let r = ops.h1_solve(&b);
            (b, r)
        }
    };
    let s: f64 = r.iter().zip(&b).map(|(r, b)| r * b).sum();
    Ok(s.max(0.0).sqrt())
}

pub fn negnorm_q(
    mesh: &Mesh,
    ops: &Operators,
    qh: &NodalField,
    problem: &SmoothTestProblem,
    t: f64,
    quad_degree: usize,
    norm: DualNorm,
) -> Result<f64> {
    negnorm(mesh, ops, qh, |x| problem.q(x, t), quad_degree, norm)
}

/// Observed orders `ln(e_{i-1}/e_i) / ln(h_{i-1}/h_i)`; the first entry and
/// entries next to a zero error are `None`.
pub fn convergence_rates(errors: &[f64], hs: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != hs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} errors for {} mesh sizes",
            errors.len(),
            hs.len()
        )));
    }
    let mut out = vec![None; errors.len()];
    for i in 1..errors.len() {
        let (e0, e1) = (errors[i - 1], errors[i]);
        if e0 > 0.0 && e1 > 0.0 && hs[i - 1] != hs[i] {
            out[i] = Some((e0 / e1).ln() / (hs[i - 1] / hs[i]).ln());
        }
    }
    Ok(out)
}

/// Discrete `H¹` norm `sqrt(Σ_i v_iᵀ (M + K) v_i)` of a nodal field.
pub fn h1_norm(v: &NodalField, mass: &SparseOperator, stiffness: &SparseOperator) -> Result<f64> {
    let l2 = dirichlet_energy(v, mass)?;
    let g = dirichlet_energy(v, stiffness)?;
    Ok((l2 + g).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoEstimate {
    /// `‖u^k - u^{k/2}‖_{H¹}`.
    pub numerator: f64,
    /// `‖u^{k/2} - u^{k/4}‖_{H¹}`.
    pub denominator: f64,
    /// Ratio; infinite when the denominator vanishes.
    pub rho: f64,
    pub rate: f64,
    pub overflow: bool,
}

/// Time self-convergence ratio of three solutions at steps `k`, `k/2`, `k/4`.
pub fn rho_estimator(u_k: &NodalField, u_k2: &NodalField, u_k4: &NodalField, ops: &Operators) -> Result<RhoEstimate> {
    let num = h1_norm(&u_k.sub(u_k2)?, &ops.mass, &ops.stiffness)?;
    let den = h1_norm(&u_k2.sub(u_k4)?, &ops.mass, &ops.stiffness)?;
    if den == 0.0 {
        if num == 0.0 {
            return Err(Error::InvalidInput(
                "all three solutions coincide; ratio undefined".into(),
            ));
        }
        return Ok(RhoEstimate {
            numerator: num,
            denominator: den,
            rho: f64::INFINITY,
            rate: f64::INFINITY,
            overflow: true,
        });
    }
    let rho = num / den;
    Ok(RhoEstimate {
        numerator: num,
        denominator: den,
        rho,
        rate: rho.log2(),
        overflow: false,
    })
}

/// Nodal interpolant of `(x - x0)/|x - x0|`; fails if `x0` is a vertex.
pub fn interpolate_hedgehog(mesh: &Mesh, x0: &[f64]) -> Result<NodalField> {
    let dim = mesh.dim();
    nodal_interpolate(mesh, dim, |x, out| {
        let mut n2 = 0.0;
        for i in 0..dim {
            out[i] = x[i] - x0[i];
            n2 += out[i] * out[i];
        }
        let n = n2.sqrt();
        out[..dim].iter_mut().for_each(|v| *v /= n);
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierPoint {
    pub x0: Vec<f64>,
    /// `‖∇u_h‖²`, or `None` when `x0` coincides with a vertex.
    pub energy: Option<f64>,
}

/// Dirichlet energy of the interpolated point singularity along a path.
pub fn barrier_scan(mesh: &Mesh, stiffness: &SparseOperator, path: &[Vec<f64>]) -> Result<Vec<BarrierPoint>> {
    if let Some(p) = path.iter().find(|p| p.len() != mesh.dim()) {
        return Err(Error::ShapeMismatch(format!(
            "path point {p:?} does not match mesh dimension {}",
            mesh.dim()
        )));
    }
    path.par_iter()
        .map(|x0| match interpolate_hedgehog(mesh, x0) {
            Ok(u) => Ok(BarrierPoint {
                x0: x0.clone(),
                energy: Some(dirichlet_energy(&u, stiffness)?),
            }),
            Err(Error::NonFinite { .. }) => Ok(BarrierPoint {
                x0: x0.clone(),
                energy: None,
            }),
            Err(e) => Err(e),
        })
        .collect()
}

/// Evenly spaced path along the first axis from `start` to `end` (other
/// coordinates fixed at `offset`).
pub fn axis_path(start: f64, end: f64, samples: usize, offset: &[f64]) -> Vec<Vec<f64>> {
    let n = samples.max(2);
    (0..n)
        .map(|i| {
            let s = start + (end - start) * i as f64 / (n - 1) as f64;
            std::iter::once(s).chain(offset.iter().copied()).collect()
        })
        .collect()
}

/// Typical amplitude of the grid-scale oscillation of a scan: the median over
/// windows of width `period` of the range left after removing a linear trend.
pub fn oscillation_amplitude(s: &[f64], values: &[f64], period: f64) -> Result<f64> {
    if s.len() != values.len() {
        return Err(Error::ShapeMismatch("positions and values differ in length".into()));
    }
    if !(period > 0.0) || s.len() < 3 {
        return Err(Error::InvalidInput(
            "need a positive period and at least three samples".into(),
        ));
    }
    let s0 = s[0];
    let mut ranges = Vec::new();
    let mut start = 0;
    while start < s.len() {
        let w = ((s[start] - s0) / period).floor();
        let mut end = start;
        while end < s.len() && ((s[end] - s0) / period).floor() == w {
            end += 1;
        }
        if end - start >= 3 {
            ranges.push(detrended_range(&s[start..end], &values[start..end]));
        }
        start = end;
    }
    if ranges.is_empty() {
        return Err(Error::InvalidInput("no window holds three samples".into()));
    }
    ranges.sort_by(f64::total_cmp);
    let n = ranges.len();
    Ok(if n % 2 == 1 {
        ranges[n / 2]
    } else {
        0.5 * (ranges[n / 2 - 1] + ranges[n / 2])
    })
}

fn detrended_range(s: &[f64], v: &[f64]) -> f64 {
    let n = s.len() as f64;
    let ms = s.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let sxx: f64 = s.iter().map(|x| (x - ms) * (x - ms)).sum();
    let sxy: f64 = s.iter().zip(v).map(|(x, y)| (x - ms) * (y - mv)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let (lo, hi) = s
        .iter()
        .zip(v)
        .map(|(x, y)| y - mv - slope * (x - ms))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)));
    hi - lo
}

/// Placement of a point singularity relative to one rectangle of a 2D grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularPlacement {
    /// Center of the rectangle, on its diagonal.
    RectangleCenter,
    /// Midpoint of the lower edge of the rectangle.
    EdgeMidpoint,
}

/// Energy contributed by the two triangles of grid rectangle `rect` when the
/// interpolated singularity sits at `placement`.
pub fn local_singular_energy(mesh: &Mesh, rect: [usize; 2], placement: SingularPlacement) -> Result<f64> {
    if mesh.dim() != 2 {
        return Err(Error::InvalidInput(
            "local singular energies are defined on 2D grids".into(),
        ));
    }
    let cells = mesh
        .box_cells(&rect)
        .ok_or_else(|| Error::InvalidInput(format!("rectangle {rect:?} is not part of a structured grid")))?;
    let v00 = mesh.grid_vertex(&rect).expect("rectangle corner");
    let v11 = mesh.grid_vertex(&[rect[0] + 1, rect[1] + 1]).expect("rectangle corner");
    let (a, b) = (mesh.vertex(v00), mesh.vertex(v11));
    let x0 = match placement {
        SingularPlacement::RectangleCenter => [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])],
        SingularPlacement::EdgeMidpoint => [0.5 * (a[0] + b[0]), a[1]],
    };
    let u = interpolate_hedgehog(mesh, &x0)?;
    Ok(cell_energy(mesh, &u, cells))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_stiffness;
    use crate::mesh::build_structured_2d;

    #[test]
    fn smooth_problem_solves_heat_equation() {
        let p = SmoothTestProblem::default();
        let h = 1e-4;
        for &(x, y, t) in &[(0.1, 0.2, 0.0), (-0.7, 0.4, 0.5), (0.33, -0.9, 1.0)] {
            let th = |x: f64, y: f64, t: f64| p.theta(&[x, y], t);
            let dt = (th(x, y, t + h) - th(x, y, t - h)) / (2.0 * h);
            let lap =
                (th(x + h, y, t) + th(x - h, y, t) + th(x, y + h, t) + th(x, y - h, t) - 4.0 * th(x, y, t)) / (h * h);
            assert!((dt - p.gamma * lap).abs() < 1e-5, "{dt} vs {}", p.gamma * lap);
            let mut u = [0.0; 2];
            p.u(&[x, y], t, &mut u);
            assert!((u[0].hypot(u[1]) - 1.0).abs() < 1e-15);
            // Gradients against central differences.
            let gq = p.grad_q(&[x, y], t);
            let fq = (p.q(&[x + h, y], t) - p.q(&[x - h, y], t)) / (2.0 * h);
            assert!((gq[0] - fq).abs() < 1e-4 * (1.0 + fq.abs()));
            let mut g = [0.0; 4];
            p.grad_u(&[x, y], t, &mut g);
            let (mut up, mut um) = ([0.0; 2], [0.0; 2]);
            p.u(&[x, y + h], t, &mut up);
            p.u(&[x, y - h], t, &mut um);
            let fd = [(up[0] - um[0]) / (2.0 * h), (up[1] - um[1]) / (2.0 * h)];
            assert!((g[1] - fd[0]).abs() < 1e-5 * (1.0 + fd[0].abs()));
            assert!((g[3] - fd[1]).abs() < 1e-5 * (1.0 + fd[1].abs()));
        }
    }

    #[test]
    fn singular_ic_limits() {
        assert_eq!(SingularIC::blend(0.0), 0.5);
        let ic = SingularIC::canonical(2);
        let mut out = [0.0; 2];
        ic.eval(&[-30.0, 1.0], &mut out).unwrap();
        let x: [f64; 2] = [-30.0 + ic.delta, 1.0];
        let n = x[0].hypot(x[1]);
        assert!((out[0] - x[0] / n).abs() < 1e-12 && (out[1] - x[1] / n).abs() < 1e-12);
        assert!(ic.eval(&[0.0, 0.0], &mut out).is_ok());
        assert_eq!(SingularIC::canonical(3).delta, 0.5);
    }

    #[test]
    fn interpolant_errors_converge_at_second_order() {
        let p = SmoothTestProblem {
            theta_amp: 1.0,
            kx: 1.0,
            ky: 1.5,
            gamma: 0.01,
        };
        let mut l2 = Vec::new();
        let mut h1 = Vec::new();
        let mut hs = Vec::new();
        for n in [8, 16, 32] {
            let mesh = build_structured_2d(n, n, &SmoothTestProblem::domain()).unwrap();
            let uh = nodal_interpolate(&mesh, 2, |x, o| p.u(x, 0.3, o)).unwrap();
            let e = error_norms_u(&mesh, &uh, &p, 0.3, 4).unwrap();
            l2.push(e.l2);
            h1.push(e.h1);
            hs.push(2.0 / n as f64);
        }
        let r2 = convergence_rates(&l2, &hs).unwrap();
        let r1 = convergence_rates(&h1, &hs).unwrap();
        assert!((r2[2].unwrap() - 2.0).abs() < 0.05, "{r2:?}");
        assert!((r1[2].unwrap() - 1.0).abs() < 0.05, "{r1:?}");
    }

    #[test]
    fn exact_constant_has_zero_error() {
        let p = SmoothTestProblem {
            theta_amp: 0.0,
            ..Default::default()
        };
        let mesh = build_structured_2d(4, 4, &SmoothTestProblem::domain()).unwrap();
        let uh = NodalField::constant(mesh.n_vertices(), &[1.0, 0.0]);
        let e = error_norms_u(&mesh, &uh, &p, 0.5, 4).unwrap();
        assert_eq!(e, ErrorNorms::default());
    }

    #[test]
    fn quadrature_doubling_changes_norms_little() {
        let p = SmoothTestProblem::default();
        let mesh = build_structured_2d(16, 16, &SmoothTestProblem::domain()).unwrap();
        let uh = nodal_interpolate(&mesh, 2, |x, o| p.u(x, 0.0, o)).unwrap();
        let a = error_norms_u(&mesh, &uh, &p, 0.0, 8).unwrap();
        let b = error_norms_u(&mesh, &uh, &p, 0.0, 16).unwrap();
        assert!((a.l2 - b.l2).abs() < 1e-4 * b.l2);
        assert!((a.h1 - b.h1).abs() < 1e-4 * b.h1);
    }

    #[test]
    fn negnorm_vanishes_on_discrete_functions_and_scales() {
        let mesh = build_structured_2d(6, 6, &BoxDomain::unit(2)).unwrap();
        let ops = Operators::new(&mesh).unwrap();
        let f = |x: &[f64]| 2.0 * x[0] - x[1] + 0.5;
        let qh = nodal_interpolate(&mesh, 1, |x, o| o[0] = f(x)).unwrap();
        let g = |x: &[f64]| (3.0 * x[0]).sin() * x[1];
        let zero = NodalField::zeros(mesh.n_vertices(), 1);
        for norm in [DualNorm::H10, DualNorm::H1] {
            assert!(negnorm(&mesh, &ops, &qh, f, 4, norm).unwrap() < 1e-13);
            let base = negnorm(&mesh, &ops, &zero, g, 6, norm).unwrap();
            let scaled = negnorm(&mesh, &ops, &zero, |x| -3.0 * g(x), 6, norm).unwrap();
            assert!(base > 0.0);
            assert!((scaled - 3.0 * base).abs() < 1e-12 * scaled);
        }
    }

    #[test]
    fn full_h1_dual_norm_is_below_l2_norm() {
        // The H¹ test space is larger but its norm dominates the L² norm, so the
        // dual norm of a discrete function never exceeds its L² norm.
        let mesh = build_structured_2d(8, 8, &BoxDomain::unit(2)).unwrap();
        let ops = Operators::new(&mesh).unwrap();
        let qh = nodal_interpolate(&mesh, 1, |x, o| o[0] = (5.0 * x[0]).cos() + x[1]).unwrap();
        let d = negnorm(&mesh, &ops, &qh, |_| 0.0, 4, DualNorm::H1).unwrap();
        let l2 = dirichlet_energy(&qh, &ops.mass).unwrap().sqrt();
        assert!(d > 0.0 && d <= l2 * (1.0 + 1e-12), "{d} {l2}");
        let one = NodalField::constant(mesh.n_vertices(), &[1.0]);
        let c = negnorm(&mesh, &ops, &one, |_| 0.0, 4, DualNorm::H1).unwrap();
        assert!((c - 1.0).abs() < 1e-12, "{c}");
    }

    #[test]
    fn negnorm_needs_interior_vertices() {
        let mesh = build_structured_2d(1, 1, &BoxDomain::unit(2)).unwrap();
        let ops = Operators::new(&mesh).unwrap();
        let q = NodalField::zeros(4, 1);
        assert!(matches!(
            negnorm(&mesh, &ops, &q, |_| 1.0, 4, DualNorm::H10),
            Err(Error::NoInteriorVertices)
        ));
    }

    #[test]
    fn rates() {
        let r = convergence_rates(&[4.0, 1.0, 0.5, 0.0], &[1.0, 0.5, 0.25, 0.125]).unwrap();
        assert_eq!(r[0], None);
        assert!((r[1].unwrap() - 2.0).abs() < 1e-15);
        assert!((r[2].unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(r[3], None);
        let r = convergence_rates(&[1.6e-1, 3.8e-2], &[1.0 / 16.0, 1.0 / 32.0]).unwrap();
        assert!((r[1].unwrap() - 2.07).abs() < 0.01);
        assert!(convergence_rates(&[1.0], &[]).is_err());
    }

    #[test]
    fn rho_of_geometric_sequence() {
        let mesh = build_structured_2d(4, 4, &BoxDomain::unit(2)).unwrap();
        let ops = Operators::new(&mesh).unwrap();
        let base = nodal_interpolate(&mesh, 2, |x, o| {
            o[0] = x[0].cos();
            o[1] = x[1].sin();
        })
        .unwrap();
        let pert = nodal_interpolate(&mesh, 2, |x, o| {
            o[0] = x[0] * x[1];
            o[1] = 1.0 - x[0];
        })
        .unwrap();
        let at = |k: f64| {
            let mut p = pert.clone();
            p.scale(k * k);
            NodalField::from_values(2, base.values().iter().zip(p.values()).map(|(a, b)| a + b).collect()).unwrap()
        };
        let est = rho_estimator(&at(0.1), &at(0.05), &at(0.025), &ops).unwrap();
        assert!((est.rho - 4.0).abs() < 1e-9);
        assert!((est.rate - 2.0).abs() < 1e-9);
        let over = rho_estimator(&at(0.1), &at(0.05), &at(0.05), &ops).unwrap();
        assert!(over.overflow && over.rho.is_infinite());
        assert!(rho_estimator(&base, &base, &base, &ops).is_err());
    }

    #[test]
    fn canonical_local_energies() {
        let target_center = 4.0;
        let target_edge = (22.0 - 2.0 * 5f64.sqrt()) / 5.0;
        for n in [4, 8, 16] {
            let mesh = build_structured_2d(n, n, &BoxDomain::unit(2)).unwrap();
            for rect in [[1, 1], [1, 2]] {
                let c = local_singular_energy(&mesh, rect, SingularPlacement::RectangleCenter).unwrap();
                let e = local_singular_energy(&mesh, rect, SingularPlacement::EdgeMidpoint).unwrap();
                assert!((c - target_center).abs() < 1e-12, "{c}");
                assert!((e - target_edge).abs() < 1e-12, "{e}");
            }
        }
    }

    #[test]
    fn barrier_scan_skips_vertices_and_is_symmetric() {
        let mesh = build_structured_2d(8, 5, &SingularIC::domain(2)).unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        let path = vec![vec![0.0, 0.0], vec![0.3, 0.1], vec![-0.3, 0.1], vec![0.5, 0.0]];
        let scan = barrier_scan(&mesh, &k, &path).unwrap();
        assert!(scan[0].energy.is_some());
        // x = 0.5 is a grid line, y = 0 is not, so this point is not a vertex.
        assert!(scan[3].energy.is_some());
        let on_vertex = barrier_scan(&mesh, &k, &[mesh.vertex(7).to_vec()]).unwrap();
        assert_eq!(on_vertex[0].energy, None);
        // With an even number of columns the alternating pattern is mirror
        // symmetric in x.
        let e1 = scan[1].energy.unwrap();
        let e2 = scan[2].energy.unwrap();
        assert!((e1 - e2).abs() < 1e-12 * e1);
    }

    #[test]
    fn oscillation_of_a_sawtooth() {
        let s: Vec<f64> = (0..400).map(|i| i as f64 * 0.01).collect();
        let v: Vec<f64> = s.iter().map(|x| 3.0 * x + 0.2 * (2.0 * PI * x).sin()).collect();
        let amp = oscillation_amplitude(&s, &v, 1.0).unwrap();
        assert!((amp - 0.4).abs() < 0.1, "{amp}");
        let flat: Vec<f64> = s.iter().map(|x| 1.0 - x).collect();
        assert!(oscillation_amplitude(&s, &flat, 1.0).unwrap() < 1e-12);
    }
}
