//! P1 operators and nodal constructs.
//!
//! Vector fields are stored node-interleaved: component `i` of vertex `a`
//! lives at index `a * components + i`, matching [`SparseOperator::kron_identity`].

use crate::error::{Error, Result};
use crate::linsolve::{solve_spd, SpdMethod};
use crate::mesh::Mesh;
use crate::quadrature::SimplexRule;
use crate::sparse::SparseOperator;

/// Default guard below which a nodal vector counts as zero.
pub const NORM_GUARD: f64 = 1e-12;

/// Per-vertex values of a (scalar or vector) P1 function.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    components: usize,
    values: Vec<f64>,
}

impl NodalField {
    pub fn zeros(n_vertices: usize, components: usize) -> Self {
        Self {
            components,
            values: vec![0.0; n_vertices * components],
        }
    }

    pub fn from_values(components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 || values.len() % components != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not split into {components}-vectors",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { vertex: k / components });
        }
        Ok(Self { components, values })
    }

    /// Same value at every vertex.
    pub fn constant(n_vertices: usize, value: &[f64]) -> Self {
        Self {
            components: value.len(),
            values: value.repeat(n_vertices),
        }
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_vertices(&self) -> usize {
        self.values.len() / self.components
    }

    pub fn at(&self, a: usize) -> &[f64] {
        &self.values[a * self.components..(a + 1) * self.components]
    }

    pub fn at_mut(&mut self, a: usize) -> &mut [f64] {
        &mut self.values[a * self.components..(a + 1) * self.components]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Values of component `i` at every vertex.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.values.iter().skip(i).step_by(self.components).copied().collect()
    }

    /// Euclidean norm of the nodal vector at every vertex.
    pub fn nodal_norms(&self) -> Vec<f64> {
        self.values
            .chunks(self.components)
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect()
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            components: self.components,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.components != other.components || self.values.len() != other.values.len() {
            return Err(Error::ShapeMismatch(format!(
                "fields with {}x{} and {}x{} values",
                self.n_vertices(),
                self.components,
                other.n_vertices(),
                other.components
            )));
        }
        Ok(())
    }

    pub(crate) fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.n_vertices() != mesh.n_vertices() {
            return Err(Error::ShapeMismatch(format!(
                "field has {} vertices, mesh has {}",
                self.n_vertices(),
                mesh.n_vertices()
            )));
        }
        Ok(())
    }

    /// Value of the P1 interpolant in cell `c` at barycentric coordinates `bary`.
    pub fn eval_in_cell(&self, mesh: &Mesh, c: usize, bary: &[f64], out: &mut [f64]) {
        out[..self.components].fill(0.0);
        for (&v, &l) in mesh.cell(c).iter().zip(bary) {
            for (o, x) in out.iter_mut().zip(self.at(v)) {
                *o += l * x;
            }
        }
    }

    /// Constant gradient of component `i` on cell `c`.
    pub fn grad_in_cell(&self, mesh: &Mesh, c: usize, i: usize) -> [f64; 3] {
        let geo = mesh.cell_geometry(c);
        let mut g = [0.0; 3];
        for (k, &v) in mesh.cell(c).iter().enumerate() {
            let val = self.at(v)[i];
            for d in 0..3 {
                g[d] += val * geo.grads[k][d];
            }
        }
        g
    }
}

/// Diagonal of basis-function integrals `mu_a = ∫ φ_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct LumpedMass {
    weights: Vec<f64>,
}

impl LumpedMass {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Something that can be evaluated at a point of a known cell.
pub trait FieldSource {
    fn components(&self) -> usize;

    /// Evaluates at the point `x` with barycentric coordinates `bary` in cell `c`.
    fn eval(&self, mesh: &Mesh, c: usize, bary: &[f64], x: &[f64], out: &mut [f64]);
}

/// A closed-form field `x -> f(x)`.
pub struct PointFn<F> {
    components: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> PointFn<F> {
    pub fn new(components: usize, f: F) -> Self {
        Self { components, f }
    }

    pub fn call(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

impl<F: Fn(&[f64], &mut [f64])> FieldSource for PointFn<F> {
    fn components(&self) -> usize {
        self.components
    }

    fn eval(&self, _mesh: &Mesh, _c: usize, _bary: &[f64], x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

impl FieldSource for NodalField {
    fn components(&self) -> usize {
        self.components
    }

    fn eval(&self, mesh: &Mesh, c: usize, bary: &[f64], _x: &[f64], out: &mut [f64]) {
        self.eval_in_cell(mesh, c, bary, out)
    }
}

/// Element loop with a deterministic (cell-ordered) accumulation.
fn assemble_pairs(
    mesh: &Mesh,
    local: impl Fn(usize, usize, &crate::mesh::CellGeometry) -> f64,
) -> Result<Vec<(usize, usize, f64)>> {
    let n = mesh.dim() + 1;
    let mut t = Vec::with_capacity(mesh.n_cells() * n * n);
    for c in 0..mesh.n_cells() {
        let geo = mesh.cell_geometry(c);
        if !(geo.volume > 0.0) {
            return Err(Error::DegenerateCell {
                cell: c,
                volume: geo.volume,
            });
        }
        let cell = mesh.cell(c);
        for i in 0..n {
            for j in 0..n {
                t.push((cell[i], cell[j], local(i, j, &geo)));
            }
        }
    }
    Ok(t)
}

/// Stiffness matrix `K_ab = (∇φ_a, ∇φ_b)`.
pub fn assemble_stiffness(mesh: &Mesh) -> Result<SparseOperator> {
    let t = assemble_pairs(mesh, |i, j, geo| {
        geo.volume * (0..3).map(|d| geo.grads[i][d] * geo.grads[j][d]).sum::<f64>()
    })?;
    let nv = mesh.n_vertices();
    SparseOperator::from_triplets(nv, nv, &t, true)
}

/// Consistent mass matrix `M_ab = (φ_a, φ_b)`.
pub fn assemble_mass(mesh: &Mesh) -> Result<SparseOperator> {
    let d = mesh.dim() as f64;
    let denom = (d + 1.0) * (d + 2.0);
    let t = assemble_pairs(mesh, |i, j, geo| geo.volume * if i == j { 2.0 } else { 1.0 } / denom)?;
    let nv = mesh.n_vertices();
    SparseOperator::from_triplets(nv, nv, &t, true)
}

/// Lumped mass `mu_a`, accumulated geometrically as `|K| / (dim + 1)` over the
/// cells incident to `a`.
pub fn assemble_lumped_mass(mesh: &Mesh) -> LumpedMass {
    let share = 1.0 / (mesh.dim() + 1) as f64;
    let mut weights = vec![0.0; mesh.n_vertices()];
    for c in 0..mesh.n_cells() {
        let vol = mesh.cell_volume(c);
        for &v in mesh.cell(c) {
            weights[v] += vol * share;
        }
    }
    LumpedMass { weights }
}

/// Lumped inner product `(u, v)_h = Σ_a mu_a u_a · v_a`.
pub fn inner_h(u: &NodalField, v: &NodalField, lm: &LumpedMass) -> Result<f64> {
    u.check_same_shape(v)?;
    if u.n_vertices() != lm.len() {
        return Err(Error::ShapeMismatch(format!(
            "fields have {} vertices, lumped mass has {}",
            u.n_vertices(),
            lm.len()
        )));
    }
    let c = u.components();
    Ok(lm
        .weights
        .iter()
        .enumerate()
        .map(|(a, mu)| {
            let (ua, va) = (&u.values[a * c..(a + 1) * c], &v.values[a * c..(a + 1) * c]);
            mu * ua.iter().zip(va).map(|(x, y)| x * y).sum::<f64>()
        })
        .sum())
}

/// `‖u‖_h`.
pub fn norm_h(u: &NodalField, lm: &LumpedMass) -> Result<f64> {
    Ok(inner_h(u, u, lm)?.sqrt())
}

/// Nodal interpolation: evaluates `f` at every vertex. Non-finite values are
/// reported, never perturbed away.
pub fn nodal_interpolate<F>(mesh: &Mesh, components: usize, f: F) -> Result<NodalField>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut values = vec![0.0; mesh.n_vertices() * components];
    for (a, out) in values.chunks_mut(components).enumerate() {
        f(mesh.vertex(a), out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { vertex: a });
        }
    }
    Ok(NodalField { components, values })
}

/// Load vector `b_a = ∫ f φ_a` for a scalar source, by quadrature.
pub fn load_vector(mesh: &Mesh, f: &dyn FieldSource, rule: &SimplexRule) -> Vec<f64> {
    let mut b = vec![0.0; mesh.n_vertices()];
    let mut x = [0.0; 3];
    let mut val = [0.0];
    for c in 0..mesh.n_cells() {
        let vol = mesh.cell_volume(c);
        let cell = mesh.cell(c);
        for (bary, w) in rule.iter() {
            mesh.map_point(c, bary, &mut x);
            f.eval(mesh, c, bary, &x[..mesh.dim()], &mut val);
            for (k, &v) in cell.iter().enumerate() {
                b[v] += vol * w * val[0] * bary[k];
            }
        }
    }
    b
}

/// L² projection of a scalar source onto P1: solves `M q = b`, `b_a = ∫ f φ_a`.
pub fn l2_project(mesh: &Mesh, mass: &SparseOperator, f: &dyn FieldSource, quad_degree: usize) -> Result<NodalField> {
    if f.components() != 1 {
        return Err(Error::ShapeMismatch(
            "L2 projection is defined for scalar sources".into(),
        ));
    }
    if mass.n_rows() != mesh.n_vertices() {
        return Err(Error::ShapeMismatch("mass matrix does not match the mesh".into()));
    }
    let rule = SimplexRule::new(mesh.dim(), quad_degree);
    let b = load_vector(mesh, f, &rule);
    let q = solve_spd(mass, &b, 1e-12, SpdMethod::Direct)?;
    NodalField::from_values(1, q)
}

/// Normalizes every nodal vector to unit length.
pub fn normalize_nodal(u: &NodalField) -> Result<NodalField> {
    normalize_nodal_with_guard(u, NORM_GUARD)
}

pub fn normalize_nodal_with_guard(u: &NodalField, guard: f64) -> Result<NodalField> {
    let mut out = u.clone();
    for (a, v) in out.values.chunks_mut(u.components).enumerate() {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n >= guard) {
            return Err(Error::NearZeroNorm {
                vertex: a,
                norm: n,
                guard,
            });
        }
        v.iter_mut().for_each(|x| *x /= n);
    }
    Ok(out)
}

/// `‖∇u_h‖² = Σ_i u_iᵀ K u_i` over components.
pub fn dirichlet_energy(u: &NodalField, stiffness: &SparseOperator) -> Result<f64> {
    if u.n_vertices() != stiffness.n_rows() {
        return Err(Error::ShapeMismatch(format!(
            "field has {} vertices, stiffness has {} rows",
            u.n_vertices(),
            stiffness.n_rows()
        )));
    }
    let c = u.components();
    let mut e = 0.0;
    for a in 0..stiffness.n_rows() {
        let ua = u.at(a);
        for (b, k) in stiffness.row(a) {
            let ub = u.at(b);
            e += k * (0..c).map(|i| ua[i] * ub[i]).sum::<f64>();
        }
    }
    Ok(e)
}

/// `∫_K |∇u_h|²` summed over the given cells.
pub fn cell_energy(mesh: &Mesh, u: &NodalField, cells: impl IntoIterator<Item = usize>) -> f64 {
    cells
        .into_iter()
        .map(|c| {
            let vol = mesh.cell_volume(c);
            (0..u.components())
                .map(|i| {
                    let g = u.grad_in_cell(mesh, c, i);
                    vol * g.iter().map(|x| x * x).sum::<f64>()
                })
                .sum::<f64>()
        })
        .sum()
}
