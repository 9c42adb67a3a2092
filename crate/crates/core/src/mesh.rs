//! Structured simplicial meshes on axis-aligned boxes.
//!
//! Vertices are numbered lexicographically with `x` running fastest. In two
//! dimensions every grid rectangle is cut along one diagonal; by default the
//! diagonal alternates in a checkerboard pattern over the parity of `i + j`
//! (shifted by [`DiagonalPhase`]), and [`DiagonalPattern`] selects others. In three dimensions every grid box is cut into the six
//! Kuhn tetrahedra sharing the diagonal from its lower to its upper corner.

use std::io::{BufRead, Write};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

/// Tolerance used to flag vertices on the box boundary.
const BOUNDARY_TOL: f64 = 1e-12;

/// Which rectangles receive the `(0,0)-(1,1)` diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagonalPhase {
    /// Rectangle `(i, j)` with `i + j` even is cut along `(0,0)-(1,1)`.
    #[default]
    Even,
    /// Rectangle `(i, j)` with `i + j` odd is cut along `(0,0)-(1,1)`.
    Odd,
}

/// How the diagonal direction varies between grid rectangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagonalPattern {
    /// Alternates with the parity of `i + j`.
    #[default]
    Checkerboard,
    /// Alternates with the parity of the column index `i`.
    Columns,
    /// Alternates with the parity of the row index `j`.
    Rows,
    /// Same diagonal everywhere.
    Uniform,
}

impl std::str::FromStr for DiagonalPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "checkerboard" => Ok(Self::Checkerboard),
            "columns" => Ok(Self::Columns),
            "rows" => Ok(Self::Rows),
            "uniform" => Ok(Self::Uniform),
            _ => Err(Error::Config(format!(
                "unknown diagonal pattern `{s}` (expected checkerboard, columns, rows or uniform)"
            ))),
        }
    }
}

impl std::str::FromStr for DiagonalPhase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(Self::Even),
            "odd" => Ok(Self::Odd),
            _ => Err(Error::Config(format!(
                "unknown diagonal phase `{s}` (expected even or odd)"
            ))),
        }
    }
}

/// Axis-aligned box `[lower, upper]` in `dim` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() || !(2..=3).contains(&lower.len()) {
            return Err(Error::InvalidInput(format!(
                "box corners must both have 2 or 3 entries, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower
            .iter()
            .zip(upper)
            .any(|(l, u)| !(u > l) || !l.is_finite() || !u.is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "box lower corner {lower:?} must lie strictly below upper corner {upper:?}"
            )));
        }
        Ok(Self {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
        })
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }
}

/// Per-cell P1 geometry: volume and the (constant) gradients of the
/// barycentric coordinates, one per local vertex.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub volume: f64,
    pub grads: [[f64; 3]; 4],
}

/// A conforming simplicial triangulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    coords: Vec<f64>,
    cells: Vec<usize>,
    boundary: Vec<bool>,
    domain: BoxDomain,
    spacing: Vec<f64>,
    /// Number of grid intervals per axis for structured meshes.
    grid: Option<Vec<usize>>,
}

impl Mesh {
    /// Assembles a mesh from raw parts and checks every structural invariant.
    ///
    /// `coords` is flat with stride `dim`, `cells` flat with stride `dim + 1`.
    pub fn from_parts(
        dim: usize,
        coords: Vec<f64>,
        cells: Vec<usize>,
        domain: BoxDomain,
        spacing: Vec<f64>,
    ) -> Result<Self> {
        if !(2..=3).contains(&dim) || domain.dim() != dim {
            return Err(Error::InvalidInput(format!(
                "dimension {dim} does not match a 2D/3D box of dimension {}",
                domain.dim()
            )));
        }
        if coords.len() % dim != 0 || cells.len() % (dim + 1) != 0 {
            return Err(Error::InvalidInput(
                "coordinate or connectivity array has a ragged length".into(),
            ));
        }
        let nv = coords.len() / dim;
        let boundary = (0..nv)
            .map(|v| {
                let x = &coords[v * dim..(v + 1) * dim];
                (0..dim).any(|d| {
                    (x[d] - domain.lower[d]).abs() <= BOUNDARY_TOL || (x[d] - domain.upper[d]).abs() <= BOUNDARY_TOL
                })
            })
            .collect();
        let mesh = Self {
            dim,
            coords,
            cells,
            boundary,
            domain,
            spacing,
            grid: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        let nv = self.n_vertices();
        let mut used = vec![false; nv];
        for c in 0..self.n_cells() {
            for &v in self.cell(c) {
                if v >= nv {
                    return Err(Error::InvalidInput(format!(
                        "cell {c} references vertex {v} but the mesh has {nv} vertices"
                    )));
                }
                used[v] = true;
            }
            let vol = self.signed_volume(c);
            if !(vol > 0.0) {
                return Err(Error::DegenerateCell { cell: c, volume: vol });
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidInput(format!("vertex {v} belongs to no cell")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let n = self.dim + 1;
        &self.cells[c * n..(c + 1) * n]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| !self.boundary[v]).collect()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Grid spacing per axis.
    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Interval counts per axis, for structured meshes.
    pub fn grid(&self) -> Option<&[usize]> {
        self.grid.as_deref()
    }

    /// Index of the structured-grid vertex with integer coordinates `idx`.
    pub fn grid_vertex(&self, idx: &[usize]) -> Option<usize> {
        let grid = self.grid.as_ref()?;
        if idx.len() != self.dim || idx.iter().zip(grid).any(|(i, n)| i > n) {
            return None;
        }
        let mut v = 0;
        for d in (0..self.dim).rev() {
            v = v * (grid[d] + 1) + idx[d];
        }
        Some(v)
    }

    /// Cells that subdivide the grid box with lower-corner index `idx`.
    pub fn box_cells(&self, idx: &[usize]) -> Option<Range<usize>> {
        let grid = self.grid.as_ref()?;
        if idx.len() != self.dim || idx.iter().zip(grid).any(|(i, n)| i >= n) {
            return None;
        }
        let mut b = 0;
        for d in (0..self.dim).rev() {
            b = b * grid[d] + idx[d];
        }
        let per_box = if self.dim == 2 { 2 } else { 6 };
        Some(b * per_box..(b + 1) * per_box)
    }

    fn signed_volume(&self, c: usize) -> f64 {
        let cell = self.cell(c);
        let p0 = self.vertex(cell[0]);
        let mut jac = [[0.0; 3]; 3];
        for (k, &v) in cell[1..].iter().enumerate() {
            let p = self.vertex(v);
            for d in 0..self.dim {
                jac[d][k] = p[d] - p0[d];
            }
        }
        if self.dim == 2 {
            0.5 * det2(&jac)
        } else {
            det3(&jac) / 6.0
        }
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        self.signed_volume(c)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_volume(c)).sum()
    }

    /// Diameter (longest edge) of cell `c`.
    pub fn cell_diameter(&self, c: usize) -> f64 {
        let cell = self.cell(c);
        let mut h: f64 = 0.0;
        for i in 0..cell.len() {
            for j in i + 1..cell.len() {
                h = h.max(dist(self.vertex(cell[i]), self.vertex(cell[j])));
            }
        }
        h
    }

    /// Largest cell diameter.
    pub fn h(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_diameter(c)).fold(0.0, f64::max)
    }

    /// `max_K h_K / min_K h_K`.
    pub fn quasi_uniformity(&self) -> f64 {
        let (lo, hi) = (0..self.n_cells())
            .map(|c| self.cell_diameter(c))
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), h| (lo.min(h), hi.max(h)));
        hi / lo
    }

    /// Volume and barycentric gradients of cell `c`.
    pub fn cell_geometry(&self, c: usize) -> CellGeometry {
        let cell = self.cell(c);
        let dim = self.dim;
        let p0 = self.vertex(cell[0]);
        // Columns of `jac` are the edge vectors p_k - p_0.
        let mut jac = [[0.0; 3]; 3];
        for (k, &v) in cell[1..].iter().enumerate() {
            let p = self.vertex(v);
            for d in 0..dim {
                jac[d][k] = p[d] - p0[d];
            }
        }
        let mut grads = [[0.0; 3]; 4];
        let volume;
        if dim == 2 {
            let det = det2(&jac);
            volume = 0.5 * det;
            // Rows of jac^{-1} are the gradients of lambda_1, lambda_2.
            grads[1] = [jac[1][1] / det, -jac[0][1] / det, 0.0];
            grads[2] = [-jac[1][0] / det, jac[0][0] / det, 0.0];
        } else {
            let det = det3(&jac);
            volume = det / 6.0;
            let inv = inv3(&jac, det);
            grads[1..].copy_from_slice(&inv);
        }
        for d in 0..3 {
            grads[0][d] = -(grads[1][d] + grads[2][d] + grads[3][d]);
        }
        CellGeometry { volume, grads }
    }

    /// Physical coordinates of the point with barycentric coordinates `bary`
    /// in cell `c`.
    pub fn map_point(&self, c: usize, bary: &[f64], out: &mut [f64]) {
        out[..self.dim].fill(0.0);
        for (&v, &l) in self.cell(c).iter().zip(bary) {
            let p = self.vertex(v);
            for d in 0..self.dim {
                out[d] += l * p[d];
            }
        }
    }

    /// Writes the plain-text dump: a header `dim nv nc`, one vertex per line,
    /// then one cell per line with 0-based vertex indices.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.dim, self.n_vertices(), self.n_cells())?;
        for v in 0..self.n_vertices() {
            let line: Vec<String> = self.vertex(v).iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        for c in 0..self.n_cells() {
            let line: Vec<String> = self.cell(c).iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Mesh::write_text`]. The bounding box of
    /// the vertices is taken as the domain.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let bad = |m: &str| Error::InvalidInput(format!("mesh dump: {m}"));
        let header = lines.next().ok_or_else(|| bad("empty input"))??;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad header")))
            .collect::<Result<_>>()?;
        let [dim, nv, nc] = head[..] else {
            return Err(bad("header must be `dim nv nc`"));
        };
        if !(2..=3).contains(&dim) {
            return Err(bad("dimension must be 2 or 3"));
        }
        let mut coords = Vec::with_capacity(nv * dim);
        for _ in 0..nv {
            let l = lines.next().ok_or_else(|| bad("truncated vertex block"))??;
            let row: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad coordinate")))
                .collect::<Result<_>>()?;
            if row.len() != dim {
                return Err(bad("vertex line has wrong arity"));
            }
            coords.extend(row);
        }
        let mut cells = Vec::with_capacity(nc * (dim + 1));
        for _ in 0..nc {
            let l = lines.next().ok_or_else(|| bad("truncated cell block"))??;
            let row: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad vertex index")))
                .collect::<Result<_>>()?;
            if row.len() != dim + 1 {
                return Err(bad("cell line has wrong arity"));
            }
            cells.extend(row);
        }
        let mut lower = vec![f64::INFINITY; dim];
        let mut upper = vec![f64::NEG_INFINITY; dim];
        for p in coords.chunks(dim) {
            for d in 0..dim {
                lower[d] = lower[d].min(p[d]);
                upper[d] = upper[d].max(p[d]);
            }
        }
        let domain = BoxDomain::new(&lower, &upper)?;
        Self::from_parts(dim, coords, cells, domain, vec![f64::NAN; dim])
    }
}

/// Structured triangulation of a rectangle with `nx * ny` grid rectangles,
/// each cut into two triangles with checkerboard-alternating diagonals.
pub fn build_structured_2d(nx: usize, ny: usize, domain: &BoxDomain) -> Result<Mesh> {
    build_structured_2d_with_phase(nx, ny, domain, DiagonalPhase::Even)
}

pub fn build_structured_2d_with_phase(nx: usize, ny: usize, domain: &BoxDomain, phase: DiagonalPhase) -> Result<Mesh> {
    build_structured_2d_with(nx, ny, domain, DiagonalPattern::Checkerboard, phase)
}

/// Structured triangulation with a chosen diagonal pattern. Rectangles whose
/// pattern index (shifted by `phase`) is even are cut along `(0,0)-(1,1)`.
pub fn build_structured_2d_with(
    nx: usize,
    ny: usize,
    domain: &BoxDomain,
    pattern: DiagonalPattern,
    phase: DiagonalPhase,
) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput(format!(
            "grid counts must be positive, got {nx} x {ny}"
        )));
    }
    if domain.dim() != 2 {
        return Err(Error::InvalidInput("2D mesh requires a 2D box".into()));
    }
    let xs = axis_points(domain.lower[0], domain.upper[0], nx);
    let ys = axis_points(domain.lower[1], domain.upper[1], ny);
    let mut coords = Vec::with_capacity(2 * (nx + 1) * (ny + 1));
    for &y in &ys {
        for &x in &xs {
            coords.push(x);
            coords.push(y);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let shift = match phase {
        DiagonalPhase::Even => 0,
        DiagonalPhase::Odd => 1,
    };
    let mut cells = Vec::with_capacity(6 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            let index = match pattern {
                DiagonalPattern::Checkerboard => i + j,
                DiagonalPattern::Columns => i,
                DiagonalPattern::Rows => j,
                DiagonalPattern::Uniform => 0,
            };
            if (index + shift) % 2 == 0 {
                cells.extend([v00, v10, v11, v00, v11, v01]);
            } else {
                cells.extend([v00, v10, v01, v10, v11, v01]);
            }
        }
    }
    let spacing = vec![
        (domain.upper[0] - domain.lower[0]) / nx as f64,
        (domain.upper[1] - domain.lower[1]) / ny as f64,
    ];
    let mut mesh = Mesh::from_parts(2, coords, cells, domain.clone(), spacing)?;
    mesh.grid = Some(vec![nx, ny]);
    Ok(mesh)
}

/// Structured tetrahedral mesh of a box with `nx * ny * nz` grid boxes, each
/// split into the six Kuhn tetrahedra around its main diagonal.
pub fn build_structured_3d(nx: usize, ny: usize, nz: usize, domain: &BoxDomain) -> Result<Mesh> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidInput(format!(
            "grid counts must be positive, got {nx} x {ny} x {nz}"
        )));
    }
    if domain.dim() != 3 {
        return Err(Error::InvalidInput("3D mesh requires a 3D box".into()));
    }
    let xs = axis_points(domain.lower[0], domain.upper[0], nx);
    let ys = axis_points(domain.lower[1], domain.upper[1], ny);
    let zs = axis_points(domain.lower[2], domain.upper[2], nz);
    let mut coords = Vec::with_capacity(3 * xs.len() * ys.len() * zs.len());
    for &z in &zs {
        for &y in &ys {
            for &x in &xs {
                coords.extend([x, y, z]);
            }
        }
    }
    let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    // Corner offsets by bit pattern (bit 0: x, bit 1: y, bit 2: z). Each
    // permutation of the axes walks from corner 0 to corner 7.
    const PATHS: [[usize; 4]; 6] = [
        [0, 1, 3, 7],
        [0, 1, 5, 7],
        [0, 2, 3, 7],
        [0, 2, 6, 7],
        [0, 4, 5, 7],
        [0, 4, 6, 7],
    ];
    let spacing = vec![
        (domain.upper[0] - domain.lower[0]) / nx as f64,
        (domain.upper[1] - domain.lower[1]) / ny as f64,
        (domain.upper[2] - domain.lower[2]) / nz as f64,
    ];
    let mut cells = Vec::with_capacity(24 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let corner = |b: usize| id(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1));
                for path in PATHS {
                    let mut tet = path.map(corner);
                    if kuhn_orientation(path) < 0.0 {
                        tet.swap(2, 3);
                    }
                    cells.extend(tet);
                }
            }
        }
    }
    let mut mesh = Mesh::from_parts(3, coords, cells, domain.clone(), spacing)?;
    mesh.grid = Some(vec![nx, ny, nz]);
    Ok(mesh)
}

/// Sign of the volume of a Kuhn tetrahedron on the unit cube.
fn kuhn_orientation(path: [usize; 4]) -> f64 {
    let p = |b: usize| [(b & 1) as f64, ((b >> 1) & 1) as f64, ((b >> 2) & 1) as f64];
    let p0 = p(path[0]);
    let mut jac = [[0.0; 3]; 3];
    for k in 0..3 {
        let q = p(path[k + 1]);
        for d in 0..3 {
            jac[d][k] = q[d] - p0[d];
        }
    }
    det3(&jac)
}

fn axis_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            if i == n {
                hi
            } else {
                lo + (hi - lo) * (i as f64 / n as f64)
            }
        })
        .collect()
}

/// Outcome of the nonpositive off-diagonal stiffness check.
#[derive(Debug, Clone, PartialEq)]
pub struct AcutenessReport {
    pub passes: bool,
    /// `(a, b, K_ab)` with `a < b` for every positive off-diagonal entry.
    pub violations: Vec<(usize, usize, f64)>,
}

/// Checks that every off-diagonal stiffness entry is nonpositive (up to
/// `1e-14`), which guarantees nodal normalization never raises the Dirichlet
/// energy.
pub fn check_h5(mesh: &Mesh, stiffness: &SparseOperator) -> Result<AcutenessReport> {
    let nv = mesh.n_vertices();
    if stiffness.n_rows() != nv || stiffness.n_cols() != nv {
        return Err(Error::ShapeMismatch(format!(
            "stiffness is {}x{} but the mesh has {nv} vertices",
            stiffness.n_rows(),
            stiffness.n_cols()
        )));
    }
    let mut violations = Vec::new();
    for a in 0..nv {
        for (b, val) in stiffness.row(a) {
            if b > a && val > 1e-14 {
                violations.push((a, b, val));
            }
        }
    }
    Ok(AcutenessReport {
        passes: violations.is_empty(),
        violations,
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn det2(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inv3(m: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let mut inv = [[0.0; 3]; 3];
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    inv
}
