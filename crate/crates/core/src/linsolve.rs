//! Linear solvers for the SPD and saddle-point systems of both time steppers.
//!
//! Saddle-point systems have the block form
//!
//! ```text
//! [ A  Bᵀ ] [u]   [f]
//! [ B  0  ] [q] = [g]
//! ```
//!
//! and are solved either by a sparse LU factorization of the whole indefinite
//! matrix ([`SaddleMethod::Direct`]) or by a conjugate-gradient accelerated
//! Uzawa iteration on the multiplier ([`SaddleMethod::Uzawa`]) with inner
//! Cholesky solves on `A`.

use faer::col::ColMut;
use faer::prelude::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Par, Side};

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpdMethod {
    /// Sparse Cholesky factorization.
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient,
}

const CG_MAX_ITER_FACTOR: usize = 10;

fn sequential() {
    faer::set_global_parallelism(Par::Seq);
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn op_inf_norm(a: &SparseOperator) -> f64 {
    (0..a.n_rows())
        .map(|r| a.row(r).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Cholesky factorization of a symmetric positive definite operator.
pub struct SpdFactor {
    n: usize,
    llt: Llt<usize, f64>,
}

impl SpdFactor {
    pub fn new(a: &SparseOperator) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::ShapeMismatch(format!(
                "SPD solve needs a square matrix, got {}x{}",
                a.n_rows(),
                a.n_cols()
            )));
        }
        sequential();
        let mat = a.to_faer()?;
        let llt = mat
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Solver(format!("Cholesky factorization failed (non-positive pivot?): {e:?}")))?;
        Ok(Self { n: a.n_rows(), llt })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        if self.n > 0 {
            self.llt.solve_in_place(ColMut::from_slice_mut(x));
        }
    }
}

/// Solves `A x = b` for symmetric positive definite `A`, to a relative
/// residual `‖b - A x‖₂ ≤ tol ‖b‖₂`.
pub fn solve_spd(a: &SparseOperator, b: &[f64], tol: f64, method: SpdMethod) -> Result<Vec<f64>> {
    if a.n_rows() != a.n_cols() || a.n_rows() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "SPD system {}x{} with right-hand side of length {}",
            a.n_rows(),
            a.n_cols(),
            b.len()
        )));
    }
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    match method {
        SpdMethod::Direct => {
            let f = SpdFactor::new(a)?;
            let mut x = b.to_vec();
            f.solve_in_place(&mut x);
            // One refinement sweep if the first solve falls short.
            let r = residual(a, &x, b);
            if dot(&r, &r).sqrt() > tol * bnorm {
                let mut dx = r;
                f.solve_in_place(&mut dx);
                x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
            }
            let r = residual(a, &x, b);
            let rn = dot(&r, &r).sqrt();
            if !(rn <= tol * bnorm) {
                return Err(Error::NotConverged {
                    method: "sparse Cholesky",
                    iterations: 2,
                    residual: rn / bnorm,
                });
            }
            Ok(x)
        }
        SpdMethod::ConjugateGradient => conjugate_gradient(a, b, tol, CG_MAX_ITER_FACTOR * b.len().max(10)),
    }
}

fn residual(a: &SparseOperator, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    b.iter().zip(&ax).map(|(b, ax)| b - ax).collect()
}

fn conjugate_gradient(a: &SparseOperator, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::Solver(format!("non-positive diagonal entry at row {i}")));
    }
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver(format!("CG breakdown at iteration {it}: pᵀAp = {pap:e}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        method: "conjugate gradient",
        iterations: max_iter,
        residual: dot(&r, &r).sqrt() / bnorm,
    })
}

/// The `A` block of a saddle-point system.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorBlock {
    /// A general (possibly nonsymmetric) operator on the interleaved unknowns.
    General(SparseOperator),
    /// `S ⊗ I`: the same scalar operator acting on every component.
    ComponentDiagonal { scalar: SparseOperator, components: usize },
}

impl VectorBlock {
    pub fn dim(&self) -> usize {
        match self {
            Self::General(a) => a.n_rows(),
            Self::ComponentDiagonal { scalar, components } => scalar.n_rows() * components,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            Self::General(a) => a.is_symmetric(),
            Self::ComponentDiagonal { scalar, .. } => scalar.is_symmetric(),
        }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Self::General(a) => a.apply(x, y),
            Self::ComponentDiagonal { scalar, components } => {
                let m = *components;
                for r in 0..scalar.n_rows() {
                    let yr = &mut y[r * m..(r + 1) * m];
                    yr.fill(0.0);
                    for (c, v) in scalar.row(r) {
                        for i in 0..m {
                            yr[i] += v * x[c * m + i];
                        }
                    }
                }
            }
        }
    }

    pub fn to_sparse(&self) -> SparseOperator {
        match self {
            Self::General(a) => a.clone(),
            Self::ComponentDiagonal { scalar, components } => scalar.kron_identity(*components),
        }
    }

    fn inf_norm(&self) -> f64 {
        match self {
            Self::General(a) => op_inf_norm(a),
            Self::ComponentDiagonal { scalar, .. } => op_inf_norm(scalar),
        }
    }
}

/// A block system `[A Bᵀ; B 0] [u; q] = [rhs_u; rhs_q]`.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: VectorBlock,
    pub b: SparseOperator,
    pub rhs_u: Vec<f64>,
    pub rhs_q: Vec<f64>,
}

impl SaddleSystem {
    fn validate(&self) -> Result<()> {
        let n = self.a.dim();
        if self.b.n_cols() != n || self.rhs_u.len() != n || self.rhs_q.len() != self.b.n_rows() {
            return Err(Error::ShapeMismatch(format!(
                "A is {n}x{n}, B is {}x{}, right-hand sides have lengths {} and {}",
                self.b.n_rows(),
                self.b.n_cols(),
                self.rhs_u.len(),
                self.rhs_q.len()
            )));
        }
        for r in 0..self.b.n_rows() {
            if self.b.row(r).all(|(_, v)| v == 0.0) {
                return Err(Error::RankDeficient { node: r });
            }
        }
        Ok(())
    }

    /// Normwise relative residuals of the two block equations.
    pub fn residuals(&self, u: &[f64], q: &[f64]) -> (f64, f64) {
        let mut au = vec![0.0; u.len()];
        self.a.apply(u, &mut au);
        self.b.apply_transpose_add(q, &mut au);
        let ru: Vec<f64> = self.rhs_u.iter().zip(&au).map(|(f, a)| f - a).collect();
        let bu = self.b.mul_vec(u);
        let rq: Vec<f64> = self.rhs_q.iter().zip(&bu).map(|(g, b)| g - b).collect();
        let bnorm = op_inf_norm(&self.b);
        let scale_u = self.a.inf_norm() * inf_norm(u) + bnorm * inf_norm(q) + inf_norm(&self.rhs_u);
        let scale_q = bnorm * inf_norm(u) + inf_norm(&self.rhs_q);
        let rel = |r: f64, s: f64| if r == 0.0 { 0.0 } else { r / s };
        (rel(inf_norm(&ru), scale_u), rel(inf_norm(&rq), scale_q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SaddleMethod {
    /// Sparse LU of the full indefinite matrix.
    #[default]
    Direct,
    /// CG-accelerated Uzawa iteration on the multiplier (needs symmetric `A`).
    Uzawa,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleOptions {
    pub method: SaddleMethod,
    /// Bound on the normwise relative residual of both block equations.
    pub tol: f64,
    /// Iteration cap for the Uzawa path.
    pub max_iter: usize,
}

impl Default for SaddleOptions {
    fn default() -> Self {
        Self {
            method: SaddleMethod::Direct,
            tol: 1e-12,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub u: Vec<f64>,
    pub q: Vec<f64>,
    /// Uzawa iterations (zero for the direct path).
    pub iterations: usize,
}

/// One-shot saddle-point solve.
pub fn solve_saddle(sys: &SaddleSystem, opts: &SaddleOptions) -> Result<SaddleSolution> {
    SaddleSolver::new(*opts).solve(sys, None)
}

/// Saddle-point solver that reuses work across a sequence of related systems:
/// the symbolic LU analysis while the sparsity pattern is unchanged, and the
/// Cholesky factor of `A` while `A` is unchanged.
pub struct SaddleSolver {
    opts: SaddleOptions,
    symbolic: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
    a_factor: Option<(VectorBlock, SpdFactor)>,
}

impl SaddleSolver {
    pub fn new(opts: SaddleOptions) -> Self {
        Self {
            opts,
            symbolic: None,
            a_factor: None,
        }
    }

    pub fn options(&self) -> &SaddleOptions {
        &self.opts
    }

    /// Solves `sys`; `initial_q` warm-starts the Uzawa iteration.
    pub fn solve(&mut self, sys: &SaddleSystem, initial_q: Option<&[f64]>) -> Result<SaddleSolution> {
        sys.validate()?;
        let sol = match self.opts.method {
            SaddleMethod::Direct => self.solve_direct(sys)?,
            SaddleMethod::Uzawa => self.solve_uzawa(sys, initial_q)?,
        };
        let (ru, rq) = sys.residuals(&sol.u, &sol.q);
        if !(ru <= self.opts.tol && rq <= self.opts.tol) {
            return Err(Error::NotConverged {
                method: match self.opts.method {
                    SaddleMethod::Direct => "sparse LU",
                    SaddleMethod::Uzawa => "Uzawa",
                },
                iterations: sol.iterations,
                residual: ru.max(rq),
            });
        }
        Ok(sol)
    }

    fn solve_direct(&mut self, sys: &SaddleSystem) -> Result<SaddleSolution> {
        sequential();
        let nu = sys.a.dim();
        let nq = sys.b.n_rows();
        let n = nu + nq;
        let a = sys.a.to_sparse();
        let mut t: Vec<Triplet<usize, usize, f64>> = a.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        for (r, c, v) in sys.b.triplets() {
            t.push(Triplet::new(nu + r, c, v));
            t.push(Triplet::new(c, nu + r, v));
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &t)
            .map_err(|e| Error::Solver(format!("KKT assembly: {e:?}")))?;
        let structure = mat.symbolic();
        let reuse = matches!(&self.symbolic, Some((cp, ri, _))
            if cp.as_slice() == structure.col_ptr() && ri.as_slice() == structure.row_idx());
        if !reuse {
            let sym = SymbolicLu::try_new(structure).map_err(|e| Error::Solver(format!("symbolic LU: {e:?}")))?;
            self.symbolic = Some((structure.col_ptr().to_vec(), structure.row_idx().to_vec(), sym));
        }
        let sym = self.symbolic.as_ref().unwrap().2.clone();
        let lu = Lu::try_new_with_symbolic(sym, mat.as_ref())
            .map_err(|e| Error::Solver(format!("LU factorization failed: {e:?}")))?;

        let mut rhs: Vec<f64> = sys.rhs_u.iter().chain(&sys.rhs_q).copied().collect();
        let mut x = rhs.clone();
        lu.solve_in_place(ColMut::from_slice_mut(&mut x));
        // Iterative refinement against the assembled matrix.
        for _ in 0..2 {
            let (u, q) = x.split_at(nu);
            let (ru, rq) = sys.residuals(u, q);
            if ru <= 0.1 * self.opts.tol && rq <= 0.1 * self.opts.tol {
                break;
            }
            let mut au = vec![0.0; nu];
            sys.a.apply(u, &mut au);
            sys.b.apply_transpose_add(q, &mut au);
            let bu = sys.b.mul_vec(u);
            for i in 0..nu {
                rhs[i] = sys.rhs_u[i] - au[i];
            }
            for i in 0..nq {
                rhs[nu + i] = sys.rhs_q[i] - bu[i];
            }
            lu.solve_in_place(ColMut::from_slice_mut(&mut rhs));
            x.iter_mut().zip(&rhs).for_each(|(x, d)| *x += d);
        }
        let q = x.split_off(nu);
        Ok(SaddleSolution { u: x, q, iterations: 0 })
    }

    fn a_solver(&mut self, a: &VectorBlock) -> Result<&SpdFactor> {
        let stale = !matches!(&self.a_factor, Some((cached, _)) if cached == a);
        if stale {
            let scalar = match a {
                VectorBlock::ComponentDiagonal { scalar, .. } => scalar.clone(),
                VectorBlock::General(m) => m.clone(),
            };
            self.a_factor = Some((a.clone(), SpdFactor::new(&scalar)?));
        }
        Ok(&self.a_factor.as_ref().unwrap().1)
    }

    fn solve_uzawa(&mut self, sys: &SaddleSystem, initial_q: Option<&[f64]>) -> Result<SaddleSolution> {
        if !sys.a.is_symmetric() {
            return Err(Error::InvalidInput(
                "the Uzawa path needs a symmetric positive definite A block".into(),
            ));
        }
        let components = match &sys.a {
            VectorBlock::ComponentDiagonal { components, .. } => *components,
            VectorBlock::General(_) => 1,
        };
        let tol = self.opts.tol;
        let max_iter = self.opts.max_iter;
        let b = sys.b.clone();
        let nu = sys.a.dim();
        let nq = b.n_rows();
        let factor = self.a_solver(&sys.a)?;
        let n_scalar = factor.len();
        let mut work = vec![0.0; n_scalar];
        // x <- A^{-1} x, one component at a time for S ⊗ I.
        let mut a_inv = |x: &mut [f64]| {
            for i in 0..components {
                for a in 0..n_scalar {
                    work[a] = x[a * components + i];
                }
                factor.solve_in_place(&mut work);
                for a in 0..n_scalar {
                    x[a * components + i] = work[a];
                }
            }
        };

        let mut q = match initial_q {
            Some(q0) if q0.len() == nq => q0.to_vec(),
            _ => vec![0.0; nq],
        };
        let mut tmp = vec![0.0; nu];
        // Schur residual r = B A^{-1}(f - Bᵀq) - g.
        let schur_residual = |q: &[f64], a_inv: &mut dyn FnMut(&mut [f64]), tmp: &mut Vec<f64>| {
            tmp.copy_from_slice(&sys.rhs_u);
            let mut btq = vec![0.0; nu];
            b.apply_transpose_add(q, &mut btq);
            tmp.iter_mut().zip(&btq).for_each(|(t, s)| *t -= s);
            a_inv(tmp);
            let mut r = b.mul_vec(tmp);
            r.iter_mut().zip(&sys.rhs_q).for_each(|(r, g)| *r -= g);
            r
        };
        let mut fu = sys.rhs_u.clone();
        a_inv(&mut fu);
        let scale = inf_norm(&b.mul_vec(&fu)) + inf_norm(&sys.rhs_q);
        let mut r = schur_residual(&q, &mut a_inv, &mut tmp);
        let target = 0.1 * tol * scale;
        let mut iterations = 0;
        if inf_norm(&r) > target {
            let mut p = r.clone();
            let mut rr = dot(&r, &r);
            let mut sp_u = vec![0.0; nu];
            loop {
                if iterations >= max_iter {
                    return Err(Error::NotConverged {
                        method: "Uzawa",
                        iterations,
                        residual: inf_norm(&r) / scale.max(f64::MIN_POSITIVE),
                    });
                }
                iterations += 1;
                sp_u.fill(0.0);
                b.apply_transpose_add(&p, &mut sp_u);
                a_inv(&mut sp_u);
                let sp = b.mul_vec(&sp_u);
                let psp = dot(&p, &sp);
                if !(psp > 0.0) {
                    return Err(Error::Solver(format!("Uzawa breakdown: pᵀSp = {psp:e}")));
                }
                // The Schur residual decreases along -S p as q moves along -p.
                let alpha = rr / psp;
                for i in 0..nq {
                    q[i] += alpha * p[i];
                    r[i] -= alpha * sp[i];
                }
                if inf_norm(&r) <= target {
                    break;
                }
                let rr_new = dot(&r, &r);
                let beta = rr_new / rr;
                rr = rr_new;
                for i in 0..nq {
                    p[i] = r[i] + beta * p[i];
                }
            }
        }
        // u = A^{-1}(f - Bᵀq).
        let mut u = sys.rhs_u.clone();
        let mut btq = vec![0.0; nu];
        b.apply_transpose_add(&q, &mut btq);
        u.iter_mut().zip(&btq).for_each(|(u, s)| *u -= s);
        a_inv(&mut u);
        Ok(SaddleSolution { u, q, iterations })
    }
}
