//! Quadrature on simplices.
//!
//! Rules are conical products of Gauss-Legendre rules mapped onto the simplex
//! through the collapsed (Duffy) coordinates. All weights are positive and sum
//! to one, so a cell integral is `volume * sum_q w_q f(x_q)`.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Newton on P_n starting from the Chebyshev-like guess.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        // Map [-1, 1] -> [0, 1].
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// A quadrature rule on the reference simplex, in barycentric coordinates.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    dim: usize,
    degree: usize,
    points: Vec<[f64; 4]>,
    weights: Vec<f64>,
}

impl SimplexRule {
    /// Rule exact for polynomials of total degree `degree` on a `dim`-simplex.
    pub fn new(dim: usize, degree: usize) -> Self {
        assert!((2..=3).contains(&dim), "simplex rules exist for 2D and 3D only");
        // The collapse Jacobian raises the degree in the first coordinate by
        // dim - 1; a Gauss rule with n points integrates degree 2n - 1.
        let n = (degree + dim).div_ceil(2).max(1);
        let (x, w) = gauss_legendre_unit(n);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        if dim == 2 {
            for i in 0..n {
                for j in 0..n {
                    let l1 = x[i];
                    let l2 = x[j] * (1.0 - x[i]);
                    points.push([1.0 - l1 - l2, l1, l2, 0.0]);
                    weights.push(2.0 * w[i] * w[j] * (1.0 - x[i]));
                }
            }
        } else {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let l1 = x[i];
                        let l2 = x[j] * (1.0 - x[i]);
                        let l3 = x[k] * (1.0 - x[i]) * (1.0 - x[j]);
                        points.push([1.0 - l1 - l2 - l3, l1, l2, l3]);
                        let jac = (1.0 - x[i]).powi(2) * (1.0 - x[j]);
                        weights.push(6.0 * w[i] * w[j] * w[k] * jac);
                    }
                }
            }
        }
        Self {
            dim,
            degree,
            points,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `(barycentric coordinates, weight)` pairs; only the first `dim + 1`
    /// coordinates are meaningful.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        let n = self.dim + 1;
        self.points.iter().zip(&self.weights).map(move |(p, &w)| (&p[..n], w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Exact mean of a barycentric monomial over a simplex:
    /// dim! prod(a_i!) / (dim + sum a_i)!.
    fn monomial_mean(dim: usize, exps: &[usize]) -> f64 {
        let s: usize = exps.iter().sum();
        factorial(dim) * exps.iter().map(|&a| factorial(a)).product::<f64>() / factorial(dim + s)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..8 {
            let (x, w) = gauss_legendre_unit(n);
            for p in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn simplex_rules_are_exact_to_their_degree() {
        for dim in 2..=3 {
            for degree in [1, 2, 4, 6, 8] {
                let rule = SimplexRule::new(dim, degree);
                let total: f64 = rule.iter().map(|(_, w)| w).sum();
                assert!((total - 1.0).abs() < 1e-14);
                assert!(rule.iter().all(|(_, w)| w > 0.0));
                for a in 0..=degree {
                    for b in 0..=degree - a {
                        for c in 0..=degree - a - b {
                            let d = if dim == 3 { degree - a - b - c } else { 0 };
                            let exps = [a, b, c, d];
                            let exps = &exps[..dim + 1];
                            let q: f64 = rule
                                .iter()
                                .map(|(l, w)| w * exps.iter().zip(l).map(|(&e, &x)| x.powi(e as i32)).product::<f64>())
                                .sum();
                            let exact = monomial_mean(dim, exps);
                            assert!(
                                (q - exact).abs() < 1e-14,
                                "dim={dim} deg={degree} {exps:?}: {q} vs {exact}"
                            );
                        }
                    }
                }
            }
        }
    }
}
