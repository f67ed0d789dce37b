//! Quadrature on the reference triangle.
//!
//! Rules are conical products of Gauss-Legendre formulas collapsed onto the
//! triangle (Duffy transform). Only the exactness contract matters here: a
//! rule tagged with degree `d` integrates every polynomial of total degree
//! `<= d` exactly. Weights are normalized so that
//! `integral over T ~= area(T) * sum_q w_q f(x_q)`.

use crate::error::{Error, Result};
use crate::mesh::StructuredTriMesh;

pub const MAX_DEGREE: usize = 10;

/// Default exactness degree used for operator assembly. Covers the worst
/// mini-element integrand, `(u_H . grad) v . phi` with cubic bubbles
/// (3 + 2 + 3 = 8).
pub const ASSEMBLY_DEGREE: usize = 8;

/// Default exactness degree for error norms, so quadrature error stays below
/// discretization error for trigonometric exact solutions.
pub const ERROR_DEGREE: usize = 10;

#[derive(Debug, Clone)]
pub struct QuadRule {
    degree: usize,
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl QuadRule {
    /// Returns a rule exact for polynomials of total degree `<= d`, `1 <= d <= 10`.
    pub fn for_degree(d: usize) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&d) {
            return Err(Error::invalid(format!(
                "quadrature degree must be in 1..={MAX_DEGREE}, got {d}"
            )));
        }
        // Collapsed rule: x = xi (1 - eta), y = eta, Jacobian (1 - eta).
        // With n Gauss points per direction the eta-integrand has degree
        // d + 1, so n = ceil((d + 2) / 2) suffices in both directions.
        let n = (d + 3) / 2;
        let (nodes, gw) = gauss_legendre_01(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for j in 0..n {
            let eta = nodes[j];
            for i in 0..n {
                let x = nodes[i] * (1.0 - eta);
                let y = eta;
                points.push([1.0 - x - y, x, y]);
                // normalized so the weights sum to one
                weights.push(2.0 * gw[i] * gw[j] * (1.0 - eta));
            }
        }
        Ok(Self {
            degree: d,
            points,
            weights,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Barycentric quadrature points.
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Gauss-Legendre nodes and weights on [0, 1].
fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        // Newton on P_n from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (4.0 * k as f64 + 3.0) / (4.0 * n as f64 + 2.0)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[k] = 0.5 * (x + 1.0);
        weights[k] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Integrates `f` over triangle `t`. The integrand receives the physical
/// point and its barycentric coordinates.
pub fn integrate_on_triangle(
    mesh: &StructuredTriMesh,
    t: usize,
    rule: &QuadRule,
    mut f: impl FnMut([f64; 2], [f64; 3]) -> f64,
) -> Result<f64> {
    let g = mesh.triangle_affine_data(t);
    let mut acc = 0.0;
    for (lambda, &w) in rule.points().iter().zip(rule.weights()) {
        let mut p = [0.0; 2];
        for k in 0..3 {
            p[0] += lambda[k] * g.vertices[k][0];
            p[1] += lambda[k] * g.vertices[k][1];
        }
        let v = f(p, *lambda);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!(
                "integrand returned {v} at ({}, {}) in triangle {t}",
                p[0], p[1]
            )));
        }
        acc += w * v;
    }
    Ok(g.area * acc)
}

/// Integrates `f` over the whole mesh.
pub fn integrate(
    mesh: &StructuredTriMesh,
    rule: &QuadRule,
    mut f: impl FnMut([f64; 2], [f64; 3]) -> f64,
) -> Result<f64> {
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        acc += integrate_on_triangle(mesh, t, rule, &mut f)?;
    }
    Ok(acc)
}

/// Exact integral of `l1^a l2^b l3^c` over the reference triangle
/// (area 1/2): `a! b! c! / (a + b + c + 2)!`.
pub fn reference_moment(a: usize, b: usize, c: usize) -> f64 {
    factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}
