//! Error norms, convergence slopes and the CSV report format.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fe_space::FEField;
use crate::mesh::StructuredTriMesh;
use crate::quadrature::QuadRule;

/// What a numeric solution is measured against: closed-form fields or a
/// reference finite-element solution evaluated cross-grid.
pub trait ReferenceSolution {
    fn velocity(&self, p: [f64; 2]) -> Result<[f64; 2]>;
    fn velocity_grad(&self, p: [f64; 2]) -> Result<[[f64; 2]; 2]>;
    fn pressure(&self, p: [f64; 2]) -> Result<f64>;
}

/// Analytic reference at a fixed time.
pub struct AnalyticReference<U, G, P>
where
    U: Fn([f64; 2]) -> [f64; 2],
    G: Fn([f64; 2]) -> [[f64; 2]; 2],
    P: Fn([f64; 2]) -> f64,
{
    pub velocity: U,
    pub velocity_grad: G,
    pub pressure: P,
}

impl<U, G, P> ReferenceSolution for AnalyticReference<U, G, P>
where
    U: Fn([f64; 2]) -> [f64; 2],
    G: Fn([f64; 2]) -> [[f64; 2]; 2],
    P: Fn([f64; 2]) -> f64,
{
    fn velocity(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        Ok((self.velocity)(p))
    }
    fn velocity_grad(&self, p: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        Ok((self.velocity_grad)(p))
    }
    fn pressure(&self, p: [f64; 2]) -> Result<f64> {
        Ok((self.pressure)(p))
    }
}

/// A discrete reference (the fine-mesh oracle of experiment 2).
pub struct FieldReference<'a> {
    pub velocity: &'a FEField,
    pub pressure: Option<&'a FEField>,
}

impl ReferenceSolution for FieldReference<'_> {
    fn velocity(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        self.velocity.eval_velocity(p)
    }
    fn velocity_grad(&self, p: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        Ok(self.velocity.eval_velocity_grad(p)?.1)
    }
    fn pressure(&self, p: [f64; 2]) -> Result<f64> {
        match self.pressure {
            Some(f) => f.eval_pressure(p),
            None => Ok(0.0),
        }
    }
}

/// Raw error norms of one velocity/pressure pair.
#[derive(Debug, Clone, Copy, Default)]
pub struct ErrorNorms {
    pub u_l2: f64,
    pub u_h1_semi: f64,
    /// Full H1 norm, `sqrt(L2^2 + seminorm^2)`.
    pub u_h1: f64,
    /// First velocity component only.
    pub u1_l2: f64,
    pub u1_h1: f64,
    /// Quotient-space pressure error (both means removed).
    pub p_l2: f64,
}

/// One row of the experiment reports.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub method: String,
    pub coarse_h: f64,
    pub fine_h: f64,
    pub nu: f64,
    pub time: f64,
    pub norms: ErrorNorms,
}

/// Measures `velocity` (and optionally `pressure`) against a reference,
/// integrating on `mesh` with a rule of the given exactness degree.
pub fn compute_errors(
    mesh: &StructuredTriMesh,
    degree: usize,
    velocity: &FEField,
    pressure: Option<&FEField>,
    reference: &dyn ReferenceSolution,
) -> Result<ErrorNorms> {
    let rule = QuadRule::for_degree(degree)?;

    // quotient norm: compare mean-zero representatives of both pressures
    let (p_mean_num, p_mean_ref) = if let Some(p_h) = pressure {
        let mut ref_mean = 0.0;
        for t in 0..mesh.n_triangles() {
            ref_mean +=
                crate::quadrature::integrate_on_triangle(mesh, t, &rule, |x, _| {
                    reference.pressure(x).unwrap_or(f64::NAN)
                })?;
        }
        (p_h.pressure_mean(), ref_mean)
    } else {
        (0.0, 0.0)
    };

    let mut acc = ErrorAccumulator::default();
    for t in 0..mesh.n_triangles() {
        let geo = mesh.triangle_affine_data(t);
        for (lambda, &w) in rule.points().iter().zip(rule.weights()) {
            let mut x = [0.0; 2];
            for k in 0..3 {
                x[0] += lambda[k] * geo.vertices[k][0];
                x[1] += lambda[k] * geo.vertices[k][1];
            }
            let scaled = w * geo.area;
            let (uh, gh) = velocity.eval_velocity_grad(x)?;
            let ur = reference.velocity(x)?;
            let gr = reference.velocity_grad(x)?;
            for c in 0..2 {
                let dv = uh[c] - ur[c];
                let dgx = gh[c][0] - gr[c][0];
                let dgy = gh[c][1] - gr[c][1];
                acc.u_l2 += scaled * dv * dv;
                acc.u_h1_semi += scaled * (dgx * dgx + dgy * dgy);
                if c == 0 {
                    acc.u1_l2 += scaled * dv * dv;
                    acc.u1_h1_semi += scaled * (dgx * dgx + dgy * dgy);
                }
            }
            if let Some(p_h) = pressure {
                let dp = (p_h.eval_pressure(x)? - p_mean_num)
                    - (reference.pressure(x)? - p_mean_ref);
                acc.p_l2 += scaled * dp * dp;
            }
        }
    }
    Ok(acc.finish())
}

#[derive(Default)]
struct ErrorAccumulator {
    u_l2: f64,
    u_h1_semi: f64,
    u1_l2: f64,
    u1_h1_semi: f64,
    p_l2: f64,
}

impl ErrorAccumulator {
    fn finish(self) -> ErrorNorms {
        let u_l2 = self.u_l2.sqrt();
        let u_h1_semi = self.u_h1_semi.sqrt();
        let u1_l2 = self.u1_l2.sqrt();
        let u1_h1_semi = self.u1_h1_semi.sqrt();
        ErrorNorms {
            u_l2,
            u_h1_semi,
            u_h1: (u_l2 * u_l2 + u_h1_semi * u_h1_semi).sqrt(),
            u1_l2,
            u1_h1: (u1_l2 * u1_l2 + u1_h1_semi * u1_h1_semi).sqrt(),
            p_l2: self.p_l2.sqrt(),
        }
    }
}

/// Least-squares slope of `log(err)` against `log(h)`.
pub fn slope_fit(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::invalid(format!(
            "slope fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(h, e)| h <= 0.0 || e <= 0.0) {
        return Err(Error::invalid("slope fit needs positive mesh sizes and errors"));
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(h, e) in points {
        let (x, y) = (h.ln(), e.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Least-squares convergence orders per (method, norm).
#[derive(Debug, Clone, Default)]
pub struct SlopeTable {
    pub rows: Vec<SlopeRow>,
}

#[derive(Debug, Clone)]
pub struct SlopeRow {
    pub method: String,
    pub norm: String,
    pub slope: f64,
}

impl SlopeTable {
    pub fn push(&mut self, method: &str, norm: &str, slope: f64) {
        self.rows.push(SlopeRow {
            method: method.to_string(),
            norm: norm.to_string(),
            slope,
        });
    }

    pub fn get(&self, method: &str, norm: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.norm == norm)
            .map(|r| r.slope)
    }
}

impl std::fmt::Display for SlopeTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<16} {:<8} slope", "method", "norm")?;
        for r in &self.rows {
            writeln!(f, "{:<16} {:<8} {:+.3}", r.method, r.norm, r.slope)?;
        }
        Ok(())
    }
}

/// Writes reports in the mandatory CSV schema:
/// `method,H,h,nu,t,err_u_L2,err_u_H1,err_p_L2`.
pub fn write_error_csv(reports: &[ErrorReport], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "method,H,h,nu,t,err_u_L2,err_u_H1,err_p_L2")?;
    for r in reports {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.method, r.coarse_h, r.fine_h, r.nu, r.time, r.norms.u_l2, r.norms.u_h1, r.norms.p_l2
        )?;
    }
    Ok(())
}

/// Human-readable table with the per-component errors included.
pub fn write_report_table(reports: &[ErrorReport], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(
        w,
        "{:<16} {:>8} {:>8} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "method", "H", "h", "err_u_L2", "err_u_H1", "err_u1_L2", "err_u1_H1", "err_p_L2"
    )?;
    for r in reports {
        writeln!(
            w,
            "{:<16} {:>8.5} {:>8.5} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e}",
            r.method,
            r.coarse_h,
            r.fine_h,
            r.norms.u_l2,
            r.norms.u_h1,
            r.norms.u1_l2,
            r.norms.u1_h1,
            r.norms.p_l2
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe_space::{FEField, FESpacePair, Family};
    use crate::mesh::StructuredTriMesh;
    use std::sync::Arc;

    fn space(n: usize) -> Arc<FESpacePair> {
        let mesh = Arc::new(StructuredTriMesh::unit_square(n).unwrap());
        Arc::new(FESpacePair::build(mesh, Family::Mini))
    }

    #[test]
    fn self_comparison_is_zero() {
        let sp = space(4);
        let u = FEField::interpolate_velocity(&sp, |p| {
            [p[0] * (1.0 - p[0]) * p[1], p[1] * (1.0 - p[1])]
        })
        .unwrap();
        let p = FEField::interpolate_pressure(&sp, |q| q[0] * q[1]).unwrap();
        let reference = FieldReference {
            velocity: &u,
            pressure: Some(&p),
        };
        let norms =
            compute_errors(sp.mesh(), ERROR_DEGREE, &u, Some(&p), &reference).unwrap();
        assert!(norms.u_l2 < 1e-13);
        assert!(norms.u_h1 < 1e-13);
        assert!(norms.p_l2 < 1e-13);
    }

    #[test]
    fn pressure_error_ignores_constants() {
        let sp = space(4);
        let u = FEField::zeros(&sp, crate::fe_space::FieldRole::Velocity);
        let p1 = FEField::interpolate_pressure(&sp, |q| q[0]).unwrap();
        let p2 = FEField::interpolate_pressure(&sp, |q| q[0] + 7.5).unwrap();
        let reference = AnalyticReference {
            velocity: |_| [0.0, 0.0],
            velocity_grad: |_| [[0.0; 2]; 2],
            pressure: |q: [f64; 2]| q[0] - 100.0,
        };
        let n1 = compute_errors(sp.mesh(), 10, &u, Some(&p1), &reference).unwrap();
        let n2 = compute_errors(sp.mesh(), 10, &u, Some(&p2), &reference).unwrap();
        assert!(n1.p_l2 < 1e-12);
        assert!((n1.p_l2 - n2.p_l2).abs() < 1e-12);
    }

    #[test]
    fn known_interpolation_error() {
        // P1 interpolation of a boundary-compatible quartic: L2 error
        // scales like h^2
        let f = |p: [f64; 2]| p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]);
        let fg = |p: [f64; 2]| {
            [
                (1.0 - 2.0 * p[0]) * p[1] * (1.0 - p[1]),
                p[0] * (1.0 - p[0]) * (1.0 - 2.0 * p[1]),
            ]
        };
        let reference = AnalyticReference {
            velocity: move |p: [f64; 2]| [f(p), 0.0],
            velocity_grad: move |p: [f64; 2]| [fg(p), [0.0, 0.0]],
            pressure: |_| 0.0,
        };
        let mut errs = Vec::new();
        for n in [4usize, 8, 16] {
            let sp = space(n);
            let u = FEField::interpolate_velocity(&sp, |p| [f(p), 0.0]).unwrap();
            let norms = compute_errors(sp.mesh(), 10, &u, None, &reference).unwrap();
            errs.push((sp.mesh().h(), norms.u_l2));
        }
        let slope = slope_fit(&errs).unwrap();
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn slope_fit_exact_powers() {
        let pts1: Vec<_> = [6.0, 8.0, 10.0, 12.0]
            .iter()
            .map(|n| (1.0 / n, 3.7 / n))
            .collect();
        assert!((slope_fit(&pts1).unwrap() - 1.0).abs() < 1e-12);
        let pts2: Vec<_> = [6.0, 8.0, 10.0, 12.0]
            .iter()
            .map(|n| (1.0 / n, 0.2 / (n * n)))
            .collect();
        assert!((slope_fit(&pts2).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn slope_fit_rejects_bad_input() {
        assert!(slope_fit(&[(0.1, 1.0), (0.05, 0.5)]).is_err());
        assert!(slope_fit(&[(0.1, 1.0), (0.05, 0.5), (0.025, -0.1)]).is_err());
    }

    #[test]
    fn csv_schema() {
        let report = ErrorReport {
            method: "galerkin".into(),
            coarse_h: 1.0 / 6.0,
            fine_h: 1.0 / 20.0,
            nu: 0.05,
            time: 0.5,
            norms: ErrorNorms {
                u_l2: 1e-3,
                u_h1_semi: 2e-2,
                u_h1: 2.02e-2,
                u1_l2: 8e-4,
                u1_h1: 1.5e-2,
                p_l2: 3e-3,
            },
        };
        let mut buf = Vec::new();
        write_error_csv(&[report], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "method,H,h,nu,t,err_u_L2,err_u_H1,err_p_L2"
        );
        let row = lines.next().unwrap();
        assert!(row.starts_with("galerkin,"));
        assert_eq!(row.split(',').count(), 8);
    }
}
