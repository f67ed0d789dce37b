//! Assembly of the discrete operators: mass, stiffness, divergence,
//! convection (skew and plain) and load functionals, including cross-grid
//! data evaluated through [`FEField::eval_velocity`].

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fe_basis::MAX_LOCAL;
use crate::fe_space::{FEField, FESpacePair};
use crate::quadrature::{QuadRule, ASSEMBLY_DEGREE};
use crate::sparse::{CooBuilder, SparseMatrix};

pub use crate::sparse::SparseMatrix as Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvectionMode {
    /// `b(w, v, phi) = ((w . grad) v, phi) + 1/2 ((div w) v, phi)`, assembled
    /// structurally antisymmetric as `1/2 ((w . grad) v, phi) - 1/2 ((w . grad) phi, v)`
    /// so that `v^T N v = 0` holds at machine precision.
    Skew,
    /// `((w . grad) v, phi)` exactly as it appears in the Oseen postprocess.
    Plain,
}

/// Convecting wind: a discrete field (possibly living on another mesh) or an
/// analytic velocity.
pub enum Wind<'a> {
    Field(&'a FEField),
    Analytic(&'a dyn Fn([f64; 2]) -> [f64; 2]),
}

impl Wind<'_> {
    fn eval(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        match self {
            Wind::Field(f) => f.eval_velocity(p),
            Wind::Analytic(g) => {
                let v = g(p);
                if v[0].is_finite() && v[1].is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite(format!("wind at ({}, {})", p[0], p[1])))
                }
            }
        }
    }
}

/// The time-independent operators of a velocity-pressure pair.
#[derive(Debug)]
pub struct OperatorSet {
    space: Arc<FESpacePair>,
    /// Velocity mass matrix, `n_u x n_u`.
    pub mass: SparseMatrix,
    /// Velocity stiffness (Laplacian without the viscosity factor).
    pub stiffness: SparseMatrix,
    /// Divergence coupling, `n_p x n_u`, entries `(psi, div phi)`.
    pub divergence: SparseMatrix,
    /// Pressure means `integral of psi_q`, length `n_p`.
    pub pressure_mean: Vec<f64>,
}

impl OperatorSet {
    pub fn space(&self) -> &Arc<FESpacePair> {
        &self.space
    }
}

/// Per-quadrature-point shape data for one space, precomputed once per
/// assembly pass.
struct ShapeTable {
    count: usize,
    /// `values[q][k]`
    values: Vec<[f64; MAX_LOCAL]>,
    /// `partials[q][k]` with respect to barycentric coordinates
    partials: Vec<[[f64; 3]; MAX_LOCAL]>,
}

impl ShapeTable {
    fn new(space: &FESpacePair, rule: &QuadRule) -> Self {
        let mut values = Vec::with_capacity(rule.len());
        let mut partials = Vec::with_capacity(rule.len());
        let mut count = 0;
        for &lambda in rule.points() {
            let mut v = [0.0; MAX_LOCAL];
            let mut d = [[0.0; 3]; MAX_LOCAL];
            count = space.local_shape(lambda, &mut v, &mut d);
            values.push(v);
            partials.push(d);
        }
        Self {
            count,
            values,
            partials,
        }
    }

    /// Physical gradients of the local basis at quadrature point `q`.
    fn physical_grads(&self, q: usize, grad_lambda: &[[f64; 2]; 3], out: &mut [[f64; 2]; MAX_LOCAL]) {
        for k in 0..self.count {
            let d = &self.partials[q][k];
            out[k] = [
                d[0] * grad_lambda[0][0] + d[1] * grad_lambda[1][0] + d[2] * grad_lambda[2][0],
                d[0] * grad_lambda[0][1] + d[1] * grad_lambda[1][1] + d[2] * grad_lambda[2][1],
            ];
        }
    }
}

/// Assembles mass, stiffness, divergence and the pressure mean vector with
/// the default assembly rule.
pub fn assemble_operators(space: &Arc<FESpacePair>) -> OperatorSet {
    assemble_operators_with_degree(space, ASSEMBLY_DEGREE)
}

pub fn assemble_operators_with_degree(space: &Arc<FESpacePair>, degree: usize) -> OperatorSet {
    let rule = QuadRule::for_degree(degree).expect("assembly degree in range");
    let mesh = space.mesh();
    let table = ShapeTable::new(space, &rule);
    let m = table.count;
    let n_u = space.n_u();
    let n_p = space.n_p();
    let n_tri = mesh.n_triangles();

    let mut mass = CooBuilder::with_capacity(n_u, n_u, 2 * n_tri * m * m);
    let mut stiffness = CooBuilder::with_capacity(n_u, n_u, 2 * n_tri * m * m);
    let mut divergence = CooBuilder::with_capacity(n_p, n_u, 6 * n_tri * m);
    let mut pressure_mean = vec![0.0; n_p];

    let mut grads = [[0.0; 2]; MAX_LOCAL];
    for t in 0..n_tri {
        let geo = mesh.triangle_affine_data(t);
        let tri = mesh.triangle(t);
        let (nodes, _) = space.local_nodes(t);
        let mut me = [[0.0; MAX_LOCAL]; MAX_LOCAL];
        let mut ke = [[0.0; MAX_LOCAL]; MAX_LOCAL];
        // divergence element block: pressure vertex k vs (component, node l)
        let mut be = [[[0.0; 2]; MAX_LOCAL]; 3];
        for (q, &w) in rule.weights().iter().enumerate() {
            table.physical_grads(q, &geo.grad_lambda, &mut grads);
            let vals = &table.values[q];
            let lambda = rule.points()[q];
            for k in 0..m {
                for l in 0..m {
                    me[k][l] += w * vals[k] * vals[l];
                    ke[k][l] += w * (grads[k][0] * grads[l][0] + grads[k][1] * grads[l][1]);
                }
            }
            for k in 0..3 {
                for l in 0..m {
                    for c in 0..2 {
                        be[k][l][c] += w * lambda[k] * grads[l][c];
                    }
                }
            }
        }
        let area = geo.area;
        for k in 0..m {
            let Some(a) = nodes[k] else { continue };
            for l in 0..m {
                let Some(b) = nodes[l] else { continue };
                for c in 0..2 {
                    let (i, j) = (space.velocity_dof(c, a), space.velocity_dof(c, b));
                    mass.push(i, j, area * me[k][l]);
                    stiffness.push(i, j, area * ke[k][l]);
                }
            }
        }
        for k in 0..3 {
            pressure_mean[tri[k]] += area / 3.0;
            for l in 0..m {
                let Some(b) = nodes[l] else { continue };
                for c in 0..2 {
                    divergence.push(tri[k], space.velocity_dof(c, b), area * be[k][l][c]);
                }
            }
        }
    }

    OperatorSet {
        space: Arc::clone(space),
        mass: mass.finish(),
        stiffness: stiffness.finish(),
        divergence: divergence.finish(),
        pressure_mean,
    }
}

/// Assembles the convection matrix for a given wind.
pub fn assemble_convection(
    space: &Arc<FESpacePair>,
    wind: Wind<'_>,
    mode: ConvectionMode,
) -> Result<SparseMatrix> {
    assemble_convection_with_degree(space, wind, mode, ASSEMBLY_DEGREE)
}

pub fn assemble_convection_with_degree(
    space: &Arc<FESpacePair>,
    wind: Wind<'_>,
    mode: ConvectionMode,
    degree: usize,
) -> Result<SparseMatrix> {
    let rule = QuadRule::for_degree(degree)?;
    let mesh = space.mesh();
    let table = ShapeTable::new(space, &rule);
    let m = table.count;
    let n_u = space.n_u();
    let mut coo = CooBuilder::with_capacity(n_u, n_u, 2 * mesh.n_triangles() * m * m);

    let mut grads = [[0.0; 2]; MAX_LOCAL];
    for t in 0..mesh.n_triangles() {
        let geo = mesh.triangle_affine_data(t);
        let (nodes, _) = space.local_nodes(t);
        // te[k][l] = ((w . grad) phi_l, phi_k) on this element
        let mut te = [[0.0; MAX_LOCAL]; MAX_LOCAL];
        for (q, &w) in rule.weights().iter().enumerate() {
            let lambda = rule.points()[q];
            let p = mesh.bary_to_point(t, lambda);
            let wv = wind.eval(p)?;
            table.physical_grads(q, &geo.grad_lambda, &mut grads);
            let vals = &table.values[q];
            for l in 0..m {
                let transport = wv[0] * grads[l][0] + wv[1] * grads[l][1];
                for k in 0..m {
                    te[k][l] += w * transport * vals[k];
                }
            }
        }
        let area = geo.area;
        for k in 0..m {
            let Some(a) = nodes[k] else { continue };
            for l in 0..m {
                let Some(b) = nodes[l] else { continue };
                let value = match mode {
                    ConvectionMode::Plain => area * te[k][l],
                    ConvectionMode::Skew => 0.5 * area * (te[k][l] - te[l][k]),
                };
                for c in 0..2 {
                    coo.push(space.velocity_dof(c, a), space.velocity_dof(c, b), value);
                }
            }
        }
    }
    Ok(coo.finish())
}

/// Derivative of the skew convection term with respect to the wind:
/// `D(u)[i, j] = 1/2 ((phi_j . grad) u, phi_i) - 1/2 ((phi_j . grad) phi_i, u)`.
/// Together with `N_skew(u)` this is the full Newton linearization of
/// `b(u, u, .)`.
pub fn assemble_convection_derivative(
    space: &Arc<FESpacePair>,
    u: &FEField,
) -> Result<SparseMatrix> {
    assert!(
        Arc::ptr_eq(u.space(), space),
        "convection derivative needs a same-space field"
    );
    let rule = QuadRule::for_degree(ASSEMBLY_DEGREE)?;
    let mesh = space.mesh();
    let table = ShapeTable::new(space, &rule);
    let m = table.count;
    let n_u = space.n_u();
    let mut coo = CooBuilder::with_capacity(n_u, n_u, 4 * mesh.n_triangles() * m * m);

    let mut grads = [[0.0; 2]; MAX_LOCAL];
    for t in 0..mesh.n_triangles() {
        let geo = mesh.triangle_affine_data(t);
        let (nodes, _) = space.local_nodes(t);
        // de[ci][k][cj][l]
        let mut de = [[[[0.0; MAX_LOCAL]; 2]; MAX_LOCAL]; 2];
        for (q, &w) in rule.weights().iter().enumerate() {
            let lambda = rule.points()[q];
            let (uv, ug) = u.eval_velocity_local(t, lambda);
            table.physical_grads(q, &geo.grad_lambda, &mut grads);
            let vals = &table.values[q];
            for ci in 0..2 {
                for k in 0..m {
                    for cj in 0..2 {
                        for l in 0..m {
                            let term1 = vals[l] * vals[k] * ug[ci][cj];
                            let term2 = vals[l] * grads[k][cj] * uv[ci];
                            de[ci][k][cj][l] += 0.5 * w * (term1 - term2);
                        }
                    }
                }
            }
        }
        let area = geo.area;
        for ci in 0..2 {
            for k in 0..m {
                let Some(a) = nodes[k] else { continue };
                for cj in 0..2 {
                    for l in 0..m {
                        let Some(b) = nodes[l] else { continue };
                        coo.push(
                            space.velocity_dof(ci, a),
                            space.velocity_dof(cj, b),
                            area * de[ci][k][cj][l],
                        );
                    }
                }
            }
        }
    }
    Ok(coo.finish())
}

/// Assembles the velocity load vector `(g, phi)` for each free velocity
/// basis function. The integrand may reference fields on other meshes and is
/// therefore fallible.
pub fn assemble_load(
    space: &Arc<FESpacePair>,
    mut g: impl FnMut([f64; 2]) -> Result<[f64; 2]>,
    rule: &QuadRule,
) -> Result<Vec<f64>> {
    let mesh = space.mesh();
    let table = ShapeTable::new(space, rule);
    let m = table.count;
    let mut load = vec![0.0; space.n_u()];
    for t in 0..mesh.n_triangles() {
        let geo = mesh.triangle_affine_data(t);
        let (nodes, _) = space.local_nodes(t);
        let mut le = [[0.0; 2]; MAX_LOCAL];
        for (q, &w) in rule.weights().iter().enumerate() {
            let lambda = rule.points()[q];
            let p = mesh.bary_to_point(t, lambda);
            let gv = g(p).map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!("{msg} (load, triangle {t})")),
                other => other,
            })?;
            if !gv[0].is_finite() || !gv[1].is_finite() {
                return Err(Error::NonFinite(format!(
                    "load integrand at ({}, {}) in triangle {t}",
                    p[0], p[1]
                )));
            }
            let vals = &table.values[q];
            for k in 0..m {
                for c in 0..2 {
                    le[k][c] += w * gv[c] * vals[k];
                }
            }
        }
        for k in 0..m {
            let Some(a) = nodes[k] else { continue };
            for c in 0..2 {
                load[space.velocity_dof(c, a)] += geo.area * le[k][c];
            }
        }
    }
    Ok(load)
}

/// Full-vertex scalar P1 mass matrix (no boundary conditions); test hook for
/// partition-of-unity identities.
pub(crate) fn p1_scalar_mass_full(mesh: &crate::mesh::StructuredTriMesh) -> SparseMatrix {
    let rule = QuadRule::for_degree(2).unwrap();
    let n = mesh.n_vertices();
    let mut coo = CooBuilder::with_capacity(n, n, 9 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        let area = mesh.triangle_affine_data(t).area;
        for k in 0..3 {
            for l in 0..3 {
                let mut acc = 0.0;
                for (lambda, &w) in rule.points().iter().zip(rule.weights()) {
                    acc += w * lambda[k] * lambda[l];
                }
                coo.push(tri[k], tri[l], area * acc);
            }
        }
    }
    coo.finish()
}

/// Full-vertex load of the first component over P1 vertex functions; test
/// hook (no boundary conditions).
pub(crate) fn p1_component_load_full(
    mesh: &crate::mesh::StructuredTriMesh,
    g: impl Fn([f64; 2]) -> [f64; 2],
    rule: &QuadRule,
) -> Vec<f64> {
    let mut load = vec![0.0; mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        let geo = mesh.triangle_affine_data(t);
        for (lambda, &w) in rule.points().iter().zip(rule.weights()) {
            let p = mesh.bary_to_point(t, *lambda);
            let gv = g(p);
            for k in 0..3 {
                load[tri[k]] += geo.area * w * gv[0] * lambda[k];
            }
        }
    }
    load
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe_space::{Family, FieldRole};
    use crate::mesh::StructuredTriMesh;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn space(n: usize, family: Family) -> Arc<FESpacePair> {
        let mesh = Arc::new(StructuredTriMesh::unit_square(n).unwrap());
        Arc::new(FESpacePair::build(mesh, family))
    }

    fn random_field(sp: &Arc<FESpacePair>, seed: u64) -> FEField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = FEField::zeros(sp, FieldRole::Velocity);
        for c in f.coeffs_mut() {
            *c = rng.random_range(-1.0..1.0);
        }
        f
    }

    #[test]
    fn full_space_mass_partition_of_unity() {
        let mesh = StructuredTriMesh::unit_square(4).unwrap();
        let m = p1_scalar_mass_full(&mesh);
        let ones = vec![1.0; mesh.n_vertices()];
        let mut y = vec![0.0; mesh.n_vertices()];
        m.matvec(&ones, &mut y);
        let total: f64 = y.iter().sum();
        assert!((total - 1.0).abs() < 1e-13, "1^T M 1 = {total}");
    }

    #[test]
    fn divergence_annihilates_constant_pressure() {
        for family in [Family::Mini, Family::TaylorHood] {
            let sp = space(4, family);
            let ops = assemble_operators(&sp);
            let ones = vec![1.0; sp.n_p()];
            let mut y = vec![0.0; sp.n_u()];
            ops.divergence.tr_matvec_add(1.0, &ones, &mut y);
            let max = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(max < 1e-12, "{family:?}: |B^T 1|_inf = {max:e}");
        }
    }

    #[test]
    fn mass_and_stiffness_are_symmetric() {
        let sp = space(5, Family::TaylorHood);
        let ops = assemble_operators(&sp);
        assert!(ops.mass.symmetry_gap() <= 1e-12 * ops.mass.max_abs());
        assert!(ops.stiffness.symmetry_gap() <= 1e-12 * ops.stiffness.max_abs());
    }

    #[test]
    fn stiffness_energy_of_sine_interpolant() {
        let sp = space(32, Family::Mini);
        let ops = assemble_operators(&sp);
        let v = FEField::interpolate_velocity(&sp, |p| {
            [(PI * p[0]).sin() * (PI * p[1]).sin(), 0.0]
        })
        .unwrap();
        let mut kv = vec![0.0; sp.n_u()];
        ops.stiffness.matvec(v.coeffs(), &mut kv);
        let energy: f64 = v.coeffs().iter().zip(&kv).map(|(a, b)| a * b).sum();
        let exact = PI * PI / 2.0;
        assert!(
            (energy - exact).abs() / exact < 0.02,
            "v^T K v = {energy}, expected about {exact}"
        );
    }

    #[test]
    fn mass_is_positive_definite_on_random_vectors() {
        let sp = space(3, Family::Mini);
        let ops = assemble_operators(&sp);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let v: Vec<f64> = (0..sp.n_u()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut mv = vec![0.0; sp.n_u()];
            ops.mass.matvec(&v, &mut mv);
            let q: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
            assert!(q > 0.0);
        }
    }

    #[test]
    fn zero_wind_gives_zero_matrix() {
        let sp = space(3, Family::Mini);
        for mode in [ConvectionMode::Skew, ConvectionMode::Plain] {
            let n = assemble_convection(&sp, Wind::Analytic(&|_| [0.0, 0.0]), mode).unwrap();
            assert_eq!(n.max_abs(), 0.0);
        }
    }

    #[test]
    fn skew_form_annihilates_random_vectors() {
        let sp = space(4, Family::Mini);
        let wind = random_field(&sp, 11);
        let n = assemble_convection(&sp, Wind::Field(&wind), ConvectionMode::Skew).unwrap();
        let scale = n.max_abs();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let v: Vec<f64> = (0..sp.n_u()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut nv = vec![0.0; sp.n_u()];
            n.matvec(&v, &mut nv);
            let q: f64 = v.iter().zip(&nv).map(|(a, b)| a * b).sum();
            let norm2: f64 = v.iter().map(|a| a * a).sum();
            assert!(
                q.abs() <= 1e-12 * norm2 * scale,
                "v^T N v = {q:e}, scale {scale:e}"
            );
        }
    }

    #[test]
    fn skew_matrix_is_exactly_antisymmetric() {
        let sp = space(4, Family::TaylorHood);
        let wind = random_field(&sp, 13);
        let n = assemble_convection(&sp, Wind::Field(&wind), ConvectionMode::Skew).unwrap();
        assert_eq!(n.symmetry_gap(), 2.0 * n.max_abs()); // A = -A^T: gap is 2 max
        for (r, c, v) in n.entries() {
            assert_eq!(v, -n.get(c, r), "entry ({r},{c})");
        }
    }

    #[test]
    fn transpose_pairing_consistency() {
        let sp = space(4, Family::Mini);
        let ops = assemble_operators(&sp);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let p: Vec<f64> = (0..sp.n_p()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..sp.n_u()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut bv = vec![0.0; sp.n_p()];
            ops.divergence.matvec(&v, &mut bv);
            let left: f64 = p.iter().zip(&bv).map(|(a, b)| a * b).sum();
            let mut btp = vec![0.0; sp.n_u()];
            ops.divergence.tr_matvec_add(1.0, &p, &mut btp);
            let right: f64 = btp.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!((left - right).abs() <= 1e-13 * left.abs().max(1.0));
        }
    }

    #[test]
    fn zero_load_and_partition_load() {
        let sp = space(4, Family::Mini);
        let rule = QuadRule::for_degree(ASSEMBLY_DEGREE).unwrap();
        let zero = assemble_load(&sp, |_| Ok([0.0, 0.0]), &rule).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));

        let mesh = sp.mesh();
        let load = p1_component_load_full(mesh, |_| [1.0, 0.0], &rule);
        let total: f64 = load.iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn load_failure_reports_location() {
        let sp = space(2, Family::Mini);
        let rule = QuadRule::for_degree(2).unwrap();
        let err = assemble_load(&sp, |_| Ok([f64::NAN, 0.0]), &rule).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert!(err.to_string().contains("triangle"));
    }

    /// Degree 8 integrates every operator integrand exactly when the wind is
    /// itself a finite-element field, so degree 10 must reproduce the
    /// matrices to rounding.
    #[test]
    fn assembly_degree_is_sufficient() {
        for family in [Family::Mini, Family::TaylorHood] {
            let sp = space(4, family);
            let a8 = assemble_operators_with_degree(&sp, 8);
            let a10 = assemble_operators_with_degree(&sp, 10);
            for (m8, m10) in [
                (&a8.mass, &a10.mass),
                (&a8.stiffness, &a10.stiffness),
                (&a8.divergence, &a10.divergence),
            ] {
                let scale = m8.max_abs();
                for ((r, c, v8), (_, _, v10)) in m8.entries().zip(m10.entries()) {
                    assert!(
                        (v8 - v10).abs() <= 1e-12 * scale,
                        "{family:?} entry ({r},{c}): {v8} vs {v10}"
                    );
                }
            }
            let wind = random_field(&sp, 31);
            for mode in [ConvectionMode::Skew, ConvectionMode::Plain] {
                let n8 =
                    assemble_convection_with_degree(&sp, Wind::Field(&wind), mode, 8).unwrap();
                let n10 =
                    assemble_convection_with_degree(&sp, Wind::Field(&wind), mode, 10).unwrap();
                let scale = n8.max_abs();
                for ((_, _, v8), (_, _, v10)) in n8.entries().zip(n10.entries()) {
                    assert!((v8 - v10).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    /// The Newton linearization must match finite differences of the skew
    /// residual `u -> N_skew(u) u`.
    #[test]
    fn convection_jacobian_matches_finite_differences() {
        let sp = space(3, Family::Mini);
        let u = random_field(&sp, 41);
        let n_u = assemble_convection(&sp, Wind::Field(&u), ConvectionMode::Skew).unwrap();
        let d_u = assemble_convection_derivative(&sp, &u).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let dir: Vec<f64> = (0..sp.n_u()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let eps = 1e-6;

        let residual = |coeffs: &[f64]| -> Vec<f64> {
            let f = FEField::from_coeffs(&sp, FieldRole::Velocity, coeffs.to_vec());
            let n = assemble_convection(&sp, Wind::Field(&f), ConvectionMode::Skew).unwrap();
            let mut out = vec![0.0; sp.n_u()];
            n.matvec(coeffs, &mut out);
            out
        };
        let mut up = u.coeffs().to_vec();
        let mut um = u.coeffs().to_vec();
        for i in 0..up.len() {
            up[i] += eps * dir[i];
            um[i] -= eps * dir[i];
        }
        let rp = residual(&up);
        let rm = residual(&um);

        // J dir = N(u) dir + D(u) dir
        let mut jd = vec![0.0; sp.n_u()];
        n_u.matvec(&dir, &mut jd);
        d_u.matvec_add(1.0, &dir, &mut jd);

        for i in 0..jd.len() {
            let fd = (rp[i] - rm[i]) / (2.0 * eps);
            assert!(
                (fd - jd[i]).abs() < 1e-7,
                "row {i}: fd {fd} vs analytic {}",
                jd[i]
            );
        }
    }
}
