//! Direct solution of the indefinite velocity-pressure systems.
//!
//! The augmented system
//!
//! ```text
//! [ A   -B^T   0  ] [u]   [f]
//! [ B    0    m_p ] [p] = [g]
//! [ 0   m_p^T  0  ] [l]   [0]
//! ```
//!
//! couples the velocity block `A` with the divergence constraint and pins
//! the pressure mean through a scalar Lagrange multiplier instead of fixing
//! a pressure node, so error norms are not skewed by an arbitrary pinning.
//! The linear algebra is delegated to faer's sparse LU with partial
//! pivoting; everything in front of it (blocks, residual checks, pressure
//! normalization) stays ours. A numerically singular factorization is the
//! runtime signal that an Oseen operator lost coercivity (coarse mesh too
//! coarse for the viscosity); it is reported, never regularized.

use std::sync::Arc;
use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::prelude::Reborrow;
use faer::sparse::{SparseColMat, Triplet};

use crate::assembly::OperatorSet;
use crate::error::{Error, Result};
use crate::fe_space::{FEField, FESpacePair, FieldRole};
use crate::sparse::SparseMatrix;

/// Relative residual bound enforced on every solve.
const RESIDUAL_TOL: f64 = 1e-10;

static BACKEND_INIT: Once = Once::new();

/// Direct solves must be bitwise reproducible; pin the backend to
/// sequential execution once.
fn ensure_deterministic_backend() {
    BACKEND_INIT.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

#[derive(Debug)]
pub struct SaddleSystem {
    space: Arc<FESpacePair>,
    /// Velocity block, `n_u x n_u` (possibly nonsymmetric).
    pub a: SparseMatrix,
    /// Divergence block, `n_p x n_u`, entries `(psi, div phi)`.
    pub b: SparseMatrix,
    /// Pressure means, length `n_p`.
    pub pressure_mean: Vec<f64>,
    /// Velocity load.
    pub f: Vec<f64>,
    /// Constraint load (normally zero).
    pub g: Vec<f64>,
}

#[derive(Debug)]
pub struct SaddleSolution {
    pub velocity: FEField,
    pub pressure: FEField,
    pub multiplier: f64,
}

impl SaddleSystem {
    pub fn new(
        space: &Arc<FESpacePair>,
        a: SparseMatrix,
        b: SparseMatrix,
        pressure_mean: Vec<f64>,
        f: Vec<f64>,
        g: Vec<f64>,
    ) -> Self {
        let (n_u, n_p) = (space.n_u(), space.n_p());
        assert_eq!((a.nrows(), a.ncols()), (n_u, n_u));
        assert_eq!((b.nrows(), b.ncols()), (n_p, n_u));
        assert_eq!(pressure_mean.len(), n_p);
        assert_eq!(f.len(), n_u);
        assert_eq!(g.len(), n_p);
        Self {
            space: Arc::clone(space),
            a,
            b,
            pressure_mean,
            f,
            g,
        }
    }

    /// Convenience constructor sharing the divergence block and mean vector
    /// of an assembled operator set.
    pub fn with_operators(ops: &OperatorSet, a: SparseMatrix, f: Vec<f64>) -> Self {
        let g = vec![0.0; ops.space().n_p()];
        Self::new(
            ops.space(),
            a,
            ops.divergence.clone(),
            ops.pressure_mean.clone(),
            f,
            g,
        )
    }

    pub fn space(&self) -> &Arc<FESpacePair> {
        &self.space
    }

    /// Size of the augmented matrix, `n_u + n_p + 1`.
    pub fn dim(&self) -> usize {
        self.space.n_u() + self.space.n_p() + 1
    }

    fn triplets(&self) -> Vec<Triplet<usize, usize, f64>> {
        let n_u = self.space.n_u();
        let n_p = self.space.n_p();
        let dim = self.dim();
        let mut t = Vec::with_capacity(self.a.nnz() + 2 * self.b.nnz() + 2 * n_p);
        for (r, c, v) in self.a.entries() {
            t.push(Triplet::new(r, c, v));
        }
        for (q, c, v) in self.b.entries() {
            t.push(Triplet::new(c, n_u + q, -v));
            t.push(Triplet::new(n_u + q, c, v));
        }
        for (q, &m) in self.pressure_mean.iter().enumerate() {
            t.push(Triplet::new(n_u + q, dim - 1, m));
            t.push(Triplet::new(dim - 1, n_u + q, m));
        }
        t
    }

    /// Residual of the augmented system at `(u, p, l)`, infinity norm.
    fn residual_inf(&self, u: &[f64], p: &[f64], multiplier: f64) -> f64 {
        let n_u = self.space.n_u();
        let n_p = self.space.n_p();
        let mut r_u = self.f.clone();
        self.a.matvec_add(-1.0, u, &mut r_u);
        self.b.tr_matvec_add(1.0, p, &mut r_u);
        let mut r_p = self.g.clone();
        self.b.matvec_add(-1.0, u, &mut r_p);
        for q in 0..n_p {
            r_p[q] -= self.pressure_mean[q] * multiplier;
        }
        let r_mean: f64 = -self
            .pressure_mean
            .iter()
            .zip(p)
            .map(|(m, pi)| m * pi)
            .sum::<f64>();
        let mut norm = r_mean.abs();
        for v in r_u.iter().take(n_u).chain(r_p.iter()) {
            norm = norm.max(v.abs());
        }
        norm
    }

    fn rhs_norm(&self) -> f64 {
        self.f
            .iter()
            .chain(self.g.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// A factorization cache for sequences of systems sharing one sparsity
/// pattern (Newton iterations, time steps). Falls back to a fresh symbolic
/// analysis whenever the pattern changes.
#[derive(Default)]
pub struct SaddleSolver {
    symbolic: Option<faer::sparse::linalg::solvers::SymbolicLu<usize>>,
    pattern: Option<(Vec<usize>, Vec<usize>)>,
}

impl SaddleSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, sys: &SaddleSystem) -> Result<SaddleSolution> {
        ensure_deterministic_backend();
        let dim = sys.dim();
        let triplets = sys.triplets();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &triplets)
            .map_err(|e| Error::Solver(format!("augmented matrix assembly: {e:?}")))?;

        let same_pattern = self
            .pattern
            .as_ref()
            .is_some_and(|(cp, ri)| cp == mat.col_ptr() && ri == mat.row_idx());
        if !same_pattern {
            // the backend panics on some degenerate structures instead of
            // returning Err; map both failure modes onto Error::Solver
            let symbolic = std::panic::catch_unwind(|| {
                faer::sparse::linalg::solvers::SymbolicLu::try_new(mat.symbolic())
            })
            .map_err(|_| Error::Solver("symbolic factorization panicked (degenerate structure)".into()))?
            .map_err(|e| Error::Solver(format!("symbolic factorization failed: {e:?}")))?;
            self.symbolic = Some(symbolic);
            self.pattern = Some((mat.col_ptr().to_vec(), mat.row_idx().to_vec()));
        }
        let symbolic = self.symbolic.as_ref().unwrap().clone();
        let lu = std::panic::catch_unwind(|| {
            faer::sparse::linalg::solvers::Lu::try_new_with_symbolic(symbolic, mat.rb())
        })
        .map_err(|_| Error::Solver(format!("zero pivot in numeric factorization (dim {dim})")))?
        .map_err(|e| match e {
            faer::sparse::linalg::LuError::SymbolicSingular { index } => Error::Solver(format!(
                "structurally singular augmented matrix (pivot {index} of {dim})"
            )),
            other => Error::Solver(format!("numeric factorization failed: {other:?}")),
        })?;

        let n_u = sys.space.n_u();
        let n_p = sys.space.n_p();
        let mut rhs = faer::Mat::<f64>::zeros(dim, 1);
        for (i, v) in sys.f.iter().enumerate() {
            rhs[(i, 0)] = *v;
        }
        for (q, v) in sys.g.iter().enumerate() {
            rhs[(n_u + q, 0)] = *v;
        }
        let x = lu.solve(&rhs);

        let u: Vec<f64> = (0..n_u).map(|i| x[(i, 0)]).collect();
        let mut p: Vec<f64> = (0..n_p).map(|q| x[(n_u + q, 0)]).collect();
        let multiplier = x[(dim - 1, 0)];

        let residual = sys.residual_inf(&u, &p, multiplier);
        let bound = RESIDUAL_TOL * (1.0 + sys.rhs_norm());
        if !residual.is_finite() || residual > bound {
            return Err(Error::Solver(format!(
                "numerically singular system: residual {residual:.3e} exceeds {bound:.3e} \
                 (coercivity lost: coarse mesh too coarse for this viscosity?)"
            )));
        }

        // mean-zero representative of the quotient-space pressure
        let mean: f64 = sys
            .pressure_mean
            .iter()
            .zip(&p)
            .map(|(m, pi)| m * pi)
            .sum();
        for pi in p.iter_mut() {
            *pi -= mean;
        }

        Ok(SaddleSolution {
            velocity: FEField::from_coeffs(&sys.space, FieldRole::Velocity, u),
            pressure: FEField::from_coeffs(&sys.space, FieldRole::Pressure, p),
            multiplier,
        })
    }
}

/// One-shot solve.
pub fn solve_saddle(sys: &SaddleSystem) -> Result<SaddleSolution> {
    SaddleSolver::new().solve(sys)
}

/// Discrete Leray projection: the closest discretely divergence-free field
/// in the mass norm, computed as a constrained mass solve.
pub fn leray_project(ops: &OperatorSet, field: &FEField) -> Result<FEField> {
    let space = ops.space();
    let mut f = vec![0.0; space.n_u()];
    ops.mass.matvec(field.coeffs(), &mut f);
    let sys = SaddleSystem::with_operators(ops, ops.mass.clone(), f);
    Ok(solve_saddle(&sys)?.velocity)
}

/// Matrix-level coercivity witness for an Oseen velocity block: the smallest
/// ratio `v^T A v / (nu v^T K v)` over discretely divergence-free random
/// vectors. Values at or above one half indicate the convection did not eat
/// the viscous coercivity.
pub fn coercivity_witness(
    ops: &OperatorSet,
    a_oseen: &SparseMatrix,
    nu: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let space = ops.space();
    let n_u = space.n_u();
    // simple xorshift so the core crate does not need an RNG dependency
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).max(1);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let mut min_ratio = f64::INFINITY;
    for _ in 0..trials {
        let raw: Vec<f64> = (0..n_u).map(|_| next()).collect();
        let raw = FEField::from_coeffs(space, FieldRole::Velocity, raw);
        let v = leray_project(ops, &raw)?;
        let mut av = vec![0.0; n_u];
        a_oseen.matvec(v.coeffs(), &mut av);
        let num: f64 = v.coeffs().iter().zip(&av).map(|(a, b)| a * b).sum();
        let mut kv = vec![0.0; n_u];
        ops.stiffness.matvec(v.coeffs(), &mut kv);
        let den: f64 = v.coeffs().iter().zip(&kv).map(|(a, b)| a * b).sum();
        min_ratio = min_ratio.min(num / (nu * den));
    }
    Ok(min_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_operators;
    use crate::fe_space::Family;
    use crate::mesh::StructuredTriMesh;
    use crate::sparse::CooBuilder;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, family: Family) -> (Arc<FESpacePair>, OperatorSet) {
        let mesh = Arc::new(StructuredTriMesh::unit_square(n).unwrap());
        let space = Arc::new(FESpacePair::build(mesh, family));
        let ops = assemble_operators(&space);
        (space, ops)
    }

    fn random_field(space: &Arc<FESpacePair>, seed: u64) -> FEField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..space.n_u()).map(|_| rng.random_range(-1.0..1.0)).collect();
        FEField::from_coeffs(space, FieldRole::Velocity, coeffs)
    }

    #[test]
    fn zero_load_gives_zero_solution() {
        let (space, ops) = setup(3, Family::Mini);
        let sys = SaddleSystem::with_operators(&ops, ops.mass.clone(), vec![0.0; space.n_u()]);
        let sol = solve_saddle(&sys).unwrap();
        assert!(sol.velocity.coeffs().iter().all(|&v| v.abs() < 1e-14));
        assert!(sol.pressure.coeffs().iter().all(|&v| v.abs() < 1e-14));
        assert!(sol.multiplier.abs() < 1e-14);
    }

    #[test]
    fn leray_projection_is_idempotent() {
        let (space, ops) = setup(4, Family::Mini);
        let raw = random_field(&space, 5);
        let w = leray_project(&ops, &raw).unwrap();
        let mut bw = vec![0.0; space.n_p()];
        ops.divergence.matvec(w.coeffs(), &mut bw);
        let div = bw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(div <= 1e-10, "|Bw|_inf = {div:e}");

        let w2 = leray_project(&ops, &w).unwrap();
        for (a, b) in w.coeffs().iter().zip(w2.coeffs()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn mass_solve_fixes_constrained_fields() {
        // A = M, f = M w for a discretely divergence-free w: velocity = w
        let (space, ops) = setup(4, Family::TaylorHood);
        let w = leray_project(&ops, &random_field(&space, 6)).unwrap();
        let mut f = vec![0.0; space.n_u()];
        ops.mass.matvec(w.coeffs(), &mut f);
        let sys = SaddleSystem::with_operators(&ops, ops.mass.clone(), f);
        let sol = solve_saddle(&sys).unwrap();
        for (a, b) in sol.velocity.coeffs().iter().zip(w.coeffs()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn pressure_comes_back_mean_zero() {
        let (space, ops) = setup(4, Family::Mini);
        let rule = crate::quadrature::QuadRule::for_degree(8).unwrap();
        let f = crate::assembly::assemble_load(&space, |p| Ok([p[1], -p[0]]), &rule).unwrap();
        let a = SparseMatrix::linear_combination(&[(0.1, &ops.stiffness)]);
        let sys = SaddleSystem::with_operators(&ops, a, f);
        let sol = solve_saddle(&sys).unwrap();
        assert!(sol.pressure.pressure_mean().abs() < 1e-12);
        let mut bu = vec![0.0; space.n_p()];
        ops.divergence.matvec(sol.velocity.coeffs(), &mut bu);
        let div = bu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let unorm = sol
            .velocity
            .coeffs()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(div <= 1e-10 * (1.0 + unorm));
    }

    #[test]
    fn repeated_solves_are_reproducible() {
        let (space, ops) = setup(3, Family::Mini);
        let rule = crate::quadrature::QuadRule::for_degree(8).unwrap();
        let f = crate::assembly::assemble_load(&space, |p| Ok([p[0] * p[1], 1.0]), &rule).unwrap();
        let a = SparseMatrix::linear_combination(&[(0.05, &ops.stiffness), (1.0, &ops.mass)]);
        let sys = SaddleSystem::with_operators(&ops, a.clone(), f.clone());
        let s1 = solve_saddle(&sys).unwrap();
        let s2 = solve_saddle(&sys).unwrap();
        for (x, y) in s1.velocity.coeffs().iter().zip(s2.velocity.coeffs()) {
            assert!((x - y).abs() <= 1e-13 * x.abs().max(1.0));
        }
        assert_eq!(space.n_u(), sys.space().n_u());
    }

    #[test]
    fn cached_solver_matches_one_shot_across_value_changes() {
        let (space, ops) = setup(3, Family::TaylorHood);
        let rule = crate::quadrature::QuadRule::for_degree(8).unwrap();
        let f = crate::assembly::assemble_load(&space, |p| Ok([p[1], p[0]]), &rule).unwrap();
        let mut cached = SaddleSolver::new();
        for scale in [1.0, 2.0, 0.5] {
            let a = SparseMatrix::linear_combination(&[
                (scale, &ops.mass),
                (0.01 * scale, &ops.stiffness),
            ]);
            let sys = SaddleSystem::with_operators(&ops, a, f.clone());
            let fast = cached.solve(&sys).unwrap();
            let slow = solve_saddle(&sys).unwrap();
            for (x, y) in fast.velocity.coeffs().iter().zip(slow.velocity.coeffs()) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn singular_system_is_reported() {
        // dropping the mean constraint leaves the constant pressure in the
        // null space; the solver must report it rather than return garbage
        let (space, ops) = setup(3, Family::Mini);
        let sys = SaddleSystem::new(
            &space,
            ops.mass.clone(),
            ops.divergence.clone(),
            vec![0.0; space.n_p()],
            vec![0.0; space.n_u()],
            vec![0.0; space.n_p()],
        );
        assert!(matches!(solve_saddle(&sys), Err(Error::Solver(_))));
    }

    #[test]
    fn structurally_singular_matrix_is_reported() {
        let (space, ops) = setup(2, Family::Mini);
        // an all-zero velocity block with an empty row pattern
        let a = CooBuilder::new(space.n_u(), space.n_u()).finish();
        let sys = SaddleSystem::with_operators(&ops, a, vec![0.0; space.n_u()]);
        assert!(matches!(solve_saddle(&sys), Err(Error::Solver(_))));
    }

    #[test]
    fn solution_validated_against_dense_lu() {
        // independent oracle: assemble the same augmented system densely and
        // solve with nalgebra
        let (space, ops) = setup(2, Family::Mini);
        let rule = crate::quadrature::QuadRule::for_degree(8).unwrap();
        let f =
            crate::assembly::assemble_load(&space, |p| Ok([p[0] + 0.3, p[1] - 0.1]), &rule)
                .unwrap();
        let a = SparseMatrix::linear_combination(&[(0.07, &ops.stiffness), (0.5, &ops.mass)]);
        let sys = SaddleSystem::with_operators(&ops, a, f);
        let sol = solve_saddle(&sys).unwrap();

        let dim = sys.dim();
        let n_u = space.n_u();
        let mut dense = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        for t in sys.triplets() {
            dense[(t.row, t.col)] += t.val;
        }
        let mut rhs = nalgebra::DVector::<f64>::zeros(dim);
        for (i, v) in sys.f.iter().enumerate() {
            rhs[i] = *v;
        }
        let x = dense.lu().solve(&rhs).expect("dense solve");
        for (i, v) in sol.velocity.coeffs().iter().enumerate() {
            assert!((v - x[i]).abs() < 1e-9, "velocity dof {i}");
        }
        // dense pressure, shifted to mean zero, must match too
        let mean: f64 = sys
            .pressure_mean
            .iter()
            .enumerate()
            .map(|(q, m)| m * x[n_u + q])
            .sum();
        for (q, v) in sol.pressure.coeffs().iter().enumerate() {
            assert!((v - (x[n_u + q] - mean)).abs() < 1e-9, "pressure dof {q}");
        }
    }

    #[test]
    fn coercivity_witness_is_one_for_pure_stokes() {
        let (_, ops) = setup(3, Family::Mini);
        let nu = 0.05;
        let a = SparseMatrix::linear_combination(&[(nu, &ops.stiffness)]);
        let ratio = coercivity_witness(&ops, &a, nu, 5, 42).unwrap();
        assert!((ratio - 1.0).abs() < 1e-10, "ratio {ratio}");
    }
}
