//! Global degree-of-freedom management for velocity-pressure pairs.
//!
//! Velocity components share one scalar node layout: interior vertices first,
//! then the per-triangle bubbles (mini) or interior edge midpoints
//! (Taylor-Hood). Component `c` of a velocity field owns the coefficient
//! slice `[c * n_scalar, (c + 1) * n_scalar)`. Homogeneous Dirichlet data is
//! enforced by construction: boundary vertex/edge nodes are simply not part
//! of the free set. Pressure is P1 on every vertex; the zero-mean condition
//! is handled at solve time and by [`FEField::normalize_pressure`].

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fe_basis::{self, ShapeKind, MAX_LOCAL};
use crate::mesh::StructuredTriMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Mini,
    TaylorHood,
}

impl Family {
    /// Scalar shape functions per element for the velocity space.
    pub fn local_count(self) -> usize {
        match self {
            Family::Mini => 4,
            Family::TaylorHood => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    Velocity,
    Pressure,
}

#[derive(Debug)]
pub struct FESpacePair {
    family: Family,
    mesh: Arc<StructuredTriMesh>,
    /// Free scalar node index per vertex (`None` on the boundary).
    vertex_node: Vec<Option<usize>>,
    /// Mini: bubble node per triangle (always present).
    /// Taylor-Hood: node per edge (`None` on boundary edges).
    extra_node: Vec<Option<usize>>,
    n_vertex_nodes: usize,
    n_scalar: usize,
}

impl FESpacePair {
    pub fn build(mesh: Arc<StructuredTriMesh>, family: Family) -> Self {
        let mut vertex_node = vec![None; mesh.n_vertices()];
        let mut next = 0;
        for v in 0..mesh.n_vertices() {
            if !mesh.is_boundary_vertex(v) {
                vertex_node[v] = Some(next);
                next += 1;
            }
        }
        let n_vertex_nodes = next;
        let extra_node = match family {
            Family::Mini => (0..mesh.n_triangles())
                .map(|t| {
                    let node = next + t;
                    Some(node)
                })
                .collect::<Vec<_>>(),
            Family::TaylorHood => {
                let mut nodes = vec![None; mesh.edges().len()];
                let mut e_next = next;
                for (e, slot) in nodes.iter_mut().enumerate() {
                    if !mesh.is_boundary_edge(e) {
                        *slot = Some(e_next);
                        e_next += 1;
                    }
                }
                nodes
            }
        };
        let n_extra = extra_node.iter().filter(|n| n.is_some()).count();
        Self {
            family,
            mesh,
            vertex_node,
            extra_node,
            n_vertex_nodes,
            n_scalar: next + n_extra,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn mesh(&self) -> &Arc<StructuredTriMesh> {
        &self.mesh
    }

    /// Free scalar velocity nodes per component.
    pub fn n_scalar_nodes(&self) -> usize {
        self.n_scalar
    }

    /// Free velocity degrees of freedom (both components).
    pub fn n_u(&self) -> usize {
        2 * self.n_scalar
    }

    /// Pressure degrees of freedom (all vertices).
    pub fn n_p(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn velocity_dof(&self, component: usize, node: usize) -> usize {
        component * self.n_scalar + node
    }

    pub fn vertex_node(&self, v: usize) -> Option<usize> {
        self.vertex_node[v]
    }

    /// Global free node per local scalar shape function of triangle `t`
    /// (`None` for constrained boundary nodes), plus the local count.
    pub fn local_nodes(&self, t: usize) -> ([Option<usize>; MAX_LOCAL], usize) {
        let tri = self.mesh.triangle(t);
        let mut nodes = [None; MAX_LOCAL];
        for k in 0..3 {
            nodes[k] = self.vertex_node[tri[k]];
        }
        match self.family {
            Family::Mini => {
                nodes[3] = self.extra_node[t];
                (nodes, 4)
            }
            Family::TaylorHood => {
                let edges = self.mesh.triangle_edges(t);
                for k in 0..3 {
                    nodes[3 + k] = self.extra_node[edges[k]];
                }
                (nodes, 6)
            }
        }
    }

    /// Values and barycentric partials of the local scalar velocity basis.
    pub fn local_shape(
        &self,
        lambda: [f64; 3],
        values: &mut [f64; MAX_LOCAL],
        partials: &mut [[f64; 3]; MAX_LOCAL],
    ) -> usize {
        match self.family {
            Family::Mini => {
                ShapeKind::P1.eval(lambda, values, partials);
                let (bv, bd) = fe_basis::eval_bubble(lambda);
                values[3] = bv;
                partials[3] = bd;
                4
            }
            Family::TaylorHood => {
                ShapeKind::P2.eval(lambda, values, partials);
                6
            }
        }
    }
}

/// A discrete function: coefficients over the free DOFs of its space.
/// Velocity fields are implicitly zero on the boundary.
#[derive(Debug, Clone)]
pub struct FEField {
    space: Arc<FESpacePair>,
    role: FieldRole,
    coeffs: Vec<f64>,
}

impl FEField {
    pub fn zeros(space: &Arc<FESpacePair>, role: FieldRole) -> Self {
        let len = match role {
            FieldRole::Velocity => space.n_u(),
            FieldRole::Pressure => space.n_p(),
        };
        Self {
            space: Arc::clone(space),
            role,
            coeffs: vec![0.0; len],
        }
    }

    pub fn from_coeffs(space: &Arc<FESpacePair>, role: FieldRole, coeffs: Vec<f64>) -> Self {
        let expected = match role {
            FieldRole::Velocity => space.n_u(),
            FieldRole::Pressure => space.n_p(),
        };
        assert_eq!(coeffs.len(), expected, "coefficient vector length mismatch");
        Self {
            space: Arc::clone(space),
            role,
            coeffs,
        }
    }

    /// Nodal interpolation of a velocity field. Boundary values are
    /// discarded (the function is assumed compatible, i.e. zero on the
    /// boundary); bubble coefficients are set to zero.
    pub fn interpolate_velocity(
        space: &Arc<FESpacePair>,
        f: impl Fn([f64; 2]) -> [f64; 2],
    ) -> Result<Self> {
        let mut field = Self::zeros(space, FieldRole::Velocity);
        let mesh = space.mesh();
        let set = |node: usize, p: [f64; 2], field: &mut Self| -> Result<()> {
            let v = f(p);
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(Error::NonFinite(format!(
                    "interpolated value at ({}, {})",
                    p[0], p[1]
                )));
            }
            for c in 0..2 {
                field.coeffs[space.velocity_dof(c, node)] = v[c];
            }
            Ok(())
        };
        for v in 0..mesh.n_vertices() {
            if let Some(node) = space.vertex_node(v) {
                set(node, mesh.vertex(v), &mut field)?;
            }
        }
        if space.family() == Family::TaylorHood {
            for (e, edge) in mesh.edges().iter().enumerate() {
                if let Some(node) = space.extra_node[e] {
                    set(node, edge.midpoint, &mut field)?;
                }
            }
        }
        Ok(field)
    }

    /// Nodal interpolation of a pressure field (all vertices).
    pub fn interpolate_pressure(
        space: &Arc<FESpacePair>,
        f: impl Fn([f64; 2]) -> f64,
    ) -> Result<Self> {
        let mut field = Self::zeros(space, FieldRole::Pressure);
        for v in 0..space.mesh().n_vertices() {
            let value = f(space.mesh().vertex(v));
            if !value.is_finite() {
                let p = space.mesh().vertex(v);
                return Err(Error::NonFinite(format!(
                    "interpolated pressure at ({}, {})",
                    p[0], p[1]
                )));
            }
            field.coeffs[v] = value;
        }
        Ok(field)
    }

    pub fn space(&self) -> &Arc<FESpacePair> {
        &self.space
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Local velocity coefficients of triangle `t`: per local scalar node,
    /// the two component coefficients (zero for constrained nodes).
    pub fn local_velocity_coeffs(&self, t: usize) -> ([[f64; 2]; MAX_LOCAL], usize) {
        debug_assert_eq!(self.role, FieldRole::Velocity);
        let (nodes, count) = self.space.local_nodes(t);
        let mut local = [[0.0; 2]; MAX_LOCAL];
        for k in 0..count {
            if let Some(node) = nodes[k] {
                for c in 0..2 {
                    local[k][c] = self.coeffs[self.space.velocity_dof(c, node)];
                }
            }
        }
        (local, count)
    }

    /// Velocity value at a point (any point of the unit square; the owning
    /// mesh is located first, so this works across grids).
    pub fn eval_velocity(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let (t, lambda) = self.space.mesh().locate_point(p)?;
        Ok(self.eval_velocity_local(t, lambda).0)
    }

    /// Velocity value and gradient; `grad[c]` is the gradient of component `c`.
    pub fn eval_velocity_grad(&self, p: [f64; 2]) -> Result<([f64; 2], [[f64; 2]; 2])> {
        let (t, lambda) = self.space.mesh().locate_point(p)?;
        Ok(self.eval_velocity_local(t, lambda))
    }

    /// Velocity value and gradient at a known location.
    pub fn eval_velocity_local(&self, t: usize, lambda: [f64; 3]) -> ([f64; 2], [[f64; 2]; 2]) {
        debug_assert_eq!(self.role, FieldRole::Velocity);
        let mut values = [0.0; MAX_LOCAL];
        let mut partials = [[0.0; 3]; MAX_LOCAL];
        let count = self.space.local_shape(lambda, &mut values, &mut partials);
        let (local, _) = self.local_velocity_coeffs(t);
        let g = self.space.mesh().triangle_affine_data(t);
        let mut value = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        for k in 0..count {
            let mut dphi = [0.0; 2];
            for i in 0..3 {
                dphi[0] += partials[k][i] * g.grad_lambda[i][0];
                dphi[1] += partials[k][i] * g.grad_lambda[i][1];
            }
            for c in 0..2 {
                value[c] += local[k][c] * values[k];
                grad[c][0] += local[k][c] * dphi[0];
                grad[c][1] += local[k][c] * dphi[1];
            }
        }
        (value, grad)
    }

    pub fn eval_pressure(&self, p: [f64; 2]) -> Result<f64> {
        debug_assert_eq!(self.role, FieldRole::Pressure);
        let (t, lambda) = self.space.mesh().locate_point(p)?;
        let tri = self.space.mesh().triangle(t);
        Ok((0..3).map(|k| lambda[k] * self.coeffs[tri[k]]).sum())
    }

    /// Drops the bubble components of a mini velocity field.
    pub fn linear_part(&self) -> Result<Self> {
        if self.role != FieldRole::Velocity || self.space.family() != Family::Mini {
            return Err(Error::invalid(
                "linear_part is defined for mini velocity fields only",
            ));
        }
        let mut out = self.clone();
        let n_scalar = self.space.n_scalar_nodes();
        for c in 0..2 {
            for node in self.space.n_vertex_nodes..n_scalar {
                out.coeffs[self.space.velocity_dof(c, node)] = 0.0;
            }
        }
        Ok(out)
    }

    /// Mean of a P1 pressure field, integrated exactly:
    /// `sum_T area * (p1 + p2 + p3) / 3`.
    pub fn pressure_mean(&self) -> f64 {
        debug_assert_eq!(self.role, FieldRole::Pressure);
        let mesh = self.space.mesh();
        let mut mean = 0.0;
        for t in 0..mesh.n_triangles() {
            let tri = mesh.triangle(t);
            let area = mesh.triangle_affine_data(t).area;
            mean += area * (self.coeffs[tri[0]] + self.coeffs[tri[1]] + self.coeffs[tri[2]]) / 3.0;
        }
        mean
    }

    /// Returns the zero-mean representative of a pressure field.
    pub fn normalize_pressure(&self) -> Self {
        debug_assert_eq!(self.role, FieldRole::Pressure);
        let mean = self.pressure_mean();
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c -= mean;
        }
        out
    }

    /// Samples the field on a uniform `m x m` grid as CSV
    /// (`x,y,u1,u2` for velocity, `x,y,p` for pressure).
    pub fn write_grid_csv(&self, m: usize, w: &mut impl Write) -> Result<()> {
        if m < 2 {
            return Err(Error::invalid("grid sampling needs at least 2 points per side"));
        }
        match self.role {
            FieldRole::Velocity => writeln!(w, "x,y,u1,u2")?,
            FieldRole::Pressure => writeln!(w, "x,y,p")?,
        }
        for j in 0..m {
            let y = j as f64 / (m - 1) as f64;
            for i in 0..m {
                let x = i as f64 / (m - 1) as f64;
                match self.role {
                    FieldRole::Velocity => {
                        let v = self.eval_velocity([x, y])?;
                        writeln!(w, "{:e},{:e},{:e},{:e}", x, y, v[0], v[1])?;
                    }
                    FieldRole::Pressure => {
                        let v = self.eval_pressure([x, y])?;
                        writeln!(w, "{:e},{:e},{:e}", x, y, v)?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn space(n: usize, family: Family) -> Arc<FESpacePair> {
        let mesh = Arc::new(StructuredTriMesh::unit_square(n).unwrap());
        Arc::new(FESpacePair::build(mesh, family))
    }

    #[test]
    fn dof_counts() {
        let mini = space(2, Family::Mini);
        assert_eq!(mini.n_u(), 18); // 2 * (1 interior vertex + 8 bubbles)
        assert_eq!(mini.n_p(), 9);

        let th = space(2, Family::TaylorHood);
        assert_eq!(th.n_u(), 18); // 2 * (1 interior vertex + 8 interior edges)
        assert_eq!(th.n_p(), 9);

        let mini10 = space(10, Family::Mini);
        assert_eq!(mini10.n_p(), 121);
        assert_eq!(mini10.n_u(), 2 * (81 + 200));
    }

    #[test]
    fn interpolate_zero_gives_zero() {
        let sp = space(3, Family::Mini);
        let f = FEField::interpolate_velocity(&sp, |_| [0.0, 0.0]).unwrap();
        assert!(f.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn interpolate_sets_nodal_values() {
        let sp = space(2, Family::Mini);
        // experiment-2 style initial data; at the single interior vertex
        // (1/2, 1/2) the first component is zero because cos(pi/2) = 0
        let f = FEField::interpolate_velocity(&sp, |p| {
            [
                -6.0 * (PI * p[0]).sin().powi(3) * (PI * p[1]).sin().powi(2) * (PI * p[1]).cos(),
                6.0 * (PI * p[0]).sin().powi(2) * (PI * p[1]).sin().powi(3) * (PI * p[0]).cos(),
            ]
        })
        .unwrap();
        let node = sp.vertex_node(4).unwrap(); // vertex (1/2, 1/2) of the N=2 mesh
        assert!(f.coeffs()[sp.velocity_dof(0, node)].abs() < 1e-15);
        // linear function: exact nodal value at the interior vertex
        let g = FEField::interpolate_velocity(&sp, |p| [p[0] * (1.0 - p[0]), 0.0]).unwrap();
        assert_eq!(g.coeffs()[sp.velocity_dof(0, node)], 0.25);
    }

    #[test]
    fn non_finite_interpolation_rejected() {
        let sp = space(2, Family::Mini);
        let err = FEField::interpolate_velocity(&sp, |p| [1.0 / (p[0] - 0.5), 0.0]);
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn eval_reproduces_interior_values() {
        let sp = space(4, Family::Mini);
        let c = 2.5;
        let f = FEField::interpolate_velocity(&sp, |p| {
            let interior =
                p[0] > 1e-12 && p[0] < 1.0 - 1e-12 && p[1] > 1e-12 && p[1] < 1.0 - 1e-12;
            if interior {
                [c, c]
            } else {
                [0.0, 0.0]
            }
        })
        .unwrap();
        let v = f.eval_velocity([0.5, 0.5]).unwrap();
        assert!((v[0] - c).abs() < 1e-14 && (v[1] - c).abs() < 1e-14);
    }

    #[test]
    fn pressure_eval_at_vertex_returns_coefficient() {
        let sp = space(3, Family::Mini);
        let p = FEField::interpolate_pressure(&sp, |q| q[0] + 2.0 * q[1]).unwrap();
        let v = 5; // some vertex
        let x = sp.mesh().vertex(v);
        assert!((p.eval_pressure(x).unwrap() - p.coeffs()[v]).abs() < 1e-14);
    }

    #[test]
    fn velocity_continuous_across_edges() {
        let sp = space(4, Family::TaylorHood);
        let f = FEField::interpolate_velocity(&sp, |p| {
            [
                (PI * p[0]).sin() * (PI * p[1]).sin(),
                p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]),
            ]
        })
        .unwrap();
        // a point on the shared diagonal of an interior cell, evaluated from
        // both adjacent triangles
        let cell = (1usize, 2usize);
        let lower = 2 * (cell.1 * 4 + cell.0);
        let upper = lower + 1;
        let p = [(cell.0 as f64 + 0.4) / 4.0, (cell.1 as f64 + 0.4) / 4.0];
        let lam_low = sp.mesh().barycentric(lower, p);
        let lam_up = sp.mesh().barycentric(upper, p);
        let (v1, _) = f.eval_velocity_local(lower, lam_low);
        let (v2, _) = f.eval_velocity_local(upper, lam_up);
        assert!((v1[0] - v2[0]).abs() < 1e-13);
        assert!((v1[1] - v2[1]).abs() < 1e-13);
    }

    #[test]
    fn p1_pressure_reproduces_linears() {
        let sp = space(5, Family::Mini);
        let lin = |p: [f64; 2]| 0.3 + 0.7 * p[0] - 1.1 * p[1];
        let field = FEField::interpolate_pressure(&sp, lin).unwrap();
        for q in [[0.3, 0.3], [0.52, 0.18], [0.11, 0.87]] {
            assert!((field.eval_pressure(q).unwrap() - lin(q)).abs() < 1e-12);
        }
    }

    #[test]
    fn p2_velocity_reproduces_quadratics() {
        // x(1-x) vanishes on the left/right boundary; evaluating on the
        // horizontal midline of an odd element row keeps the (zeroed)
        // top/bottom boundary DOFs out of the picture, so the quadratic
        // must be reproduced exactly there.
        let sp = space(5, Family::TaylorHood);
        let field = FEField::interpolate_velocity(&sp, |p| [p[0] * (1.0 - p[0]), 0.0]).unwrap();
        for x in [0.11, 0.3, 0.52, 0.97] {
            let v = field.eval_velocity([x, 0.5]).unwrap();
            assert!((v[0] - x * (1.0 - x)).abs() < 1e-12, "at x = {x}");
            assert!(v[1].abs() < 1e-13);
        }
    }

    #[test]
    fn linear_part_behaviour() {
        let sp = space(3, Family::Mini);
        let mut f = FEField::interpolate_velocity(&sp, |p| {
            [p[0] * (1.0 - p[0]), p[1] * (1.0 - p[1])]
        })
        .unwrap();
        // interpolation leaves bubbles at zero
        let lp = f.linear_part().unwrap();
        assert_eq!(f.coeffs(), lp.coeffs());

        // fill bubbles, then strip them
        let n_vertex_nodes = sp.n_vertex_nodes;
        for c in 0..2 {
            for node in n_vertex_nodes..sp.n_scalar_nodes() {
                f.coeffs_mut()[sp.velocity_dof(c, node)] = 1.0;
            }
        }
        let lp = f.linear_part().unwrap();
        assert_eq!(lp.coeffs(), FEField::interpolate_velocity(&sp, |p| {
            [p[0] * (1.0 - p[0]), p[1] * (1.0 - p[1])]
        })
        .unwrap()
        .coeffs());
        // idempotent
        assert_eq!(lp.linear_part().unwrap().coeffs(), lp.coeffs());

        // bubbles only -> zero field
        let mut bubbles = FEField::zeros(&sp, FieldRole::Velocity);
        for c in 0..2 {
            for node in n_vertex_nodes..sp.n_scalar_nodes() {
                bubbles.coeffs_mut()[sp.velocity_dof(c, node)] = 2.0;
            }
        }
        assert!(bubbles
            .linear_part()
            .unwrap()
            .coeffs()
            .iter()
            .all(|&c| c == 0.0));
    }

    #[test]
    fn linear_part_rejects_wrong_fields() {
        let sp = space(2, Family::Mini);
        let p = FEField::zeros(&sp, FieldRole::Pressure);
        assert!(matches!(p.linear_part(), Err(Error::InvalidArgument(_))));
        let th = space(2, Family::TaylorHood);
        let v = FEField::zeros(&th, FieldRole::Velocity);
        assert!(matches!(v.linear_part(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn normalize_pressure_cases() {
        let sp = space(4, Family::Mini);
        let constant = FEField::interpolate_pressure(&sp, |_| 3.25).unwrap();
        let normalized = constant.normalize_pressure();
        assert!(normalized.coeffs().iter().all(|&c| c.abs() < 1e-14));

        let linear = FEField::interpolate_pressure(&sp, |p| p[0]).unwrap();
        let normalized = linear.normalize_pressure();
        assert!(normalized.pressure_mean().abs() < 1e-12);
        for v in 0..sp.n_p() {
            let x = sp.mesh().vertex(v)[0];
            assert!((normalized.coeffs()[v] - (x - 0.5)).abs() < 1e-13);
        }
        // already mean-zero: unchanged
        let again = normalized.normalize_pressure();
        for (a, b) in again.coeffs().iter().zip(normalized.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_csv_has_expected_shape() {
        let sp = space(2, Family::Mini);
        let f = FEField::zeros(&sp, FieldRole::Velocity);
        let mut buf = Vec::new();
        f.write_grid_csv(3, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,y,u1,u2");
        assert_eq!(lines.len(), 1 + 9);
    }
}
