//! Structured triangulation of the unit square.
//!
//! The mesh is induced by the nodes `(i/N, j/N)`, `0 <= i, j <= N`; every grid
//! cell is split along its bottom-left -> top-right diagonal. Vertices are
//! numbered lexicographically by `(j, i)`, triangles cell by cell in the same
//! order (lower triangle first), so construction is a pure function of `N`.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};

/// Tolerance for point-location queries (domain membership and the
/// diagonal tie-break).
const LOCATE_TOL: f64 = 1e-12;

/// An undirected mesh edge. `vertices` is stored as `(min, max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub midpoint: [f64; 2],
}

/// Per-triangle affine data: vertex coordinates, the (constant) gradients of
/// the barycentric coordinates, and the triangle area.
#[derive(Debug, Clone, Copy)]
pub struct TriangleGeometry {
    pub vertices: [[f64; 2]; 3],
    pub grad_lambda: [[f64; 2]; 3],
    pub area: f64,
}

#[derive(Debug, Clone)]
pub struct StructuredTriMesh {
    n_subdiv: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// Edge indices per triangle; local edge `i` is opposite local vertex `i`.
    tri_edges: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
    boundary_edge: Vec<bool>,
    geometry: Vec<TriangleGeometry>,
}

impl StructuredTriMesh {
    /// Builds the structured triangulation with `n_subdiv` subdivisions per side.
    pub fn unit_square(n_subdiv: usize) -> Result<Self> {
        if n_subdiv == 0 {
            return Err(Error::invalid("mesh subdivision count must be >= 1"));
        }
        let n = n_subdiv;
        let nv = (n + 1) * (n + 1);
        let vid = |i: usize, j: usize| j * (n + 1) + i;

        let mut vertices = Vec::with_capacity(nv);
        let mut boundary_vertex = Vec::with_capacity(nv);
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
                boundary_vertex.push(i == 0 || i == n || j == 0 || j == n);
            }
        }

        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let a = vid(i, j);
                let b = vid(i + 1, j);
                let c = vid(i + 1, j + 1);
                let d = vid(i, j + 1);
                // diagonal a -> c; both triangles counterclockwise
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }

        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_tri_count: Vec<usize> = Vec::new();
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let mut local = [0usize; 3];
            for opp in 0..3 {
                let a = tri[(opp + 1) % 3];
                let b = tri[(opp + 2) % 3];
                let key = [a.min(b), a.max(b)];
                let idx = *edge_index.entry(key).or_insert_with(|| {
                    let pa = vertices[key[0]];
                    let pb = vertices[key[1]];
                    edges.push(Edge {
                        vertices: key,
                        midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
                    });
                    edge_tri_count.push(0);
                    edges.len() - 1
                });
                edge_tri_count[idx] += 1;
                local[opp] = idx;
            }
            tri_edges.push(local);
        }
        let boundary_edge: Vec<bool> = edge_tri_count.iter().map(|&c| c == 1).collect();

        let geometry = triangles
            .iter()
            .map(|tri| triangle_geometry([vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]))
            .collect();

        Ok(Self {
            n_subdiv,
            vertices,
            triangles,
            edges,
            tri_edges,
            boundary_vertex,
            boundary_edge,
            geometry,
        })
    }

    pub fn n_subdiv(&self) -> usize {
        self.n_subdiv
    }

    /// Mesh size `1/N`.
    pub fn h(&self) -> f64 {
        1.0 / self.n_subdiv as f64
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge indices of triangle `t`; local edge `i` is opposite local vertex `i`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge[e]
    }

    pub fn triangle_affine_data(&self, t: usize) -> &TriangleGeometry {
        &self.geometry[t]
    }

    /// Locates `p` in the mesh: returns the containing triangle and the
    /// barycentric coordinates of `p` with respect to it.
    ///
    /// The containing cell is found structurally from `floor(p * N)`; points
    /// on a cell diagonal are assigned to the lower triangle, points on grid
    /// lines to the cell `floor` selects, so cross-grid evaluation is
    /// deterministic.
    pub fn locate_point(&self, p: [f64; 2]) -> Result<(usize, [f64; 3])> {
        let [x, y] = p;
        if !((-LOCATE_TOL..=1.0 + LOCATE_TOL).contains(&x)
            && (-LOCATE_TOL..=1.0 + LOCATE_TOL).contains(&y))
        {
            return Err(Error::OutOfDomain { x, y });
        }
        let n = self.n_subdiv;
        let xc = x.clamp(0.0, 1.0) * n as f64;
        let yc = y.clamp(0.0, 1.0) * n as f64;
        let ix = (xc.floor() as usize).min(n - 1);
        let iy = (yc.floor() as usize).min(n - 1);
        let s = xc - ix as f64;
        let t = yc - iy as f64;
        let cell = iy * n + ix;
        let tri = if t <= s + LOCATE_TOL { 2 * cell } else { 2 * cell + 1 };
        let lambda = self.barycentric(tri, p);
        Ok((tri, lambda))
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let g = &self.geometry[t];
        let [p1, p2, p3] = g.vertices;
        let e2 = [p2[0] - p1[0], p2[1] - p1[1]];
        let e3 = [p3[0] - p1[0], p3[1] - p1[1]];
        let d = [p[0] - p1[0], p[1] - p1[1]];
        let det = e2[0] * e3[1] - e2[1] * e3[0];
        let l2 = (d[0] * e3[1] - d[1] * e3[0]) / det;
        let l3 = (e2[0] * d[1] - e2[1] * d[0]) / det;
        [1.0 - l2 - l3, l2, l3]
    }

    /// Maps barycentric coordinates on triangle `t` back to Cartesian.
    pub fn bary_to_point(&self, t: usize, lambda: [f64; 3]) -> [f64; 2] {
        let g = &self.geometry[t];
        let mut p = [0.0; 2];
        for k in 0..3 {
            p[0] += lambda[k] * g.vertices[k][0];
            p[1] += lambda[k] * g.vertices[k][1];
        }
        p
    }

    /// Plain-text dump: one `v x y` line per vertex, one `t i j k` line per
    /// triangle (0-based indices).
    pub fn write_dump(&self, w: &mut impl Write) -> std::io::Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {:e} {:e}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "t {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

fn triangle_geometry(vertices: [[f64; 2]; 3]) -> TriangleGeometry {
    let [p1, p2, p3] = vertices;
    let det = (p2[0] - p1[0]) * (p3[1] - p1[1]) - (p2[1] - p1[1]) * (p3[0] - p1[0]);
    let area = 0.5 * det;
    let grad_lambda = [
        [(p2[1] - p3[1]) / det, (p3[0] - p2[0]) / det],
        [(p3[1] - p1[1]) / det, (p1[0] - p3[0]) / det],
        [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
    ];
    TriangleGeometry {
        vertices,
        grad_lambda,
        area,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_and_areas() {
        for (n, nv, nt) in [(1usize, 4usize, 2usize), (6, 49, 72), (10, 121, 200)] {
            let mesh = StructuredTriMesh::unit_square(n).unwrap();
            assert_eq!(mesh.n_vertices(), nv);
            assert_eq!(mesh.n_triangles(), nt);
            let expected = 1.0 / (2 * n * n) as f64;
            let mut total = 0.0;
            for t in 0..nt {
                let area = mesh.triangle_affine_data(t).area;
                assert!((area - expected).abs() < 1e-15, "area {area} != {expected}");
                total += area;
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(matches!(
            StructuredTriMesh::unit_square(0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn edge_sharing() {
        let mesh = StructuredTriMesh::unit_square(4).unwrap();
        let mut counts = vec![0usize; mesh.edges().len()];
        for t in 0..mesh.n_triangles() {
            for e in mesh.triangle_edges(t) {
                counts[e] += 1;
            }
        }
        for (e, &c) in counts.iter().enumerate() {
            if mesh.is_boundary_edge(e) {
                assert_eq!(c, 1);
            } else {
                assert_eq!(c, 2);
            }
        }
    }

    #[test]
    fn boundary_vertices_match_coordinates() {
        let mesh = StructuredTriMesh::unit_square(5).unwrap();
        for v in 0..mesh.n_vertices() {
            let [x, y] = mesh.vertex(v);
            let on_boundary = x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0;
            assert_eq!(mesh.is_boundary_vertex(v), on_boundary);
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let a = StructuredTriMesh::unit_square(7).unwrap();
        let b = StructuredTriMesh::unit_square(7).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert_eq!(a.triangles(), b.triangles());
    }

    #[test]
    fn locate_corner() {
        let mesh = StructuredTriMesh::unit_square(3).unwrap();
        let (t, l) = mesh.locate_point([0.0, 0.0]).unwrap();
        assert_eq!(t, 0);
        assert_eq!(l, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn locate_barycenters() {
        let mesh = StructuredTriMesh::unit_square(3).unwrap();
        for t in 0..mesh.n_triangles() {
            let p = mesh.bary_to_point(t, [1.0 / 3.0; 3]);
            let (found, l) = mesh.locate_point(p).unwrap();
            assert_eq!(found, t);
            for li in l {
                assert!((li - 1.0 / 3.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn diagonal_tie_breaks_to_lower_triangle() {
        let mesh = StructuredTriMesh::unit_square(4).unwrap();
        // midpoint of the diagonal of cell (1, 2)
        let p = [(1.5) / 4.0, (2.5) / 4.0];
        let (t, l) = mesh.locate_point(p).unwrap();
        assert_eq!(t, 2 * (2 * 4 + 1));
        assert!(l.iter().any(|&li| li.abs() < 1e-13), "one zero entry: {l:?}");
        assert!(l.iter().all(|&li| li >= -1e-12));
    }

    #[test]
    fn out_of_domain_rejected() {
        let mesh = StructuredTriMesh::unit_square(2).unwrap();
        assert!(matches!(
            mesh.locate_point([1.1, 0.5]),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            mesh.locate_point([0.5, -1e-6]),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn gradients_sum_to_zero_and_scale_with_n() {
        for n in [1usize, 5, 12] {
            let mesh = StructuredTriMesh::unit_square(n).unwrap();
            for t in 0..mesh.n_triangles() {
                let g = mesh.triangle_affine_data(t);
                for c in 0..2 {
                    let sum: f64 = (0..3).map(|k| g.grad_lambda[k][c]).sum();
                    assert!(sum.abs() < 1e-14 * n as f64);
                }
                for k in 0..3 {
                    for c in 0..2 {
                        let v = g.grad_lambda[k][c];
                        let is_expected =
                            v == 0.0 || (v.abs() - n as f64).abs() < 1e-9 * n as f64;
                        assert!(is_expected, "unexpected gradient entry {v} for N={n}");
                    }
                }
                assert!((g.area - 1.0 / (2 * n * n) as f64).abs() < 1e-15);
            }
        }
    }

    proptest! {
        #[test]
        fn locate_then_map_back_is_identity(
            x in 0.0f64..=1.0,
            y in 0.0f64..=1.0,
            n in 1usize..12,
        ) {
            let mesh = StructuredTriMesh::unit_square(n).unwrap();
            let (t, l) = mesh.locate_point([x, y]).unwrap();
            let sum: f64 = l.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-14);
            for li in l {
                prop_assert!(li >= -1e-12);
            }
            let p = mesh.bary_to_point(t, l);
            prop_assert!((p[0] - x).abs() < 1e-13);
            prop_assert!((p[1] - y).abs() < 1e-13);
        }
    }
}
