//! Conforming triangle meshes with labeled boundary edges.
//!
//! Local conventions used by every module: triangles are counterclockwise,
//! local edge `i` is the edge opposite local vertex `i`, i.e. it joins
//! vertices `i + 1` and `i + 2 (mod 3)`. For newest-vertex bisection, vertex 0
//! is the newest vertex and edge 0 the refinement edge.

mod generate;
mod io;
mod locate;
mod refine;

use std::collections::HashMap;

pub use generate::{narrowest_width, triangulate, triangulate_max_diameter};
pub use io::{read_mesh, write_mesh};
pub use locate::Locator;
pub use refine::{refine_marked, refine_to_size_field, refine_uniform, RefineOptions};

use crate::error::{Error, Result};
use crate::geometry::BoundaryLabel;
use crate::point::{orient2d, Vec2};
use crate::scalar::Real;

/// Marker for "no triangle" in edge incidence.
pub const NO_TRIANGLE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub label: BoundaryLabel,
}

#[derive(Debug, Clone)]
pub struct TriMesh<T> {
    vertices: Vec<Vec2<T>>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    edges: Vec<[usize; 2]>,
    tri_edges: Vec<[usize; 3]>,
    edge_tris: Vec<[usize; 2]>,
    edge_labels: Vec<Option<BoundaryLabel>>,
    vertex_labels: Vec<Option<BoundaryLabel>>,
    diameters: Vec<T>,
    areas: Vec<T>,
}

/// Aggregate quality numbers of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats<T> {
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub h_max: T,
    pub h_min: T,
    /// Smallest interior angle, in degrees.
    pub min_angle: T,
}

#[inline]
pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl<T: Real> TriMesh<T> {
    /// Builds the topology and checks conformity, orientation and labels.
    pub fn new(vertices: Vec<Vec2<T>>, triangles: Vec<[usize; 3]>, boundary: Vec<BoundaryEdge>) -> Result<Self> {
        let nv = vertices.len();
        let mut edges = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut edge_tris: Vec<[usize; 2]> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len() / 2 + 8);
        let mut diameters = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());

        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let twice = orient2d(a, b, c);
            if !(twice > T::zero()) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive area {}",
                    twice * T::lit(0.5)
                )));
            }
            areas.push(twice * T::lit(0.5));
            diameters.push((b - a).norm().max((c - b).norm()).max((a - c).norm()));
            let mut te = [0usize; 3];
            for i in 0..3 {
                let key = edge_key(tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_tris.push([NO_TRIANGLE, NO_TRIANGLE]);
                    edges.len() - 1
                });
                let slot = &mut edge_tris[e];
                if slot[0] == NO_TRIANGLE {
                    slot[0] = t;
                } else if slot[1] == NO_TRIANGLE {
                    slot[1] = t;
                } else {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({}, {}) is shared by more than two triangles",
                        key.0, key.1
                    )));
                }
                te[i] = e;
            }
            tri_edges.push(te);
        }

        let mut edge_labels = vec![None; edges.len()];
        let mut vertex_labels = vec![None; nv];
        for be in &boundary {
            let key = edge_key(be.vertices[0], be.vertices[1]);
            let Some(&e) = lookup.get(&key) else {
                return Err(Error::InvalidMesh(format!(
                    "labeled edge ({}, {}) is not a mesh edge",
                    key.0, key.1
                )));
            };
            if edge_tris[e][1] != NO_TRIANGLE {
                return Err(Error::InvalidMesh(format!(
                    "labeled edge ({}, {}) is interior",
                    key.0, key.1
                )));
            }
            if edge_labels[e].replace(be.label).is_some() {
                return Err(Error::InvalidMesh(format!("edge ({}, {}) labeled twice", key.0, key.1)));
            }
            for v in be.vertices {
                vertex_labels[v].get_or_insert(be.label);
            }
        }
        for (e, tris) in edge_tris.iter().enumerate() {
            if tris[1] == NO_TRIANGLE && edge_labels[e].is_none() {
                return Err(Error::InvalidMesh(format!(
                    "boundary edge ({}, {}) carries no label",
                    edges[e][0], edges[e][1]
                )));
            }
        }

        Ok(Self {
            vertices,
            triangles,
            boundary,
            edges,
            tri_edges,
            edge_tris,
            edge_labels,
            vertex_labels,
            diameters,
            areas,
        })
    }

    pub fn vertices(&self) -> &[Vec2<T>] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Vec2<T> {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn triangle_points(&self, t: usize) -> [Vec2<T>; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edge endpoints, lower vertex index first.
    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    /// Global edge ids of the local edges of `t`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    /// Triangles adjacent to edge `e`; the second entry is [`NO_TRIANGLE`]
    /// on the boundary.
    pub fn edge_triangles(&self, e: usize) -> [usize; 2] {
        self.edge_tris[e]
    }

    pub fn edge_label(&self, e: usize) -> Option<BoundaryLabel> {
        self.edge_labels[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_tris[e][1] == NO_TRIANGLE
    }

    /// Label of one boundary edge through `v` (the first listed), if any.
    pub fn vertex_label(&self, v: usize) -> Option<BoundaryLabel> {
        self.vertex_labels[v]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.vertex_labels[v].is_some()
    }

    /// Diameter `h_T` (longest edge).
    pub fn diameter(&self, t: usize) -> T {
        self.diameters[t]
    }

    pub fn diameters(&self) -> &[T] {
        &self.diameters
    }

    pub fn area(&self, t: usize) -> T {
        self.areas[t]
    }

    pub fn areas(&self) -> &[T] {
        &self.areas
    }

    pub fn total_area(&self) -> T {
        self.areas.iter().copied().sum()
    }

    pub fn centroid(&self, t: usize) -> Vec2<T> {
        let [a, b, c] = self.triangle_points(t);
        let third = T::one() / T::lit(3.0);
        Vec2::new((a.x + b.x + c.x) * third, (a.y + b.y + c.y) * third)
    }

    /// Physical point of barycentric coordinates `lambda` in triangle `t`.
    pub fn point_at(&self, t: usize, lambda: [T; 3]) -> Vec2<T> {
        let [a, b, c] = self.triangle_points(t);
        Vec2::new(
            a.x * lambda[0] + b.x * lambda[1] + c.x * lambda[2],
            a.y * lambda[0] + b.y * lambda[1] + c.y * lambda[2],
        )
    }

    /// Triangles incident to each vertex, in ascending order.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }

    pub fn h_max(&self) -> T {
        self.diameters.iter().fold(T::zero(), |m, &h| m.max(h))
    }

    pub fn stats(&self) -> MeshStats<T> {
        let mut min_angle = T::infinity();
        for t in 0..self.triangles.len() {
            let p = self.triangle_points(t);
            for i in 0..3 {
                let u = p[(i + 1) % 3] - p[i];
                let v = p[(i + 2) % 3] - p[i];
                let angle = u.cross(v).abs().atan2(u.dot(v));
                min_angle = min_angle.min(angle);
            }
        }
        MeshStats {
            n_vertices: self.vertices.len(),
            n_triangles: self.triangles.len(),
            h_max: self.h_max(),
            h_min: self.diameters.iter().fold(T::infinity(), |m, &h| m.min(h)),
            min_angle: min_angle.to_degrees(),
        }
    }

    /// Replaces the vertex coordinates with values of another scalar type.
    pub fn cast<U: Real>(&self) -> Result<TriMesh<U>> {
        TriMesh::new(
            self.vertices.iter().map(|v| v.cast()).collect(),
            self.triangles.clone(),
            self.boundary.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use BoundaryLabel::*;

    pub(crate) fn unit_right_triangle() -> TriMesh<f64> {
        TriMesh::new(
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            vec![[0, 1, 2]],
            vec![
                BoundaryEdge {
                    vertices: [0, 1],
                    label: Wall,
                },
                BoundaryEdge {
                    vertices: [1, 2],
                    label: Outlet,
                },
                BoundaryEdge {
                    vertices: [2, 0],
                    label: Inlet,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_stats() {
        let m = unit_right_triangle();
        let s = m.stats();
        assert_eq!(s.n_triangles, 1);
        assert!((s.h_max - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.min_angle - 45.0).abs() < 1e-12);
        assert_eq!(m.n_edges(), 3);
        assert!((0..3).all(|e| m.is_boundary_edge(e)));
        assert_eq!(m.edge_label(m.triangle_edges(0)[1]), Some(Inlet));
    }

    #[test]
    fn unlabeled_boundary_is_rejected() {
        let err = TriMesh::new(
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            vec![[0, 1, 2]],
            vec![BoundaryEdge {
                vertices: [0, 1],
                label: Wall,
            }],
        );
        assert!(matches!(err, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn clockwise_triangle_is_rejected() {
        let err = TriMesh::new(
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            vec![[0, 2, 1]],
            vec![],
        );
        assert!(matches!(err, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn interior_edge_cannot_carry_label() {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let mut b: Vec<_> = [[0, 1], [1, 2], [2, 3], [3, 0]]
            .into_iter()
            .map(|vertices| BoundaryEdge { vertices, label: Wall })
            .collect();
        let tris = vec![[1, 2, 0], [3, 0, 2]];
        assert!(TriMesh::new(v.clone(), tris.clone(), b.clone()).is_ok());
        b.push(BoundaryEdge {
            vertices: [0, 2],
            label: Wall,
        });
        assert!(TriMesh::new(v, tris, b).is_err());
    }
}
