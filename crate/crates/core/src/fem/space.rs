use std::sync::Arc;

use super::element::{ElementMap, LagrangeElement};
use crate::error::Result;
use crate::geometry::BoundaryLabel;
use crate::mesh::TriMesh;
use crate::point::Vec2;
use crate::scalar::Real;

/// Continuous `P_k` space on a triangle mesh.
///
/// Global numbering: vertex DoFs first (DoF `v` sits at mesh vertex `v`, so
/// the first `n_vertices` coefficients are the hat-function coefficients),
/// then `k - 1` DoFs per edge ordered from the lower to the higher vertex
/// index, then interior DoFs element by element.
#[derive(Debug, Clone)]
pub struct LagrangeSpace<T> {
    mesh: Arc<TriMesh<T>>,
    element: LagrangeElement<T>,
    n_dofs: usize,
    dofs: Vec<usize>,
    points: Vec<Vec2<T>>,
    labels: Vec<Option<BoundaryLabel>>,
}

impl<T: Real> LagrangeSpace<T> {
    pub fn new(mesh: Arc<TriMesh<T>>, degree: usize) -> Result<Self> {
        let element = LagrangeElement::new(degree)?;
        let k = degree;
        let nv = mesh.n_vertices();
        let per_edge = k - 1;
        let n_int = element.n_interior();
        let edge_base = nv;
        let int_base = nv + mesh.n_edges() * per_edge;
        let n_dofs = int_base + mesh.n_triangles() * n_int;
        let nb = element.n_basis();

        let mut dofs = Vec::with_capacity(mesh.n_triangles() * nb);
        let mut points = vec![Vec2::zero(); n_dofs];
        let mut labels = vec![None; n_dofs];
        for v in 0..nv {
            points[v] = mesh.vertex(v);
            labels[v] = mesh.vertex_label(v);
        }
        for t in 0..mesh.n_triangles() {
            let tri = mesh.triangle(t);
            let map = ElementMap::new(mesh.triangle_points(t));
            dofs.extend_from_slice(&tri);
            let edges = mesh.triangle_edges(t);
            for i in 0..3 {
                let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let e = edges[i];
                for j in 1..k {
                    // position along the globally oriented edge
                    let g = if a < b { j } else { k - j };
                    let dof = edge_base + e * per_edge + g - 1;
                    dofs.push(dof);
                    labels[dof] = mesh.edge_label(e);
                }
            }
            for j in 0..n_int {
                dofs.push(int_base + t * n_int + j);
            }
            let local = &dofs[t * nb..(t + 1) * nb];
            for (node, &dof) in element.nodes().iter().zip(local).skip(3) {
                points[dof] = map.map(*node);
            }
        }
        Ok(Self {
            mesh,
            element,
            n_dofs,
            dofs,
            points,
            labels,
        })
    }

    pub fn mesh(&self) -> &Arc<TriMesh<T>> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn element(&self) -> &LagrangeElement<T> {
        &self.element
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_local(&self) -> usize {
        self.element.n_basis()
    }

    pub fn element_dofs(&self, t: usize) -> &[usize] {
        let nb = self.element.n_basis();
        &self.dofs[t * nb..(t + 1) * nb]
    }

    pub fn dof_point(&self, dof: usize) -> Vec2<T> {
        self.points[dof]
    }

    /// Boundary label of a DoF, `None` for interior DoFs.
    pub fn dof_label(&self, dof: usize) -> Option<BoundaryLabel> {
        self.labels[dof]
    }

    pub fn element_map(&self, t: usize) -> ElementMap<T> {
        ElementMap::new(self.mesh.triangle_points(t))
    }
}
