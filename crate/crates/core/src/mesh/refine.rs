//! Newest-vertex bisection with conforming closure.

use std::collections::HashMap;

use super::{edge_key, BoundaryEdge, TriMesh};
use crate::error::{Error, Result};
use crate::geometry::BoundaryLabel;
use crate::point::Vec2;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct RefineOptions<T> {
    /// Sizes below this value never trigger refinement.
    pub h_floor: T,
    pub max_elements: usize,
}

impl<T: Real> Default for RefineOptions<T> {
    fn default() -> Self {
        Self {
            h_floor: T::lit(1e-5),
            max_elements: 2_000_000,
        }
    }
}

struct Bisector<T> {
    vertices: Vec<Vec2<T>>,
    triangles: Vec<[usize; 3]>,
    labels: HashMap<(usize, usize), BoundaryLabel>,
    boundary_order: Vec<(usize, usize)>,
    midpoints: HashMap<(usize, usize), usize>,
    max_elements: usize,
}

impl<T: Real> Bisector<T> {
    fn new(mesh: &TriMesh<T>, max_elements: usize) -> Self {
        let boundary_order = mesh
            .boundary_edges()
            .iter()
            .map(|b| edge_key(b.vertices[0], b.vertices[1]))
            .collect();
        Self {
            vertices: mesh.vertices().to_vec(),
            triangles: mesh.triangles().to_vec(),
            labels: mesh
                .boundary_edges()
                .iter()
                .map(|b| (edge_key(b.vertices[0], b.vertices[1]), b.label))
                .collect(),
            boundary_order,
            midpoints: HashMap::new(),
            max_elements,
        }
    }

    fn midpoint(&mut self, a: usize, b: usize) -> usize {
        let key = edge_key(a, b);
        if let Some(&m) = self.midpoints.get(&key) {
            return m;
        }
        // Midpoint from the ordered pair so both neighbours agree bitwise.
        let m = self.vertices.len();
        self.vertices.push(self.vertices[key.0].midpoint(self.vertices[key.1]));
        self.midpoints.insert(key, m);
        if let Some(label) = self.labels.remove(&key) {
            self.labels.insert(edge_key(key.0, m), label);
            self.labels.insert(edge_key(m, key.1), label);
        }
        m
    }

    /// Bisects every marked triangle once.
    fn bisect(&mut self, marked: &[bool]) -> Result<()> {
        let extra = marked.iter().filter(|&&m| m).count();
        if self.triangles.len() + extra > self.max_elements {
            return Err(Error::TooManyElements {
                limit: self.max_elements,
            });
        }
        let old = std::mem::take(&mut self.triangles);
        let mut out = Vec::with_capacity(old.len() + extra);
        for (t, &[v0, v1, v2]) in old.iter().enumerate() {
            if marked[t] {
                let m = self.midpoint(v1, v2);
                out.push([m, v0, v1]);
                out.push([m, v2, v0]);
            } else {
                out.push([v0, v1, v2]);
            }
        }
        self.triangles = out;
        Ok(())
    }

    /// Bisects until no triangle has a split edge.
    fn close(&mut self) -> Result<()> {
        loop {
            let marked: Vec<bool> = self
                .triangles
                .iter()
                .map(|tri| {
                    (0..3).any(|i| {
                        self.midpoints
                            .contains_key(&edge_key(tri[(i + 1) % 3], tri[(i + 2) % 3]))
                    })
                })
                .collect();
            if !marked.iter().any(|&m| m) {
                return Ok(());
            }
            self.bisect(&marked)?;
        }
    }

    fn finish(self) -> Result<TriMesh<T>> {
        // Boundary edges in a stable order: descendants of each original edge
        // in order along it, originals first.
        let mut boundary = Vec::with_capacity(self.labels.len());
        let mut stack = Vec::new();
        for &key in &self.boundary_order {
            stack.push(key);
            while let Some(k) = stack.pop() {
                if let Some(&m) = self.midpoints.get(&k) {
                    stack.push(edge_key(m, k.1));
                    stack.push(edge_key(k.0, m));
                } else {
                    let label = self.labels[&k];
                    boundary.push(BoundaryEdge {
                        vertices: [k.0, k.1],
                        label,
                    });
                }
            }
        }
        TriMesh::new(self.vertices, self.triangles, boundary)
    }
}

/// Bisects the marked triangles (once each) and closes hanging nodes.
pub fn refine_marked<T: Real>(mesh: &TriMesh<T>, marked: &[bool], max_elements: usize) -> Result<TriMesh<T>> {
    assert_eq!(marked.len(), mesh.n_triangles());
    let mut b = Bisector::new(mesh, max_elements);
    b.bisect(marked)?;
    b.close()?;
    b.finish()
}

/// Two rounds of bisection of every triangle; halves all diameters on
/// meshes whose triangles are bisected along their longest edge.
pub fn refine_uniform<T: Real>(mesh: &TriMesh<T>) -> Result<TriMesh<T>> {
    let mut b = Bisector::new(mesh, usize::MAX);
    for _ in 0..2 {
        let marked = vec![true; b.triangles.len()];
        b.bisect(&marked)?;
        b.close()?;
    }
    b.finish()
}

/// Bisects from `coarse` until every triangle satisfies
/// `h_T <= max(size(centroid), h_floor)`.
pub fn refine_to_size_field<T: Real>(
    coarse: &TriMesh<T>,
    size: impl Fn(Vec2<T>) -> T,
    opts: RefineOptions<T>,
) -> Result<TriMesh<T>> {
    let mut b = Bisector::new(coarse, opts.max_elements);
    loop {
        let third = T::one() / T::lit(3.0);
        let marked: Vec<bool> = b
            .triangles
            .iter()
            .map(|tri| {
                let [p, q, r] = tri.map(|v| b.vertices[v]);
                let h = (q - p).norm().max((r - q).norm()).max((p - r).norm());
                let c = Vec2::new((p.x + q.x + r.x) * third, (p.y + q.y + r.y) * third);
                h > size(c).max(opts.h_floor)
            })
            .collect();
        if !marked.iter().any(|&m| m) {
            break;
        }
        b.bisect(&marked)?;
        b.close()?;
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ChannelGeometry, InterfaceConfig};
    use crate::mesh::triangulate;

    fn channel(h: f64) -> TriMesh<f64> {
        let g = ChannelGeometry::benchmark();
        let i = InterfaceConfig::new(&g, 4.6).unwrap();
        triangulate(&g.fe_polygon(Some(&i)), h).unwrap()
    }

    #[test]
    fn constant_size_at_h_max_is_identity() {
        let m = channel(0.1);
        let h = m.h_max();
        let r = refine_to_size_field(&m, |_| h, RefineOptions::default()).unwrap();
        assert_eq!(r.n_triangles(), m.n_triangles());
        assert_eq!(r.vertices(), m.vertices());
    }

    #[test]
    fn half_size_quadruples() {
        let m = channel(0.1);
        let h = m.h_max();
        let r = refine_to_size_field(&m, |_| h / 2.0, RefineOptions::default()).unwrap();
        // cells are not all square, so some triangles need a single bisection
        let ratio = r.n_triangles() as f64 / m.n_triangles() as f64;
        assert!((3.0..=6.0).contains(&ratio), "growth {ratio}");
        assert!(r.h_max() <= h / 2.0 + 1e-12);
        let u = refine_uniform(&m).unwrap();
        assert_eq!(u.n_triangles(), 4 * m.n_triangles());
        assert!((u.h_max() - m.h_max() / 2.0).abs() < 1e-12);
        assert!((u.total_area() - m.total_area()).abs() < 1e-12);
    }

    #[test]
    fn square_cells_grow_fourfold() {
        let g = ChannelGeometry::<f64>::new(2.0, 0.5, 0.5, 1.0, 1.0).unwrap();
        let m = triangulate(&g.boundary, 0.25).unwrap();
        let h = m.h_max();
        let r = refine_to_size_field(&m, |_| h / 2.0, RefineOptions::default()).unwrap();
        assert_eq!(r.n_triangles(), 4 * m.n_triangles());
        assert!((r.h_max() - h / 2.0).abs() < 1e-12);
    }

    #[test]
    fn local_field_refines_near_corner() {
        let m = channel(0.1);
        let corner = Vec2::new(5.1, 0.0);
        let r = refine_to_size_field(
            &m,
            |p| if (p - corner).norm() < 0.2 { 0.005 } else { 1.0 },
            RefineOptions::default(),
        )
        .unwrap();
        let new = r.n_triangles() - m.n_triangles();
        let near = (0..r.n_triangles())
            .filter(|&t| (r.centroid(t) - corner).norm() < 0.5)
            .count();
        assert!(new > 0);
        assert!(near as f64 >= 0.5 * new as f64);
        assert!(r.stats().min_angle >= 15.0);
    }

    #[test]
    fn element_limit_is_enforced() {
        let m = channel(0.1);
        let err = refine_to_size_field(
            &m,
            |_| 1e-4,
            RefineOptions {
                h_floor: 1e-5,
                max_elements: 10_000,
            },
        );
        assert!(matches!(err, Err(Error::TooManyElements { limit: 10_000 })));
    }
}
