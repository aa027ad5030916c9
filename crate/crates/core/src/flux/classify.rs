use crate::error::{Error, Result};
use crate::geometry::{BoundaryLabel, ChannelGeometry, InterfaceConfig};
use crate::mesh::TriMesh;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    /// On the Dirichlet boundary, but not on the interface.
    Boundary,
    OnGamma,
}

/// Vertex classes and interface weights `w_a = psi_gamma(a)`.
#[derive(Debug, Clone)]
pub struct NodeClassification<T> {
    pub classes: Vec<NodeClass>,
    pub weights: Vec<T>,
}

/// Classifies the vertices of a mesh of the FE subdomain. Without an
/// interface every weight is zero and no vertex is on it.
pub fn classify_nodes<T: Real>(
    mesh: &TriMesh<T>,
    geometry: &ChannelGeometry<T>,
    interface: Option<&InterfaceConfig<T>>,
) -> Result<NodeClassification<T>> {
    let n = mesh.n_vertices();
    let mut classes: Vec<NodeClass> = (0..n)
        .map(|v| {
            if mesh.is_boundary_vertex(v) {
                NodeClass::Boundary
            } else {
                NodeClass::Interior
            }
        })
        .collect();
    let mut weights = vec![T::zero(); n];
    let Some(iface) = interface else {
        return Ok(NodeClassification { classes, weights });
    };
    // any vertex of an interface edge is on the interface, including the
    // two corners where the interface meets the walls
    for b in mesh.boundary_edges() {
        if b.label == BoundaryLabel::Interface {
            for &v in &b.vertices {
                classes[v] = NodeClass::OnGamma;
            }
        }
    }
    if !classes.contains(&NodeClass::OnGamma) {
        return Err(Error::InterfaceNotResolved {
            x_gamma: iface.x_gamma.as_f64(),
        });
    }
    for v in 0..n {
        weights[v] = if classes[v] == NodeClass::OnGamma {
            if mesh.vertex(v).x != iface.x_gamma {
                return Err(Error::InterfaceNotResolved {
                    x_gamma: iface.x_gamma.as_f64(),
                });
            }
            T::one()
        } else {
            iface.psi_gamma(geometry, mesh.vertex(v))
        };
    }
    Ok(NodeClassification { classes, weights })
}

impl<T: Real> NodeClassification<T> {
    pub fn n_on_gamma(&self) -> usize {
        self.classes.iter().filter(|&&c| c == NodeClass::OnGamma).count()
    }

    pub fn has_interface(&self) -> bool {
        self.n_on_gamma() > 0
    }

    /// `psi_gamma_h` at barycentric coordinates `lambda` of triangle `t`.
    pub fn psi_gamma_h(&self, mesh: &TriMesh<T>, t: usize, lambda: [T; 3]) -> T {
        let tri = mesh.triangle(t);
        (0..3).map(|i| self.weights[tri[i]] * lambda[i]).sum()
    }

    /// Sum of `psi_gamma_h` and the weighted hats `(1 - w_a) psi^a` of the
    /// vertices off the interface; identically one.
    pub fn partition_of_unity(&self, mesh: &TriMesh<T>, t: usize, lambda: [T; 3]) -> T {
        let tri = mesh.triangle(t);
        let mut sum = self.psi_gamma_h(mesh, t, lambda);
        for i in 0..3 {
            if self.classes[tri[i]] != NodeClass::OnGamma {
                sum += (T::one() - self.weights[tri[i]]) * lambda[i];
            }
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::triangulate;

    #[test]
    fn weights_and_classes() {
        let g = ChannelGeometry::<f64>::benchmark();
        let i = InterfaceConfig::new(&g, 4.0).unwrap();
        let m = triangulate(&g.fe_polygon(Some(&i)), 0.125).unwrap();
        let c = classify_nodes(&m, &g, Some(&i)).unwrap();
        for v in 0..m.n_vertices() {
            let p = m.vertex(v);
            if p.x == 4.0 {
                assert_eq!(c.classes[v], NodeClass::OnGamma);
                assert_eq!(c.weights[v], 1.0);
            } else {
                assert_ne!(c.classes[v], NodeClass::OnGamma);
            }
            if (p.x - 4.25).abs() < 1e-12 && (p.y - 0.25).abs() < 1e-12 {
                assert!((c.weights[v] - 0.5).abs() < 1e-14);
                assert_eq!(c.classes[v], NodeClass::Interior);
            }
            if p.x >= 4.5 || p.y < 0.0 {
                assert_eq!(c.weights[v], 0.0);
            }
        }
        assert!(c.n_on_gamma() >= 2);
    }

    #[test]
    fn no_interface_means_zero_weights() {
        let g = ChannelGeometry::<f64>::benchmark();
        let m = triangulate(&g.fe_polygon(None), 0.25).unwrap();
        let c = classify_nodes(&m, &g, None).unwrap();
        assert!(!c.has_interface());
        assert!(c.weights.iter().all(|&w| w == 0.0));
        let t = 3;
        assert!((c.partition_of_unity(&m, t, [0.2, 0.3, 0.5]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_interface_is_rejected() {
        let g = ChannelGeometry::<f64>::benchmark();
        let i = InterfaceConfig::new(&g, 4.0).unwrap();
        let m = triangulate(&g.fe_polygon(Some(&i)), 0.125).unwrap();
        let other = InterfaceConfig::new(&g, 3.9).unwrap();
        assert!(matches!(
            classify_nodes(&m, &g, Some(&other)),
            Err(Error::InterfaceNotResolved { .. })
        ));
    }
}
