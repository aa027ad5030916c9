use std::sync::Arc;

use super::element::Tabulation;
use super::space::LagrangeSpace;
use crate::error::{Error, Result};
use crate::mesh::Locator;
use crate::point::Vec2;
use crate::scalar::Real;

/// A finite element function: coefficients over a [`LagrangeSpace`].
#[derive(Debug, Clone)]
pub struct ScalarField<T> {
    space: Arc<LagrangeSpace<T>>,
    coeffs: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(space: Arc<LagrangeSpace<T>>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::InvalidParameter(format!(
                "{} coefficients for a space with {} DoFs",
                coeffs.len(),
                space.n_dofs()
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: Arc<LagrangeSpace<T>>) -> Self {
        let n = space.n_dofs();
        Self {
            space,
            coeffs: vec![T::zero(); n],
        }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(space: Arc<LagrangeSpace<T>>, f: impl Fn(Vec2<T>) -> T) -> Self {
        let coeffs = (0..space.n_dofs()).map(|d| f(space.dof_point(d))).collect();
        Self { space, coeffs }
    }

    pub fn space(&self) -> &Arc<LagrangeSpace<T>> {
        &self.space
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn local_coeffs(&self, t: usize) -> Vec<T> {
        self.space.element_dofs(t).iter().map(|&d| self.coeffs[d]).collect()
    }

    pub fn value_at(&self, t: usize, xi: [T; 2]) -> T {
        let phi = self.space.element().values(xi);
        self.space
            .element_dofs(t)
            .iter()
            .zip(phi)
            .map(|(&d, p)| self.coeffs[d] * p)
            .sum()
    }

    /// Exact gradient of the piecewise polynomial at reference point `xi` of
    /// element `t`.
    pub fn gradient_at(&self, t: usize, xi: [T; 2]) -> Vec2<T> {
        let g = self.space.element().gradients(xi);
        let mut acc = [T::zero(); 2];
        for (&d, gi) in self.space.element_dofs(t).iter().zip(g) {
            acc[0] += self.coeffs[d] * gi[0];
            acc[1] += self.coeffs[d] * gi[1];
        }
        self.space.element_map(t).push_gradient(acc)
    }

    /// Gradients at every tabulated point of element `t`.
    pub fn element_gradients(&self, t: usize, tab: &Tabulation<T>) -> Vec<Vec2<T>> {
        let local = self.local_coeffs(t);
        let map = self.space.element_map(t);
        tab.gradients
            .iter()
            .map(|g| {
                let mut acc = [T::zero(); 2];
                for (c, gi) in local.iter().zip(g) {
                    acc[0] += *c * gi[0];
                    acc[1] += *c * gi[1];
                }
                map.push_gradient(acc)
            })
            .collect()
    }

    pub fn evaluate(&self, locator: &Locator<T>, p: Vec2<T>) -> Option<T> {
        let mesh = self.space.mesh();
        let (t, l) = locator.locate(mesh, p)?;
        Some(self.value_at(t, [l[1], l[2]]))
    }

    pub fn gradient_at_point(&self, locator: &Locator<T>, p: Vec2<T>) -> Option<Vec2<T>> {
        let mesh = self.space.mesh();
        let (t, l) = locator.locate(mesh, p)?;
        Some(self.gradient_at(t, [l[1], l[2]]))
    }

    /// Values at the mesh vertices.
    pub fn vertex_values(&self) -> &[T] {
        &self.coeffs[..self.space.mesh().n_vertices()]
    }

    /// Same field with every coefficient multiplied by `s`.
    pub fn scaled(&self, s: T) -> Self {
        Self {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ChannelGeometry, InterfaceConfig};
    use crate::mesh::triangulate;

    fn space(k: usize) -> Arc<LagrangeSpace<f64>> {
        let g = ChannelGeometry::benchmark();
        let i = InterfaceConfig::new(&g, 4.0).unwrap();
        let m = triangulate(&g.fe_polygon(Some(&i)), 0.15).unwrap();
        Arc::new(LagrangeSpace::new(Arc::new(m), k).unwrap())
    }

    #[test]
    fn gradient_of_linear_and_constant() {
        for k in 1..=3 {
            let s = space(k);
            let fx = ScalarField::interpolate(s.clone(), |p| p.x);
            let c = ScalarField::interpolate(s.clone(), |_| 3.5);
            for t in [0, 5, s.mesh().n_triangles() - 1] {
                let g = fx.gradient_at(t, [0.2, 0.3]);
                assert!((g.x - 1.0).abs() < 1e-11 && g.y.abs() < 1e-11);
                let g = c.gradient_at(t, [0.6, 0.1]);
                assert!(g.norm() < 1e-11);
            }
        }
    }

    #[test]
    fn quadratic_profile_is_reproduced() {
        let g = ChannelGeometry::<f64>::benchmark();
        let s = space(2);
        let u = ScalarField::interpolate(s.clone(), |p| g.profile(p.y));
        for t in 0..s.mesh().n_triangles() {
            for xi in [[0.1, 0.1], [0.5, 0.25], [0.0, 1.0]] {
                let p = s.element_map(t).map(xi);
                let grad = u.gradient_at(t, xi);
                assert!(grad.x.abs() < 1e-10);
                assert!((grad.y - g.profile_slope(p.y)).abs() < 1e-10);
                assert!((u.value_at(t, xi) - g.profile(p.y)).abs() < 1e-12);
            }
        }
        let loc = Locator::new(s.mesh());
        let p = Vec2::new(4.73, 0.31);
        assert!((u.evaluate(&loc, p).unwrap() - g.profile(0.31)).abs() < 1e-12);
        assert!(u.evaluate(&loc, Vec2::new(1.0, 0.2)).is_none());
    }
}
