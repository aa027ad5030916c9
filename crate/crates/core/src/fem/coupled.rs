//! The coupled solution: closed-form 0D profile left of the interface, FE
//! solution right of it.

use std::sync::Arc;

use rayon::prelude::*;

use super::field::ScalarField;
use super::poisson::solve_poisson;
use super::space::LagrangeSpace;
use crate::error::{Error, Result};
use crate::geometry::{ChannelGeometry, InterfaceConfig};
use crate::linsolve::LinearSolver;
use crate::mesh::{Locator, TriMesh};
use crate::point::Vec2;
use crate::quadrature::TriangleRule;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct CoupledSolution<T> {
    pub geometry: ChannelGeometry<T>,
    /// `None` means the FE part covers the whole channel.
    pub interface: Option<InterfaceConfig<T>>,
    pub field: ScalarField<T>,
}

impl<T: Real> CoupledSolution<T> {
    pub fn space(&self) -> &Arc<LagrangeSpace<T>> {
        self.field.space()
    }

    pub fn mesh(&self) -> &Arc<TriMesh<T>> {
        self.field.space().mesh()
    }

    pub fn n_dofs(&self) -> usize {
        self.field.space().n_dofs()
    }

    /// Whether `p` is handled by the 0D profile.
    pub fn in_zero_d(&self, p: Vec2<T>) -> bool {
        self.interface
            .is_some_and(|i| p.x < i.x_gamma && p.y >= T::zero() && p.y <= self.geometry.r)
    }

    /// Gradient of the coupled solution, `None` outside the channel.
    pub fn gradient(&self, locator: &Locator<T>, p: Vec2<T>) -> Option<Vec2<T>> {
        if self.in_zero_d(p) {
            return Some(Vec2::new(T::zero(), self.geometry.profile_slope(p.y)));
        }
        self.field.gradient_at_point(locator, p)
    }

    pub fn value(&self, locator: &Locator<T>, p: Vec2<T>) -> Option<T> {
        if self.in_zero_d(p) {
            return Some(self.geometry.profile(p.y));
        }
        self.field.evaluate(locator, p)
    }
}

/// Solves the FE problem on `mesh` (a mesh of the FE subdomain for the given
/// interface) with the 0D profile as Dirichlet data on the interface.
pub fn solve_coupled<T: Real>(
    geometry: &ChannelGeometry<T>,
    interface: Option<InterfaceConfig<T>>,
    mesh: Arc<TriMesh<T>>,
    degree: usize,
    solver: LinearSolver,
) -> Result<CoupledSolution<T>> {
    let space = Arc::new(LagrangeSpace::new(mesh, degree)?);
    let field = solve_poisson(&space, geometry.source(), |p, l| geometry.boundary_data(p, l), solver)?;
    Ok(CoupledSolution {
        geometry: geometry.clone(),
        interface,
        field,
    })
}

/// `‖∇u_h^c‖` over the channel: quadrature on the FE part plus the closed
/// form `x_gamma * 12 u_av² / R` of the 0D part.
pub fn solution_energy_norm<T: Real>(coupled: &CoupledSolution<T>) -> T {
    let space = coupled.space();
    let mesh = space.mesh();
    let rule = TriangleRule::<T>::with_degree(2 * space.degree());
    let tab = space.element().tabulate(&rule.points);
    // collected before summing so the result does not depend on the thread count
    let local: Vec<T> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let det = space.element_map(t).det.abs();
            let grads = coupled.field.element_gradients(t, &tab);
            rule.weights
                .iter()
                .zip(grads)
                .map(|(&w, g)| w * det * g.norm_squared())
                .sum::<T>()
        })
        .collect();
    let fe: T = local.into_iter().sum();
    let g = &coupled.geometry;
    let zero_d = coupled
        .interface
        .map_or(T::zero(), |i| i.x_gamma * T::lit(12.0) * g.u_av * g.u_av / g.r);
    (fe + zero_d).sqrt()
}

/// Deepest uniform subdivision of a reference element used when the coarse
/// mesh is locally finer than the reference mesh.
const MAX_SPLIT: usize = 3;

/// `rule` repeated on the `4^level` congruent subtriangles of the
/// reference triangle.
fn composite_rule<T: Real>(rule: &TriangleRule<T>, level: usize) -> (Vec<[T; 2]>, Vec<T>) {
    let mut tris = vec![[[T::zero(), T::zero()], [T::one(), T::zero()], [T::zero(), T::one()]]];
    let half = T::lit(0.5);
    let mid = |a: [T; 2], b: [T; 2]| [(a[0] + b[0]) * half, (a[1] + b[1]) * half];
    for _ in 0..level {
        tris = tris
            .into_iter()
            .flat_map(|[a, b, c]| {
                let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
                [[a, ab, ca], [ab, b, bc], [ca, bc, c], [bc, ca, ab]]
            })
            .collect();
    }
    let scale = T::one() / T::from_usize_lossy(tris.len());
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for [a, b, c] in tris {
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            points.push([
                a[0] + (b[0] - a[0]) * p[0] + (c[0] - a[0]) * p[1],
                a[1] + (b[1] - a[1]) * p[0] + (c[1] - a[1]) * p[1],
            ]);
            weights.push(w * scale);
        }
    }
    (points, weights)
}

/// `‖∇u_ref - ∇u_h^c‖` over the channel, integrated on the reference mesh
/// with a rule of the given degree. The coupled solution is evaluated by
/// point location in its own mesh (closed form left of the interface).
/// Reference elements larger than the coarse element under their centroid
/// are subdivided so the coarse kinks stay resolved.
pub fn energy_norm_error<T: Real>(
    coupled: &CoupledSolution<T>,
    reference: &ScalarField<T>,
    quad_degree: usize,
) -> Result<T> {
    let coarse = coupled.mesh();
    let locator = Locator::new(coarse);
    let ref_space = reference.space();
    let ref_mesh = ref_space.mesh();
    let rule = TriangleRule::<T>::with_degree(quad_degree);
    let levels: Vec<_> = (0..=MAX_SPLIT)
        .map(|l| {
            let (points, weights) = composite_rule(&rule, l);
            let tab = ref_space.element().tabulate(&points);
            (points, weights, tab)
        })
        .collect();
    let n_tri = ref_mesh.n_triangles();
    let third = T::one() / T::lit(3.0);

    let chunk = 2048;
    let parts: Vec<(T, usize, usize)> = (0..n_tri.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut sum = T::zero();
            let mut failed = 0;
            let mut total = 0;
            let mut hint = 0usize;
            for t in c * chunk..((c + 1) * chunk).min(n_tri) {
                let map = ref_space.element_map(t);
                let det = map.det.abs();
                let centroid = map.map([third, third]);
                let mut level = 0;
                if !coupled.in_zero_d(centroid) {
                    if let Some((tc, _)) = locator.locate_with_hint(coarse, centroid, hint) {
                        hint = tc;
                        let (mut h, hc) = (ref_mesh.diameter(t), coarse.diameter(tc));
                        while h > hc && level < MAX_SPLIT {
                            h *= T::lit(0.5);
                            level += 1;
                        }
                    }
                }
                let (points, weights, tab) = &levels[level];
                let grads = reference.element_gradients(t, tab);
                for (q, &w) in weights.iter().enumerate() {
                    total += 1;
                    let p = map.map(points[q]);
                    let gh = if coupled.in_zero_d(p) {
                        Vec2::new(T::zero(), coupled.geometry.profile_slope(p.y))
                    } else {
                        match locator.locate_with_hint(coarse, p, hint) {
                            Some((tc, l)) => {
                                hint = tc;
                                coupled.field.gradient_at(tc, [l[1], l[2]])
                            }
                            None => {
                                failed += 1;
                                continue;
                            }
                        }
                    };
                    sum += w * det * (grads[q] - gh).norm_squared();
                }
            }
            (sum, failed, total)
        })
        .collect();
    let (sum, failed, total) = parts
        .into_iter()
        .fold((T::zero(), 0, 0), |(s, f, n), (a, b, c)| (s + a, f + b, n + c));
    if failed * 10_000 > total {
        return Err(Error::LocateFailures { failed, total });
    }
    if failed > 0 {
        log::warn!("{failed} of {total} quadrature points could not be located");
    }
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::triangulate;

    #[test]
    fn reference_equal_to_coupled_gives_zero_error() {
        let g = ChannelGeometry::<f64>::benchmark();
        let i = InterfaceConfig::new(&g, 4.6).unwrap();
        let mesh = Arc::new(triangulate(&g.fe_polygon(Some(&i)), 0.1).unwrap());
        let c = solve_coupled(&g, Some(i), mesh, 2, LinearSolver::Cholesky).unwrap();
        // interpolate the coupled solution on a mesh of the whole channel
        // that contains the FE mesh's grid lines
        let full = Arc::new(triangulate(&g.boundary, 0.1).unwrap());
        let full = Arc::new(crate::mesh::refine_uniform(&full).unwrap());
        let s = Arc::new(LagrangeSpace::new(full, 2).unwrap());
        let loc = Locator::new(c.mesh());
        let r = ScalarField::interpolate(s, |p| c.value(&loc, p).unwrap());
        let e = energy_norm_error(&c, &r, 6).unwrap();
        // not nested, so only small, not zero
        assert!(e < 0.05, "{e}");
        let self_err = energy_norm_error(&c, &c.field, 6).unwrap();
        assert!(self_err < 1e-10, "{self_err}");
        // the 0D part in closed form agrees with quadrature of the interpolant
        let zero = ScalarField::zeros(r.space().clone());
        let full = energy_norm_error(&c, &zero, 6).unwrap();
        let n = solution_energy_norm(&c);
        assert!((full - n).abs() < 1e-3 * n, "{full} vs {n}");
    }

    #[test]
    fn composite_rules_keep_their_degree() {
        let rule = TriangleRule::<f64>::with_degree(4);
        for level in 0..=MAX_SPLIT {
            let (p, w) = composite_rule(&rule, level);
            assert_eq!(p.len(), rule.points.len() << (2 * level));
            // ∫ x² y over the reference triangle is 1/60
            let v: f64 = p.iter().zip(&w).map(|(p, w)| w * p[0] * p[0] * p[1]).sum();
            assert!((v - 1.0 / 60.0).abs() < 1e-14, "level {level}: {v}");
        }
    }
}
