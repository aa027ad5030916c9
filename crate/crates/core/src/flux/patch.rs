//! Local mixed problems on vertex patches and on the interface patch.
//!
//! On a patch `ω` with weight `ψ` (a hat function, or the discrete interface
//! bubble) the flux `σ` minimises `‖σ + ψ∇u‖` over broken-free RT fields
//! with `div σ = fψ - ∇u·∇ψ` (projected onto `P_k`) and zero normal flux on
//! the constrained part of `∂ω`. The saddle-point system is
//!
//! ```text
//! [ M  -Bᵀ  0 ] [σ]   [-(ψ∇u, τ)       ]
//! [-B   0  -c ] [p] = [-(fψ - ∇u·∇ψ, q)]
//! [ 0  -cᵀ  0 ] [μ]   [ 0              ]
//! ```
//!
//! where the last row and column (zero-mean pressure) only exist for patches
//! closed on every side.

use std::collections::HashMap;
use std::fmt;

use super::classify::{NodeClass, NodeClassification};
use super::rt::{p_dim, rt_dim, RtElement};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::fem::{ElementMap, ScalarField};
use crate::geometry::BoundaryLabel;
use crate::linsolve::{solve_general, CsrMatrix};
use crate::mesh::TriMesh;
use crate::point::Vec2;
use crate::quadrature::TriangleRule;
use crate::scalar::Real;

/// Patches up to this many unknowns are solved densely.
const MAX_DENSE: usize = 400;
/// Relative tolerance on the compatibility of closed patches.
const COMPAT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatchId {
    Vertex(usize),
    Gamma,
}

impl fmt::Display for PatchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatchId::Vertex(v) => write!(f, "vertex {v}"),
            PatchId::Gamma => write!(f, "interface"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PatchProblem<T> {
    pub id: PatchId,
    pub elements: Vec<usize>,
    /// Values of the weight function at the vertices of each element.
    pub weights: Vec<[T; 3]>,
    /// Edges with zero normal flux, sorted.
    pub constrained_edges: Vec<usize>,
    pub mean_constraint: bool,
}

/// Builds patch problems; holds the vertex-to-triangle adjacency.
pub struct PatchBuilder<'a, T> {
    mesh: &'a TriMesh<T>,
    classification: &'a NodeClassification<T>,
    vertex_triangles: Vec<Vec<usize>>,
}

impl<'a, T: Real> PatchBuilder<'a, T> {
    pub fn new(mesh: &'a TriMesh<T>, classification: &'a NodeClassification<T>) -> Self {
        Self {
            mesh,
            classification,
            vertex_triangles: mesh.vertex_triangles(),
        }
    }

    /// Every patch the flux is assembled from: one per vertex off the
    /// interface, plus the interface patch when there is an interface.
    pub fn patch_ids(&self) -> Vec<PatchId> {
        let mut ids: Vec<PatchId> = (0..self.mesh.n_vertices())
            .filter(|&v| self.classification.classes[v] != NodeClass::OnGamma)
            .map(PatchId::Vertex)
            .collect();
        if self.classification.has_interface() {
            ids.push(PatchId::Gamma);
        }
        ids
    }

    pub fn build(&self, id: PatchId) -> Result<PatchProblem<T>> {
        let mesh = self.mesh;
        let cls = self.classification;
        let (elements, weights, mean_constraint) = match id {
            PatchId::Vertex(a) => {
                if a >= mesh.n_vertices() || cls.classes[a] == NodeClass::OnGamma {
                    return Err(Error::InvalidParameter(format!(
                        "vertex {a} does not carry a patch problem"
                    )));
                }
                let elements = self.vertex_triangles[a].clone();
                let weights = elements
                    .iter()
                    .map(|&t| mesh.triangle(t).map(|v| if v == a { T::one() } else { T::zero() }))
                    .collect();
                (elements, weights, cls.classes[a] == NodeClass::Interior)
            }
            PatchId::Gamma => {
                let elements: Vec<usize> = (0..mesh.n_triangles())
                    .filter(|&t| mesh.triangle(t).iter().any(|&v| cls.weights[v] > T::zero()))
                    .collect();
                let weights = elements
                    .iter()
                    .map(|&t| mesh.triangle(t).map(|v| cls.weights[v]))
                    .collect();
                (elements, weights, false)
            }
        };
        if elements.is_empty() {
            return Err(Error::EmptyPatch(id.to_string()));
        }
        let mut count: HashMap<usize, u8> = HashMap::new();
        for &t in &elements {
            for e in mesh.triangle_edges(t) {
                *count.entry(e).or_default() += 1;
            }
        }
        let mut constrained_edges: Vec<usize> = count
            .into_iter()
            .filter(|&(e, c)| {
                c == 1 && (mean_constraint || matches!(mesh.edge_label(e), None | Some(BoundaryLabel::Interface)))
            })
            .map(|(e, _)| e)
            .collect();
        constrained_edges.sort_unstable();
        Ok(PatchProblem {
            id,
            elements,
            weights,
            constrained_edges,
            mean_constraint,
        })
    }
}

/// Flux and pressure of one patch, as local coefficient blocks of the
/// patch elements (flux is zero elsewhere).
#[derive(Debug, Clone)]
pub struct PatchSolution<T> {
    pub id: PatchId,
    pub elements: Vec<usize>,
    /// `rt_dim(k)` coefficients per element.
    pub flux: Vec<T>,
    /// `p_dim(k)` coefficients per element.
    pub pressure: Vec<T>,
    /// `‖σ + ψ∇u‖²_T` per element.
    pub residuals: Vec<T>,
}

impl<T: Real> PatchSolution<T> {
    pub fn element_flux(&self, i: usize) -> &[T] {
        let nb = self.flux.len() / self.elements.len();
        &self.flux[i * nb..(i + 1) * nb]
    }
}

/// Quadrature weights, RT basis values and `ψ∇u` on one element.
pub(crate) type ElementQuadrature<T> = (Vec<T>, Vec<Vec<Vec2<T>>>, Vec<Vec2<T>>);

/// Assembled saddle-point system of a patch.
pub(crate) struct PatchSystem<T> {
    pub n_sigma: usize,
    pub n_pressure: usize,
    pub has_mean: bool,
    /// Global unknown of each local RT DoF, per element.
    pub rt_map: Vec<Vec<Option<usize>>>,
    pub entries: Vec<(usize, usize, T)>,
    /// `-(ψ∇u, τ)` for each flux unknown.
    pub rhs_flux: Vec<T>,
    /// `(fψ - ∇u·∇ψ, q)` for each pressure unknown.
    pub rhs_div: Vec<T>,
    /// Flux mass matrix blocks, kept for tests.
    #[cfg_attr(not(test), allow(dead_code))]
    pub mass: Vec<(usize, usize, T)>,
    /// Per element: quadrature weights, RT basis values and `ψ∇u` at the
    /// quadrature points, for the local residual norms.
    pub quad: Vec<ElementQuadrature<T>>,
}

impl<T: Real> PatchSystem<T> {
    pub fn size(&self) -> usize {
        self.n_sigma + self.n_pressure + usize::from(self.has_mean)
    }

    /// Solves with the given right-hand sides (flux rows, divergence rows).
    pub fn solve_with(&self, rhs_flux: &[T], rhs_div: &[T]) -> Result<Vec<T>> {
        let n = self.size();
        let mut rhs = vec![T::zero(); n];
        rhs[..self.n_sigma].copy_from_slice(rhs_flux);
        for (r, &g) in rhs[self.n_sigma..self.n_sigma + self.n_pressure]
            .iter_mut()
            .zip(rhs_div)
        {
            *r = -g;
        }
        if n <= MAX_DENSE {
            let mut a = DenseMatrix::zeros(n, n);
            for &(i, j, v) in &self.entries {
                a[(i, j)] += v;
            }
            Ok(a.lu()?.solve(&rhs))
        } else {
            let triplets: Vec<(usize, usize, f64)> = self.entries.iter().map(|&(i, j, v)| (i, j, v.as_f64())).collect();
            let a = CsrMatrix::from_triplets(n, n, &triplets);
            let b: Vec<f64> = rhs.iter().map(|v| v.as_f64()).collect();
            Ok(solve_general(&a, &b)?.into_iter().map(T::lit).collect())
        }
    }
}

pub(crate) fn assemble_patch<T: Real>(problem: &PatchProblem<T>, u: &ScalarField<T>, f: T) -> Result<PatchSystem<T>> {
    let space = u.space();
    let mesh = space.mesh();
    let k = space.degree();
    let nb = rt_dim(k);
    let np = p_dim(k);
    let per_edge = k + 1;
    let n_int = nb - 3 * per_edge;

    let mut edge_index: HashMap<usize, usize> = HashMap::new();
    for &t in &problem.elements {
        for e in mesh.triangle_edges(t) {
            if problem.constrained_edges.binary_search(&e).is_err() {
                let next = edge_index.len();
                edge_index.entry(e).or_insert(next);
            }
        }
    }
    let n_edge_unknowns = edge_index.len() * per_edge;
    let n_sigma = n_edge_unknowns + problem.elements.len() * n_int;
    let n_pressure = problem.elements.len() * np;
    let mu = n_sigma + n_pressure;

    let rule = TriangleRule::<T>::with_degree(2 * k + 2);
    let tab = space.element().tabulate(&rule.points);
    let hat_ref = [[-T::one(), -T::one()], [T::one(), T::zero()], [T::zero(), T::one()]];

    let mut rt_map = Vec::with_capacity(problem.elements.len());
    let mut entries = Vec::new();
    let mut mass = Vec::new();
    let mut quad = Vec::with_capacity(problem.elements.len());
    let mut rhs_flux = vec![T::zero(); n_sigma];
    let mut rhs_div = vec![T::zero(); n_pressure];
    let mut compat = T::zero();
    let mut compat_scale = T::zero();

    for (idx, (&t, w)) in problem.elements.iter().zip(&problem.weights).enumerate() {
        let edges = mesh.triangle_edges(t);
        let map_local: Vec<Option<usize>> = (0..nb)
            .map(|l| {
                if l < 3 * per_edge {
                    edge_index
                        .get(&edges[l / per_edge])
                        .map(|&i| i * per_edge + l % per_edge)
                } else {
                    Some(n_edge_unknowns + idx * n_int + l - 3 * per_edge)
                }
            })
            .collect();
        let el = RtElement::for_triangle(mesh, t, k)?;
        let map = ElementMap::new(mesh.triangle_points(t));
        let det = map.det.abs();
        let grad_psi = (0..3).fold(Vec2::zero(), |acc, i| acc + map.push_gradient(hat_ref[i]) * w[i]);
        let grads = u.element_gradients(t, &tab);

        let mut m_loc = vec![T::zero(); nb * nb];
        let mut b_loc = vec![T::zero(); np * nb];
        let mut c_loc = vec![T::zero(); np];
        let mut f_loc = vec![T::zero(); nb];
        let mut g_loc = vec![T::zero(); np];
        let mut q_weights = Vec::with_capacity(rule.weights.len());
        let mut q_phi = Vec::with_capacity(rule.weights.len());
        let mut q_target = Vec::with_capacity(rule.weights.len());
        for (q, &wq) in rule.weights.iter().enumerate() {
            let wq = wq * det;
            let xi = rule.points[q];
            let lam = [T::one() - xi[0] - xi[1], xi[0], xi[1]];
            let psi = w[0] * lam[0] + w[1] * lam[1] + w[2] * lam[2];
            let x = map.map(xi);
            let phi = el.values(x);
            let div = el.divergences(x);
            let pres = el.pressure_values(x);
            let gu = grads[q];
            for i in 0..nb {
                f_loc[i] -= wq * psi * gu.dot(phi[i]);
                for j in i..nb {
                    m_loc[i * nb + j] += wq * phi[i].dot(phi[j]);
                }
            }
            let src = f * psi - gu.dot(grad_psi);
            compat += wq * src;
            compat_scale += wq * ((f * psi).abs() + gu.dot(grad_psi).abs());
            for m in 0..np {
                c_loc[m] += wq * pres[m];
                g_loc[m] += wq * src * pres[m];
                for i in 0..nb {
                    b_loc[m * nb + i] += wq * pres[m] * div[i];
                }
            }
            q_weights.push(wq);
            q_target.push(gu * psi);
            q_phi.push(phi);
        }
        quad.push((q_weights, q_phi, q_target));
        for i in 0..nb {
            let Some(gi) = map_local[i] else { continue };
            rhs_flux[gi] += f_loc[i];
            for j in 0..nb {
                let Some(gj) = map_local[j] else { continue };
                let v = if j >= i { m_loc[i * nb + j] } else { m_loc[j * nb + i] };
                entries.push((gi, gj, v));
                mass.push((gi, gj, v));
            }
        }
        for m in 0..np {
            let pm = n_sigma + idx * np + m;
            rhs_div[idx * np + m] = g_loc[m];
            for i in 0..nb {
                let Some(gi) = map_local[i] else { continue };
                let v = b_loc[m * nb + i];
                entries.push((gi, pm, -v));
                entries.push((pm, gi, -v));
            }
            if problem.mean_constraint {
                entries.push((pm, mu, -c_loc[m]));
                entries.push((mu, pm, -c_loc[m]));
            }
        }
        rt_map.push(map_local);
    }

    if problem.mean_constraint {
        let tiny = T::min_positive_value();
        if compat.abs() > T::lit(COMPAT_TOL) * compat_scale.max(tiny) {
            let vertex = match problem.id {
                PatchId::Vertex(v) => v,
                PatchId::Gamma => usize::MAX,
            };
            return Err(Error::CompatibilityViolation {
                vertex,
                value: compat.as_f64(),
            });
        }
    }
    Ok(PatchSystem {
        n_sigma,
        n_pressure,
        has_mean: problem.mean_constraint,
        rt_map,
        entries,
        rhs_flux,
        rhs_div,
        mass,
        quad,
    })
}

/// Solves the patch problem for the FE solution `u` and constant source `f`.
pub fn solve_patch<T: Real>(problem: &PatchProblem<T>, u: &ScalarField<T>, f: T) -> Result<PatchSolution<T>> {
    let sys = assemble_patch(problem, u, f)?;
    let x = sys.solve_with(&sys.rhs_flux, &sys.rhs_div)?;
    Ok(unpack(problem, &sys, &x, u.space().degree()))
}

pub(crate) fn unpack<T: Real>(problem: &PatchProblem<T>, sys: &PatchSystem<T>, x: &[T], k: usize) -> PatchSolution<T> {
    let nb = rt_dim(k);
    let np = p_dim(k);
    let mut flux = Vec::with_capacity(problem.elements.len() * nb);
    for map_local in &sys.rt_map {
        flux.extend(map_local.iter().map(|g| g.map_or(T::zero(), |g| x[g])));
    }
    let pressure = x[sys.n_sigma..sys.n_sigma + problem.elements.len() * np].to_vec();
    let residuals = sys
        .quad
        .iter()
        .zip(flux.chunks(nb))
        .map(|((weights, phi, target), c)| {
            weights
                .iter()
                .zip(phi)
                .zip(target)
                .map(|((&w, phi), &g)| {
                    let v = phi.iter().zip(c).fold(g, |acc, (&p, &ci)| acc + p * ci);
                    w * v.norm_squared()
                })
                .sum()
        })
        .collect();
    PatchSolution {
        id: problem.id,
        elements: problem.elements.clone(),
        flux,
        pressure,
        residuals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{solve_coupled, CoupledSolution};
    use crate::flux::classify::classify_nodes;
    use crate::geometry::{ChannelGeometry, InterfaceConfig};
    use crate::linsolve::LinearSolver;
    use crate::mesh::triangulate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn setup(x_gamma: f64, h: f64) -> (CoupledSolution<f64>, NodeClassification<f64>) {
        let g = ChannelGeometry::benchmark();
        let i = InterfaceConfig::new(&g, x_gamma).unwrap();
        let m = Arc::new(triangulate(&g.fe_polygon(Some(&i)), h).unwrap());
        let c = solve_coupled(&g, Some(i), m.clone(), 2, LinearSolver::Cholesky).unwrap();
        let cls = classify_nodes(&m, &g, Some(&i)).unwrap();
        (c, cls)
    }

    fn find_vertex(m: &TriMesh<f64>, pred: impl Fn(Vec2<f64>) -> bool) -> usize {
        (0..m.n_vertices())
            .find(|&v| pred(m.vertex(v)))
            .expect("no vertex matches")
    }

    fn find_interior(m: &TriMesh<f64>, x_min: f64, x_max: f64) -> usize {
        (0..m.n_vertices())
            .find(|&v| {
                let p = m.vertex(v);
                !m.is_boundary_vertex(v) && p.x > x_min && p.x < x_max && p.y > 0.0 && p.y < 0.5
            })
            .expect("no interior vertex in range")
    }

    #[test]
    fn constraint_sets_follow_vertex_class() {
        let (c, cls) = setup(4.6, 0.1);
        let m = c.mesh();
        let b = PatchBuilder::new(m, &cls);
        let interior = find_interior(m, 4.8, 5.1);
        let p = b.build(PatchId::Vertex(interior)).unwrap();
        assert!(p.mean_constraint);
        assert_eq!(p.constrained_edges.len(), p.elements.len());

        let wall = find_vertex(m, |p| p.y == 0.0 && p.x > 4.8 && p.x < 5.0);
        let p = b.build(PatchId::Vertex(wall)).unwrap();
        assert!(!p.mean_constraint);
        // the two wall edges at the vertex are free
        assert_eq!(p.constrained_edges.len(), p.elements.len());
        for &e in &p.constrained_edges {
            assert!(!m.is_boundary_edge(e));
        }

        let gp = b.build(PatchId::Gamma).unwrap();
        let n_gamma_edges = (0..m.n_edges())
            .filter(|&e| m.edge_label(e) == Some(BoundaryLabel::Interface))
            .count();
        let constrained_gamma = gp
            .constrained_edges
            .iter()
            .filter(|&&e| m.edge_label(e) == Some(BoundaryLabel::Interface))
            .count();
        assert_eq!(constrained_gamma, n_gamma_edges);
        assert!(gp
            .constrained_edges
            .iter()
            .all(|&e| m.edge_label(e) != Some(BoundaryLabel::Wall)));
        assert!(b.build(PatchId::Vertex(find_vertex(m, |p| p.x == 4.6))).is_err());
    }

    #[test]
    fn gamma_patch_reaching_past_the_corner() {
        // x_gamma + R > L: the bubble overlaps the bend
        let (c, cls) = setup(4.8, 0.1);
        let b = PatchBuilder::new(c.mesh(), &cls);
        let gp = b.build(PatchId::Gamma).unwrap();
        let sol = solve_patch(&gp, &c.field, c.geometry.source()).unwrap();
        assert!(sol.flux.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_data_gives_zero_flux() {
        let g = ChannelGeometry::<f64>::benchmark().with_u_av(0.0);
        let i = InterfaceConfig::new(&g, 4.0).unwrap();
        let m = Arc::new(triangulate(&g.fe_polygon(Some(&i)), 0.1).unwrap());
        let c = solve_coupled(&g, Some(i), m.clone(), 2, LinearSolver::Cholesky).unwrap();
        let cls = classify_nodes(&m, &g, Some(&i)).unwrap();
        let b = PatchBuilder::new(&m, &cls);
        for id in [PatchId::Vertex(0), PatchId::Vertex(40), PatchId::Gamma] {
            let p = b.build(id).unwrap();
            let s = solve_patch(&p, &c.field, 0.0).unwrap();
            assert!(s.flux.iter().chain(&s.pressure).all(|&v| v == 0.0));
        }
    }

    /// Re-evaluates `(div σ, q)` and `(fψ - ∇u·∇ψ, q)` per element with an
    /// independent, higher-degree rule in reference coordinates.
    fn divergence_residual(p: &PatchProblem<f64>, s: &PatchSolution<f64>, u: &ScalarField<f64>, f: f64) -> f64 {
        let mesh = u.space().mesh();
        let rule = TriangleRule::<f64>::with_degree(10);
        let mut worst = 0.0f64;
        for (i, &t) in p.elements.iter().enumerate() {
            let el = RtElement::for_triangle(mesh, t, 2).unwrap();
            let pts = mesh.triangle_points(t);
            let e1 = pts[1] - pts[0];
            let e2 = pts[2] - pts[0];
            let det = (e1.x * e2.y - e1.y * e2.x).abs();
            // hat gradients from the edge vectors
            let inv = 1.0 / (e1.x * e2.y - e1.y * e2.x);
            let gl1 = Vec2::new(e2.y * inv, -e2.x * inv);
            let gl2 = Vec2::new(-e1.y * inv, e1.x * inv);
            let gl0 = (gl1 + gl2) * -1.0;
            let w = p.weights[i];
            let gpsi = gl0 * w[0] + gl1 * w[1] + gl2 * w[2];
            let mut lhs = [0.0; 6];
            let mut rhs = [0.0; 6];
            for (q, &wq) in rule.weights.iter().enumerate() {
                let xi = rule.points[q];
                let x = pts[0] + e1 * xi[0] + e2 * xi[1];
                let psi = w[0] * (1.0 - xi[0] - xi[1]) + w[1] * xi[0] + w[2] * xi[1];
                let du = u.gradient_at(t, xi);
                let div = el.evaluate_divergence(s.element_flux(i), x);
                let pres = el.pressure_values(x);
                for m in 0..6 {
                    lhs[m] += wq * det * div * pres[m];
                    rhs[m] += wq * det * (f * psi - du.dot(gpsi)) * pres[m];
                }
            }
            for m in 0..6 {
                worst = worst.max((lhs[m] - rhs[m]).abs());
            }
        }
        worst
    }

    #[test]
    fn constraint_equation_holds_on_every_patch_kind() {
        let (c, cls) = setup(4.0, 0.1);
        let m = c.mesh();
        let f = c.geometry.source();
        let b = PatchBuilder::new(m, &cls);
        let interior = find_interior(m, 4.3, 5.0);
        let wall = find_vertex(m, |p| p.y == 0.5 && p.x > 4.5);
        let corner = find_vertex(m, |p| p.x == 5.1 && p.y == 0.0);
        for id in [
            PatchId::Vertex(interior),
            PatchId::Vertex(wall),
            PatchId::Vertex(corner),
            PatchId::Gamma,
        ] {
            let p = b.build(id).unwrap();
            let s = solve_patch(&p, &c.field, f).unwrap();
            let r = divergence_residual(&p, &s, &c.field, f);
            assert!(r < 1e-10, "{id}: {r}");
        }
    }

    #[test]
    fn patch_flux_is_minimal() {
        let (c, cls) = setup(4.0, 0.1);
        let m = c.mesh();
        let f = c.geometry.source();
        let b = PatchBuilder::new(m, &cls);
        let interior = find_interior(m, 4.5, 5.0);
        let wall = find_vertex(m, |p| p.y == 0.0 && p.x > 4.1 && p.x < 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rule = TriangleRule::<f64>::with_degree(8);
        for id in [PatchId::Vertex(interior), PatchId::Vertex(wall), PatchId::Gamma] {
            let p = b.build(id).unwrap();
            let sys = assemble_patch(&p, &c.field, f).unwrap();
            let x = sys.solve_with(&sys.rhs_flux, &sys.rhs_div).unwrap();
            let s = unpack(&p, &sys, &x, 2);
            let norm = |sol: &PatchSolution<f64>| -> f64 {
                let mut acc = 0.0;
                for (i, &t) in p.elements.iter().enumerate() {
                    let el = RtElement::for_triangle(m, t, 2).unwrap();
                    let map = ElementMap::new(m.triangle_points(t));
                    for (q, &wq) in rule.weights.iter().enumerate() {
                        let xi = rule.points[q];
                        let w = p.weights[i];
                        let psi = w[0] * (1.0 - xi[0] - xi[1]) + w[1] * xi[0] + w[2] * xi[1];
                        let v = el.evaluate(sol.element_flux(i), map.map(xi)) + c.field.gradient_at(t, xi) * psi;
                        acc += wq * map.det.abs() * v.norm_squared();
                    }
                }
                acc.sqrt()
            };
            let base = norm(&s);
            // divergence-free, boundary-respecting perturbations: M-orthogonal
            // projections of random vectors onto the constraint kernel
            let zero_div = vec![0.0; sys.n_pressure];
            for _ in 0..20 {
                let r: Vec<f64> = (0..sys.n_sigma).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut mr = vec![0.0; sys.n_sigma];
                for &(i, j, v) in &sys.mass {
                    mr[i] += v * r[j];
                }
                let d = sys.solve_with(&mr, &zero_div).unwrap();
                let scale = rng.gen_range(-0.5..0.5);
                let y: Vec<f64> = x
                    .iter()
                    .enumerate()
                    .map(|(i, &xi)| if i < sys.n_sigma { xi + scale * d[i] } else { xi })
                    .collect();
                let perturbed = unpack(&p, &sys, &y, 2);
                assert!(divergence_residual(&p, &perturbed, &c.field, f) < 1e-9);
                assert!(norm(&perturbed) >= base - 1e-10, "{id}");
            }
        }
    }
}
