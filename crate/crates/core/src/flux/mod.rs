//! Equilibrated flux reconstruction for the coupled solution.
//!
//! Left of the interface the flux is the exact `-∇u'`. On the FE part it is
//! assembled from local mixed problems:
//!
//! `σ̃ = σ^Γ + Σ_{a ∉ Γ} (1 - w_a) σ^a`
//!
//! where `σ^a` lives on the patch of vertex `a` with weight `ψ^a` and `σ^Γ`
//! on the interface patch with weight `ψ^Γ_h = Σ_a w_a ψ^a`. Both pieces
//! have zero normal flux on the interface, so the glued field is
//! `H(div)`-conforming with divergence `f`.

mod classify;
mod patch;
mod rt;

use std::sync::Arc;

use rayon::prelude::*;

pub use classify::{classify_nodes, NodeClass, NodeClassification};
pub use patch::{solve_patch, PatchBuilder, PatchId, PatchProblem, PatchSolution};
pub use rt::{edge_gauss_points, p_dim, rt_dim, RtElement};

use crate::error::{Error, Result};
use crate::fem::{CoupledSolution, ElementMap};
use crate::geometry::{BoundaryLabel, ChannelGeometry, InterfaceConfig};
use crate::mesh::{TriMesh, NO_TRIANGLE};
use crate::point::Vec2;
use crate::quadrature::{LineRule, TriangleRule};
use crate::scalar::Real;

/// Piecewise `RT_k` field stored as local coefficient blocks, one per
/// triangle. Blocks of neighbouring triangles share edge DoFs by
/// construction, so the sum of patch fields stays conforming.
#[derive(Debug, Clone)]
pub struct BrokenRtField<T> {
    mesh: Arc<TriMesh<T>>,
    degree: usize,
    coeffs: Vec<T>,
}

impl<T: Real> BrokenRtField<T> {
    pub fn zeros(mesh: Arc<TriMesh<T>>, degree: usize) -> Self {
        let n = mesh.n_triangles() * rt_dim(degree);
        Self {
            mesh,
            degree,
            coeffs: vec![T::zero(); n],
        }
    }

    pub fn mesh(&self) -> &Arc<TriMesh<T>> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn element_coeffs(&self, t: usize) -> &[T] {
        let nb = rt_dim(self.degree);
        &self.coeffs[t * nb..(t + 1) * nb]
    }

    pub fn element_coeffs_mut(&mut self, t: usize) -> &mut [T] {
        let nb = rt_dim(self.degree);
        &mut self.coeffs[t * nb..(t + 1) * nb]
    }

    /// Adds `scale` times a patch solution.
    pub fn add_patch(&mut self, sol: &PatchSolution<T>, scale: T) {
        if scale == T::zero() {
            return;
        }
        for (i, &t) in sol.elements.iter().enumerate() {
            for (c, &v) in self.element_coeffs_mut(t).iter_mut().zip(sol.element_flux(i)) {
                *c += scale * v;
            }
        }
    }

    pub fn element(&self, t: usize) -> Result<RtElement<T>> {
        RtElement::for_triangle(&self.mesh, t, self.degree)
    }

    pub fn value_at(&self, t: usize, x: Vec2<T>) -> Result<Vec2<T>> {
        Ok(self.element(t)?.evaluate(self.element_coeffs(t), x))
    }

    pub fn divergence_at(&self, t: usize, x: Vec2<T>) -> Result<T> {
        Ok(self.element(t)?.evaluate_divergence(self.element_coeffs(t), x))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == T::zero())
    }
}

/// The flux on the whole channel.
#[derive(Debug, Clone)]
pub struct CoupledFlux<T> {
    pub geometry: ChannelGeometry<T>,
    pub interface: Option<InterfaceConfig<T>>,
    pub classification: NodeClassification<T>,
    /// Assembled flux on the FE subdomain.
    pub sigma_tilde: BrokenRtField<T>,
    /// Interface-patch flux (unweighted), if there is an interface.
    pub sigma_gamma: Option<BrokenRtField<T>>,
    /// Triangles of the interface patch.
    pub gamma_elements: Vec<usize>,
    /// Unweighted sum of the vertex-patch fluxes.
    pub sigma_d: BrokenRtField<T>,
    /// `Σ_a ‖σ^a + ψ^a∇ũ‖²_T` over the vertex patches, per element.
    pub patch_residuals: Vec<T>,
}

impl<T: Real> CoupledFlux<T> {
    /// `σ' = -∇u' = (0, -S'(y))` on the 0D part.
    pub fn sigma_prime(&self, p: Vec2<T>) -> Vec2<T> {
        Vec2::new(T::zero(), -self.geometry.profile_slope(p.y))
    }

    pub fn mesh(&self) -> &Arc<TriMesh<T>> {
        self.sigma_tilde.mesh()
    }
}

/// Solves every patch problem (in parallel) for the coupled solution.
pub fn solve_patches<T: Real>(
    coupled: &CoupledSolution<T>,
    classification: &NodeClassification<T>,
) -> Result<Vec<PatchSolution<T>>> {
    let mesh = coupled.mesh();
    let builder = PatchBuilder::new(mesh, classification);
    let f = coupled.geometry.source();
    builder
        .patch_ids()
        .into_par_iter()
        .map(|id| {
            let p = builder.build(id)?;
            solve_patch(&p, &coupled.field, f)
        })
        .collect()
}

/// Combines patch solutions into the coupled flux. Expects one solution per
/// vertex off the interface, plus the interface patch if there is one.
pub fn assemble_coupled_flux<T: Real>(
    coupled: &CoupledSolution<T>,
    classification: NodeClassification<T>,
    contributions: &[PatchSolution<T>],
) -> Result<CoupledFlux<T>> {
    let mesh = coupled.mesh().clone();
    let k = coupled.space().degree();
    let mut seen = vec![false; mesh.n_vertices()];
    let mut gamma: Option<&PatchSolution<T>> = None;
    let mut sigma_tilde = BrokenRtField::zeros(mesh.clone(), k);
    let mut sigma_d = BrokenRtField::zeros(mesh.clone(), k);
    let mut patch_residuals = vec![T::zero(); mesh.n_triangles()];
    for sol in contributions {
        match sol.id {
            PatchId::Vertex(a) => {
                if classification.classes[a] == NodeClass::OnGamma {
                    return Err(Error::InvalidParameter(format!(
                        "vertex {a} lies on the interface and carries no patch"
                    )));
                }
                seen[a] = true;
                sigma_tilde.add_patch(sol, T::one() - classification.weights[a]);
                sigma_d.add_patch(sol, T::one());
                for (&t, &r) in sol.elements.iter().zip(&sol.residuals) {
                    patch_residuals[t] += r;
                }
            }
            PatchId::Gamma => gamma = Some(sol),
        }
    }
    if let Some(a) = (0..mesh.n_vertices()).find(|&a| classification.classes[a] != NodeClass::OnGamma && !seen[a]) {
        return Err(Error::MissingContribution(PatchId::Vertex(a).to_string()));
    }
    let (sigma_gamma, gamma_elements) = match (classification.has_interface(), gamma) {
        (true, Some(sol)) => {
            sigma_tilde.add_patch(sol, T::one());
            let mut field = BrokenRtField::zeros(mesh.clone(), k);
            field.add_patch(sol, T::one());
            (Some(field), sol.elements.clone())
        }
        (true, None) => return Err(Error::MissingContribution(PatchId::Gamma.to_string())),
        (false, _) => (None, Vec::new()),
    };
    Ok(CoupledFlux {
        geometry: coupled.geometry.clone(),
        interface: coupled.interface,
        classification,
        sigma_tilde,
        sigma_gamma,
        gamma_elements,
        sigma_d,
        patch_residuals,
    })
}

/// Classification, patch solves and assembly in one call.
pub fn reconstruct_flux<T: Real>(coupled: &CoupledSolution<T>) -> Result<CoupledFlux<T>> {
    let classification = classify_nodes(coupled.mesh(), &coupled.geometry, coupled.interface.as_ref())?;
    let contributions = solve_patches(coupled, &classification)?;
    assemble_coupled_flux(coupled, classification, &contributions)
}

/// Worst-case equilibration defects of an assembled flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibration<T> {
    /// Max over triangles of `‖div σ - f‖_T / ‖f‖_T` (absolute if `f = 0`).
    pub divergence: T,
    /// Max normal-trace jump over interior edges and interface edges.
    pub normal_jump: T,
}

impl<T: Real> Equilibration<T> {
    pub fn worst(&self) -> T {
        self.divergence.max(self.normal_jump)
    }
}

/// Checks `div σ = f` elementwise and normal continuity across every interior
/// edge and across the interface (against the closed-form 0D flux).
pub fn equilibration_residual<T: Real>(flux: &CoupledFlux<T>, f: T) -> Result<Equilibration<T>> {
    let field = &flux.sigma_tilde;
    let mesh = field.mesh();
    let k = field.degree();
    let rule = TriangleRule::<T>::with_degree(2 * k + 2);
    let line = LineRule::<T>::gauss_legendre(k + 2);
    let n_pts = line.len();

    // per triangle: divergence defect and normal traces at the check points of
    // each edge (ordered along the global edge orientation)
    let per_element: Vec<(T, Vec<T>)> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| -> Result<(T, Vec<T>)> {
            let el = field.element(t)?;
            let c = field.element_coeffs(t);
            let map = ElementMap::new(mesh.triangle_points(t));
            let det = map.det.abs();
            let (mut num, mut den) = (T::zero(), T::zero());
            for (q, &w) in rule.weights.iter().enumerate() {
                let x = map.map(rule.points[q]);
                let d = el.evaluate_divergence(c, x) - f;
                num += w * det * d * d;
                den += w * det * f * f;
            }
            let div = if den > T::zero() {
                (num / den).sqrt()
            } else {
                num.sqrt()
            };
            let mut traces = Vec::with_capacity(3 * n_pts);
            for e in mesh.triangle_edges(t) {
                let [a, b] = mesh.edge(e);
                let (pa, pb) = (mesh.vertex(a.min(b)), mesh.vertex(a.max(b)));
                let tan = pb - pa;
                let n = Vec2::new(tan.y, -tan.x) * (T::one() / tan.norm());
                for &g in &line.points {
                    traces.push(el.evaluate(c, pa + tan * g).dot(n));
                }
            }
            Ok((div, traces))
        })
        .collect::<Result<_>>()?;

    let divergence = per_element.iter().fold(T::zero(), |m, (d, _)| m.max(*d));
    let local_edge = |t: usize, e: usize| {
        mesh.triangle_edges(t)
            .iter()
            .position(|&x| x == e)
            .expect("edge of triangle")
    };
    let mut normal_jump = T::zero();
    for e in 0..mesh.n_edges() {
        let [t0, t1] = mesh.edge_triangles(e);
        let i0 = local_edge(t0, e);
        let tr0 = &per_element[t0].1[i0 * n_pts..(i0 + 1) * n_pts];
        if t1 != NO_TRIANGLE {
            let i1 = local_edge(t1, e);
            let tr1 = &per_element[t1].1[i1 * n_pts..(i1 + 1) * n_pts];
            for (a, b) in tr0.iter().zip(tr1) {
                normal_jump = normal_jump.max((*a - *b).abs());
            }
        } else if mesh.edge_label(e) == Some(BoundaryLabel::Interface) {
            let [a, b] = mesh.edge(e);
            let (pa, pb) = (mesh.vertex(a.min(b)), mesh.vertex(a.max(b)));
            let tan = pb - pa;
            let n = Vec2::new(tan.y, -tan.x) * (T::one() / tan.norm());
            for (j, &g) in line.points.iter().enumerate() {
                let s0 = flux.sigma_prime(pa + tan * g).dot(n);
                normal_jump = normal_jump.max((tr0[j] - s0).abs());
            }
        }
    }
    Ok(Equilibration {
        divergence,
        normal_jump,
    })
}
