//! Error estimators built from the equilibrated flux.
//!
//! * `η = ‖σ + ∇u‖` over the channel. On the 0D part `σ' = -∇u'`, so only
//!   the FE part contributes.
//! * `η^Γ = ‖σ^Γ + ψ^Γ_h ∇ũ‖` over the interface patch: the modeling part.
//! * `η^D_T = ‖σ^D + ∇ũ‖_T` with the unweighted vertex-patch sum `σ^D`:
//!   the discretization part.
//! * the per-patch residual sum over the vertex patches, the default driver
//!   of mesh adaptation (see [`crate::adapt::AdaptIndicator`]).

use rayon::prelude::*;

use crate::error::Result;
use crate::fem::{solution_energy_norm, CoupledSolution, ElementMap, ScalarField};
use crate::flux::{BrokenRtField, CoupledFlux};
use crate::quadrature::TriangleRule;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct EstimatorReport<T> {
    pub eta: T,
    pub eta_gamma: T,
    /// `(Σ_T (η^D_T)²)^{1/2}`.
    pub eta_d: T,
    pub eta_d_elements: Vec<T>,
    /// `(Σ_a ‖σ^a + ψ^a∇ũ‖²_T)^{1/2}` over the vertex patches: a
    /// discretization indicator without the interface-layer term of `η^D_T`.
    pub eta_local_elements: Vec<T>,
    /// `‖σ̃ + ∇ũ‖_T`, the local density of `η`.
    pub eta_elements: Vec<T>,
    /// Energy error against a reference, when one is available.
    pub error: Option<T>,
    pub n_dof: usize,
    pub x_gamma: Option<T>,
    pub h_max: T,
    /// `‖∇u_h^c‖` over the channel, the scale for relative quantities.
    pub solution_norm: T,
}

impl<T: Real> EstimatorReport<T> {
    /// `value / ‖∇u_h^c‖`; unchanged when the solution vanishes.
    pub fn relative(&self, value: T) -> T {
        if self.solution_norm > T::zero() {
            value / self.solution_norm
        } else {
            value
        }
    }

    pub fn effectivity(&self) -> Option<T> {
        self.error.and_then(|e| effectivity(e, self.eta))
    }

    /// Attaches an error value. Logs a warning when the estimate falls below
    /// it, which can only come from an inaccurate reference.
    pub fn with_error(mut self, error: T) -> Self {
        if self.eta < error {
            log::warn!(
                "estimate {} below error {} (x_gamma = {:?})",
                self.eta,
                error,
                self.x_gamma
            );
        }
        self.error = Some(error);
        self
    }
}

/// `η / e`, absent for `e = 0`.
pub fn effectivity<T: Real>(error: T, eta: T) -> Option<T> {
    (error > T::zero()).then(|| eta / error)
}

/// Squared local norms of `a + s ∇u` for each triangle, with `s` given by a
/// per-triangle linear weight (`None` for `s = 1`).
fn squared_norms<T: Real>(
    field: &BrokenRtField<T>,
    u: &ScalarField<T>,
    elements: &[usize],
    weight: Option<&(dyn Fn(usize) -> [T; 3] + Sync)>,
) -> Result<Vec<T>> {
    let space = u.space();
    let k = space.degree();
    let rule = TriangleRule::<T>::with_degree(2 * k + 2);
    let tab = space.element().tabulate(&rule.points);
    let mesh = space.mesh();
    elements
        .par_iter()
        .map(|&t| {
            let el = field.element(t)?;
            let c = field.element_coeffs(t);
            let map = ElementMap::new(mesh.triangle_points(t));
            let det = map.det.abs();
            let grads = u.element_gradients(t, &tab);
            let w = weight.map(|f| f(t));
            let mut acc = T::zero();
            for (q, &wq) in rule.weights.iter().enumerate() {
                let xi = rule.points[q];
                let s = match w {
                    Some(w) => w[0] * (T::one() - xi[0] - xi[1]) + w[1] * xi[0] + w[2] * xi[1],
                    None => T::one(),
                };
                let v = el.evaluate(c, map.map(xi)) + grads[q] * s;
                acc += wq * det * v.norm_squared();
            }
            Ok(acc)
        })
        .collect()
}

fn all_elements<T: Real>(u: &ScalarField<T>) -> Vec<usize> {
    (0..u.space().mesh().n_triangles()).collect()
}

/// `‖σ_h^c + ∇u_h^c‖` over the channel.
pub fn eta_total<T: Real>(flux: &CoupledFlux<T>, coupled: &CoupledSolution<T>) -> Result<T> {
    let sq = squared_norms(&flux.sigma_tilde, &coupled.field, &all_elements(&coupled.field), None)?;
    // the 0D part adds nothing: σ' + ∇u' vanishes identically
    Ok(sq.into_iter().sum::<T>().sqrt())
}

/// `‖σ^Γ + ψ^Γ_h ∇ũ‖` over the interface patch; zero without an interface.
pub fn eta_gamma<T: Real>(flux: &CoupledFlux<T>, u: &ScalarField<T>) -> Result<T> {
    let Some(sigma_gamma) = &flux.sigma_gamma else {
        return Ok(T::zero());
    };
    let mesh = u.space().mesh();
    let weights = |t: usize| mesh.triangle(t).map(|v| flux.classification.weights[v]);
    let sq = squared_norms(sigma_gamma, u, &flux.gamma_elements, Some(&weights))?;
    Ok(sq.into_iter().sum::<T>().sqrt())
}

/// `η^D_T` for every triangle, and `η^D`.
pub fn eta_d_per_element<T: Real>(flux: &CoupledFlux<T>, u: &ScalarField<T>) -> Result<(Vec<T>, T)> {
    let sq = squared_norms(&flux.sigma_d, u, &all_elements(u), None)?;
    let total = sq.iter().copied().sum::<T>().sqrt();
    Ok((sq.into_iter().map(|v| v.sqrt()).collect(), total))
}

/// All estimators for a coupled solution and its flux.
pub fn estimate<T: Real>(flux: &CoupledFlux<T>, coupled: &CoupledSolution<T>) -> Result<EstimatorReport<T>> {
    let u = &coupled.field;
    let sq = squared_norms(&flux.sigma_tilde, u, &all_elements(u), None)?;
    let eta = sq.iter().copied().sum::<T>().sqrt();
    let eta_elements = sq.into_iter().map(|v| v.sqrt()).collect();
    let eta_gamma = eta_gamma(flux, u)?;
    let (eta_d_elements, eta_d) = eta_d_per_element(flux, u)?;
    Ok(EstimatorReport {
        eta,
        eta_gamma,
        eta_d,
        eta_d_elements,
        eta_local_elements: flux.patch_residuals.iter().map(|v| v.sqrt()).collect(),
        eta_elements,
        error: None,
        n_dof: coupled.n_dofs(),
        x_gamma: coupled.interface.map(|i| i.x_gamma),
        h_max: coupled.mesh().h_max(),
        solution_norm: solution_energy_norm(coupled),
    })
}
