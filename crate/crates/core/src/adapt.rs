//! Two-stage adaptivity: first move the interface towards the inlet until
//! the modeling indicator `η^Γ` is small, then refine the mesh with a size
//! field built from the discretization indicators `η^D_T` until `η` is small.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorReport};
use crate::fem::{solve_coupled, CoupledSolution};
use crate::flux::{reconstruct_flux, CoupledFlux};
use crate::geometry::{ChannelGeometry, InterfaceConfig};
use crate::linsolve::LinearSolver;
use crate::mesh::{refine_to_size_field, triangulate, Locator, RefineOptions, TriMesh};
use crate::point::Vec2;
use crate::scalar::Real;

/// How tolerances are compared against `η` and `η^Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorScale {
    Absolute,
    /// Divided by `‖∇u_h^c‖` of the current solution.
    #[default]
    Relative,
}

impl ErrorScale {
    pub fn apply<T: Real>(self, report: &EstimatorReport<T>, value: T) -> T {
        match self {
            Self::Absolute => value,
            Self::Relative => report.relative(value),
        }
    }
}

/// Element indicators that drive the size field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdaptIndicator {
    /// `η^D_T = ‖σ^D + ∇ũ‖_T`. Carries an `O(√h)` term on the layer of
    /// elements touching the interface that refinement cannot remove.
    Literal,
    /// `(Σ_a ‖σ^a + ψ^a∇ũ‖²_T)^{1/2}` over the vertex patches.
    #[default]
    PatchSum,
}

#[derive(Debug, Clone)]
pub struct AdaptiveConfig<T> {
    pub tol: T,
    pub tol_gamma: T,
    /// Step by which the interface moves towards the inlet.
    pub dx: T,
    /// Assumed local convergence order, `η_T ≈ c h_T^δ √|T|`. Defaults to
    /// the polynomial degree; `δ = 1` over-refines smooth regions for `P2`.
    pub delta: T,
    /// Error reduction requested from each new mesh.
    pub re: T,
    /// Cell side passed to the mesher for the interface search meshes.
    pub coarse_h: T,
    /// Cell side of the first mesh of the refinement loop.
    pub initial_h: T,
    pub max_iters: usize,
    /// Let the next mesh be coarser than the current one somewhere.
    pub coarsen: bool,
    pub indicator: AdaptIndicator,
    pub degree: usize,
    pub scale: ErrorScale,
    pub refine: RefineOptions<T>,
    pub solver: LinearSolver,
}

impl<T: Real> AdaptiveConfig<T> {
    pub fn new(geom: &ChannelGeometry<T>, tol: T) -> Self {
        Self {
            tol,
            tol_gamma: T::lit(0.1) * tol,
            dx: T::lit(0.1),
            delta: T::lit(2.0),
            re: T::lit(4.0),
            coarse_h: geom.r / T::lit(3.0),
            initial_h: geom.r * T::lit(2.0) / T::lit(3.0),
            max_iters: 12,
            coarsen: false,
            indicator: AdaptIndicator::default(),
            degree: 2,
            scale: ErrorScale::default(),
            refine: RefineOptions::default(),
            solver: LinearSolver::Cholesky,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.tol > T::zero()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.tol_gamma > T::zero() && self.tol_gamma < self.tol) {
            return bad(format!("tol_gamma must lie in (0, tol), got {}", self.tol_gamma));
        }
        if !(self.dx > T::zero()) {
            return bad(format!("dx must be positive, got {}", self.dx));
        }
        if !(self.delta >= T::one()) {
            return bad(format!("delta must be at least 1, got {}", self.delta));
        }
        if !(self.re > T::one()) {
            return bad(format!("re must exceed 1, got {}", self.re));
        }
        if !(self.coarse_h > T::zero() && self.initial_h > T::zero()) {
            return bad(format!(
                "coarse_h and initial_h must be positive, got {} and {}",
                self.coarse_h, self.initial_h
            ));
        }
        Ok(())
    }
}

/// A solved mesh: coupled solution, flux and indicators.
#[derive(Debug, Clone)]
pub struct Solved<T> {
    pub coupled: CoupledSolution<T>,
    pub flux: CoupledFlux<T>,
    pub report: EstimatorReport<T>,
}

/// Solves on `mesh` (a mesh of the FE part for `x_gamma`), reconstructs the
/// flux and evaluates all indicators.
pub fn solve_and_estimate<T: Real>(
    geom: &ChannelGeometry<T>,
    x_gamma: Option<T>,
    mesh: Arc<TriMesh<T>>,
    degree: usize,
    solver: LinearSolver,
) -> Result<Solved<T>> {
    let interface = x_gamma.map(|x| InterfaceConfig::new(geom, x)).transpose()?;
    let coupled = solve_coupled(geom, interface, mesh, degree, solver)?;
    let flux = reconstruct_flux(&coupled)?;
    let report = estimate(&flux, &coupled)?;
    Ok(Solved { coupled, flux, report })
}

pub fn coarse_mesh<T: Real>(geom: &ChannelGeometry<T>, x_gamma: Option<T>, h: T) -> Result<TriMesh<T>> {
    let interface = x_gamma.map(|x| InterfaceConfig::new(geom, x)).transpose()?;
    triangulate(&geom.fe_polygon(interface.as_ref()), h)
}

/// Target element sizes for the next mesh.
#[derive(Debug, Clone)]
pub struct SizeField<T> {
    mesh: Arc<TriMesh<T>>,
    locator: Locator<T>,
    pub h_opt: Vec<T>,
    /// The error the new mesh should reach under the `h^δ` model.
    pub target_error: T,
    pub eta_d: Vec<T>,
}

impl<T: Real> SizeField<T> {
    pub fn mesh(&self) -> &Arc<TriMesh<T>> {
        &self.mesh
    }

    /// Size at `p`; the smallest size when `p` cannot be located.
    pub fn size_at(&self, p: Vec2<T>) -> T {
        match self.locator.locate(&self.mesh, p) {
            Some((t, _)) => self.h_opt[t],
            None => self.h_opt.iter().copied().fold(T::infinity(), T::min),
        }
    }

    /// `Σ_T |T| / h_opt²`, proportional to the DoF count of the new mesh.
    pub fn dof_proxy(&self) -> T {
        self.mesh
            .areas()
            .iter()
            .zip(&self.h_opt)
            .map(|(&a, &h)| a / (h * h))
            .sum()
    }
}

/// Size field minimizing `Σ |T|/h²` subject to the predicted error
/// `(Σ c_T² h^{2δ} |T|)^{1/2} = η^D / re`, with `c_T = η^D_T / (h_T^δ √|T|)`.
/// Elements without error get twice their current size.
pub fn hopt_size_field<T: Real>(
    mesh: &Arc<TriMesh<T>>,
    eta_d: &[T],
    delta: T,
    re: T,
    h_floor: T,
) -> Result<SizeField<T>> {
    if eta_d.len() != mesh.n_triangles() {
        return Err(Error::InvalidParameter(format!(
            "{} indicators for {} elements",
            eta_d.len(),
            mesh.n_triangles()
        )));
    }
    if eta_d.iter().any(|&e| !(e >= T::zero()) || !e.is_finite()) {
        return Err(Error::InvalidParameter(
            "indicators must be finite and nonnegative".into(),
        ));
    }
    let h = mesh.diameters();
    let area = mesh.areas();
    let two = T::lit(2.0);
    let total = eta_d.iter().map(|&e| e * e).sum::<T>().sqrt();
    let target_error = total / re;
    let h_opt = if total == T::zero() {
        log::warn!("all discretization indicators vanish; keeping the current sizes");
        h.to_vec()
    } else {
        let d1 = delta + T::one();
        let sum: T = (0..eta_d.len())
            .filter(|&t| eta_d[t] > T::zero())
            .map(|t| eta_d[t].powf(two / d1) * h[t].powf(-two * delta / d1) * area[t].powf(delta / d1))
            .sum();
        let scale = target_error.powf(T::one() / delta) / sum.powf(T::one() / (two * delta));
        (0..eta_d.len())
            .map(|t| {
                let s = if eta_d[t] > T::zero() {
                    scale * h[t].powf(delta / d1) * area[t].powf(T::one() / (two * d1)) / eta_d[t].powf(T::one() / d1)
                } else {
                    two * h[t]
                };
                s.max(h_floor)
            })
            .collect()
    };
    Ok(SizeField {
        mesh: mesh.clone(),
        locator: Locator::new(mesh),
        h_opt,
        target_error,
        eta_d: eta_d.to_vec(),
    })
}

#[derive(Debug, Clone)]
pub struct InterfaceChoice<T> {
    /// `None` when the interface was pushed to the inlet: pure 2D model.
    pub x_gamma: Option<T>,
    pub converged: bool,
    /// `(x_gamma, η^Γ)` per step, `η^Γ` in the configured scale.
    pub trace: Vec<(T, T)>,
}

/// Starts at `x_gamma = L - R` and moves the interface by `dx` towards the
/// inlet until `η^Γ <= tol_gamma`, using coarse meshes.
pub fn choose_interface<T: Real>(geom: &ChannelGeometry<T>, config: &AdaptiveConfig<T>) -> Result<InterfaceChoice<T>> {
    config.validate()?;
    let start = geom.l - geom.r;
    let mut trace = Vec::new();
    for step in 0usize.. {
        let x = start - T::from_usize_lossy(step) * config.dx;
        if x <= T::zero() {
            log::warn!("interface reached the inlet without meeting tol_gamma");
            return Ok(InterfaceChoice {
                x_gamma: None,
                converged: false,
                trace,
            });
        }
        let mesh = Arc::new(coarse_mesh(geom, Some(x), config.coarse_h)?);
        let solved = solve_and_estimate(geom, Some(x), mesh, config.degree, config.solver)?;
        let eta_gamma = config.scale.apply(&solved.report, solved.report.eta_gamma);
        log::info!("interface {x}: eta_gamma = {eta_gamma:e}");
        trace.push((x, eta_gamma));
        if eta_gamma <= config.tol_gamma {
            return Ok(InterfaceChoice {
                x_gamma: Some(x),
                converged: true,
                trace,
            });
        }
    }
    unreachable!("the interface reaches the inlet after finitely many steps")
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun<T> {
    pub final_solution: Solved<T>,
    pub history: Vec<EstimatorReport<T>>,
    pub converged: bool,
}

/// Refines until `η <= tol` with the interface held fixed. `observe` sees
/// every solved mesh before the stopping test (e.g. to attach an error).
pub fn adaptive_solve_with<T: Real>(
    geom: &ChannelGeometry<T>,
    x_gamma: Option<T>,
    config: &AdaptiveConfig<T>,
    mut observe: impl FnMut(usize, &mut Solved<T>) -> Result<()>,
) -> Result<AdaptiveRun<T>> {
    config.validate()?;
    let coarse = coarse_mesh(geom, x_gamma, config.initial_h)?;
    let mut mesh = Arc::new(coarse.clone());
    let mut history = Vec::new();
    for iter in 0.. {
        let mut solved = solve_and_estimate(geom, x_gamma, mesh.clone(), config.degree, config.solver)?;
        observe(iter, &mut solved)?;
        let eta = config.scale.apply(&solved.report, solved.report.eta);
        log::info!(
            "iteration {iter}: {} DoF, eta = {eta:e}, {} elements",
            solved.report.n_dof,
            mesh.n_triangles()
        );
        if let Some(prev) = history
            .last()
            .map(|r: &EstimatorReport<T>| config.scale.apply(r, r.eta))
        {
            if eta >= prev {
                log::warn!("estimate did not decrease at iteration {iter}: {prev:e} -> {eta:e}");
            }
        }
        history.push(solved.report.clone());
        let done = eta <= config.tol;
        if done || iter >= config.max_iters {
            if !done {
                log::warn!(
                    "stopped after {} refinements with eta = {eta:e} > tol",
                    config.max_iters
                );
            }
            return Ok(AdaptiveRun {
                final_solution: solved,
                history,
                converged: done,
            });
        }
        let indicators = match config.indicator {
            AdaptIndicator::Literal => &solved.report.eta_d_elements,
            AdaptIndicator::PatchSum => &solved.report.eta_local_elements,
        };
        let field = hopt_size_field(&mesh, indicators, config.delta, config.re, config.refine.h_floor)?;
        let current = Locator::new(&mesh);
        let size = |p: Vec2<T>| {
            let s = field.size_at(p);
            if config.coarsen {
                return s;
            }
            current.locate(&mesh, p).map_or(s, |(t, _)| s.min(mesh.diameter(t)))
        };
        mesh = Arc::new(refine_to_size_field(&coarse, size, config.refine)?);
    }
    unreachable!()
}

pub fn adaptive_solve<T: Real>(
    geom: &ChannelGeometry<T>,
    x_gamma: Option<T>,
    config: &AdaptiveConfig<T>,
) -> Result<AdaptiveRun<T>> {
    adaptive_solve_with(geom, x_gamma, config, |_, _| Ok(()))
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope<T: Real>(points: &[(T, T)]) -> Option<T> {
    if points.len() < 2 {
        return None;
    }
    let n = T::from_usize_lossy(points.len());
    let logs: Vec<(T, T)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<T>() / n;
    let my = logs.iter().map(|p| p.1).sum::<T>() / n;
    let sxx: T = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: T = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > T::zero()).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mesh() -> Arc<TriMesh<f64>> {
        let g = ChannelGeometry::benchmark();
        Arc::new(coarse_mesh(&g, Some(4.4), 0.125).unwrap())
    }

    /// `δ = 1` written out by hand.
    fn hopt_delta_one(mesh: &TriMesh<f64>, eta: &[f64], re: f64) -> Vec<f64> {
        let h = mesh.diameters();
        let a = mesh.areas();
        let eps = eta.iter().map(|e| e * e).sum::<f64>().sqrt() / re;
        let s: f64 = (0..eta.len()).map(|t| eta[t] / h[t] * a[t].sqrt()).sum();
        (0..eta.len())
            .map(|t| eps * h[t].sqrt() * a[t].powf(0.25) / (eta[t].sqrt() * s.sqrt()))
            .collect()
    }

    #[test]
    fn uniform_indicators_shrink_by_re() {
        let g = ChannelGeometry::<f64>::benchmark();
        let m = Arc::new(triangulate(&g.boundary, 0.1).unwrap());
        // square cells: every triangle has the same size and area
        let eta = vec![0.3; m.n_triangles()];
        for delta in [1.0, 2.0] {
            let f = hopt_size_field(&m, &eta, delta, 4.0, 0.0).unwrap();
            for (t, &h) in f.h_opt.iter().enumerate() {
                let expect = m.diameter(t) / 4f64.powf(1.0 / delta);
                assert!((h - expect).abs() < 1e-12 * expect, "{h} vs {expect}");
            }
        }
    }

    #[test]
    fn delta_one_matches_general_formula() {
        let m = mesh();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let eta: Vec<f64> = (0..m.n_triangles()).map(|_| rng.gen_range(1e-6..1.0)).collect();
            let f = hopt_size_field(&m, &eta, 1.0, 4.0, 0.0).unwrap();
            for (a, b) in f.h_opt.iter().zip(hopt_delta_one(&m, &eta, 4.0)) {
                assert!((a - b).abs() < 1e-12 * b);
            }
        }
    }

    fn predicted_error(m: &TriMesh<f64>, eta: &[f64], h: &[f64], delta: f64) -> f64 {
        (0..eta.len())
            .map(|t| {
                let c = eta[t] / (m.diameter(t).powf(delta) * m.area(t).sqrt());
                c * c * h[t].powf(2.0 * delta) * m.area(t)
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn hopt_minimizes_the_dof_proxy() {
        let m = mesh();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eta: Vec<f64> = (0..m.n_triangles()).map(|_| rng.gen_range(1e-4..1.0)).collect();
        for delta in [1.0, 1.5] {
            let f = hopt_size_field(&m, &eta, delta, 4.0, 0.0).unwrap();
            let err = predicted_error(&m, &eta, &f.h_opt, delta);
            assert!((err - f.target_error).abs() < 1e-10 * err);
            let best = f.dof_proxy();
            for _ in 0..50 {
                let mut h: Vec<f64> = f.h_opt.iter().map(|&h| h * rng.gen_range(0.5..2.0)).collect();
                // rescale onto the same predicted error
                let s = (f.target_error / predicted_error(&m, &eta, &h, delta)).powf(1.0 / delta);
                h.iter_mut().for_each(|v| *v *= s);
                let proxy: f64 = (0..h.len()).map(|t| m.area(t) / (h[t] * h[t])).sum();
                assert!(proxy >= best * (1.0 - 1e-12), "{proxy} < {best}");
            }
        }
    }

    #[test]
    fn zero_indicators_keep_or_coarsen() {
        let m = mesh();
        let f = hopt_size_field(&m, &vec![0.0; m.n_triangles()], 1.0, 4.0, 1e-5).unwrap();
        assert_eq!(f.h_opt, m.diameters());
        let mut eta = vec![0.0; m.n_triangles()];
        eta[0] = 1.0;
        let f = hopt_size_field(&m, &eta, 1.0, 4.0, 1e-3).unwrap();
        assert!(f.h_opt.iter().all(|h| h.is_finite() && *h >= 1e-3));
        assert_eq!(f.h_opt[1], 2.0 * m.diameter(1));
        assert!(hopt_size_field(&m, &[1.0], 1.0, 4.0, 0.0).is_err());
    }

    #[test]
    fn corner_field_refines_near_the_corner() {
        let g = ChannelGeometry::<f64>::benchmark();
        let m = mesh();
        let corner = Vec2::new(g.l, 0.0);
        let eta: Vec<f64> = (0..m.n_triangles())
            .map(|t| (-(m.centroid(t) - corner).norm() / 0.1).exp())
            .collect();
        let f = hopt_size_field(&m, &eta, 1.0, 4.0, 1e-4).unwrap();
        let fine = refine_to_size_field(&m, |p| f.size_at(p), RefineOptions::default()).unwrap();
        let near = |mesh: &TriMesh<f64>| {
            (0..mesh.n_triangles())
                .filter(|&t| (mesh.centroid(t) - corner).norm() < g.r)
                .count()
        };
        let added = fine.n_triangles() - m.n_triangles();
        assert!(
            2 * (near(&fine) - near(&m)) >= added,
            "{} of {added}",
            near(&fine) - near(&m)
        );
    }

    #[test]
    fn config_validation() {
        let g = ChannelGeometry::<f64>::benchmark();
        let c = AdaptiveConfig::new(&g, 1e-2);
        assert!(c.validate().is_ok());
        assert!((c.tol_gamma - 1e-3).abs() < 1e-18);
        let mut bad = c.clone();
        bad.tol_gamma = 2e-2;
        assert!(bad.validate().is_err());
        let mut bad = c.clone();
        bad.re = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = c;
        bad.delta = 0.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn huge_tolerance_keeps_the_first_position() {
        let g = ChannelGeometry::<f64>::benchmark();
        let mut c = AdaptiveConfig::new(&g, 10.0);
        c.tol_gamma = 5.0;
        let choice = choose_interface(&g, &c).unwrap();
        assert!(choice.converged);
        assert_eq!(choice.trace.len(), 1);
        assert!((choice.x_gamma.unwrap() - 4.6).abs() < 1e-12);
    }

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = [10.0f64, 100.0, 1000.0]
            .iter()
            .map(|&n| (n, 3.0 * n.powf(-0.9)))
            .collect();
        assert!((log_log_slope(&pts).unwrap() + 0.9).abs() < 1e-12);
        assert!(log_log_slope(&pts[..1]).is_none());
    }
}
