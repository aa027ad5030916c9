//! Fine full-channel solutions used to measure the true error, and their
//! on-disk cache.
//!
//! Field files hold the polynomial degree and DoF count, the channel
//! parameters, then one `%.17g` coefficient per line in the DoF numbering of
//! [`LagrangeSpace`] on the accompanying mesh file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{energy_norm_error, solve_coupled, CoupledSolution, LagrangeSpace, ScalarField};
use crate::format::format_g17;
use crate::geometry::ChannelGeometry;
use crate::linsolve::LinearSolver;
use crate::mesh::{read_mesh, refine_to_size_field, triangulate_max_diameter, write_mesh, RefineOptions, TriMesh};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceConfig<T> {
    /// Largest element diameter away from the corners.
    pub h: T,
    pub degree: usize,
    /// Within `R` of a reentrant corner sizes shrink like `h (r/R)^grading`.
    pub grading: Option<T>,
}

impl<T: Real> Default for ReferenceConfig<T> {
    fn default() -> Self {
        Self {
            h: T::lit(0.005),
            degree: 2,
            grading: Some(T::lit(0.5)),
        }
    }
}

/// Mesh of the whole channel for a reference solution.
pub fn reference_mesh<T: Real>(geom: &ChannelGeometry<T>, cfg: &ReferenceConfig<T>) -> Result<TriMesh<T>> {
    let base = triangulate_max_diameter(&geom.boundary, cfg.h)?;
    let Some(mu) = cfg.grading else {
        return Ok(base);
    };
    let corners = geom.boundary.reentrant_corners();
    let r = geom.r;
    refine_to_size_field(
        &base,
        |p| {
            let d = corners.iter().map(|&c| (p - c).norm()).fold(T::infinity(), T::min);
            cfg.h * (d / r).min(T::one()).powf(mu)
        },
        RefineOptions {
            h_floor: T::lit(1e-7),
            max_elements: 8_000_000,
        },
    )
}

pub fn compute_reference<T: Real>(
    geom: &ChannelGeometry<T>,
    cfg: &ReferenceConfig<T>,
    solver: LinearSolver,
) -> Result<CoupledSolution<T>> {
    let mesh = Arc::new(reference_mesh(geom, cfg)?);
    log::info!(
        "reference mesh: {} triangles, h_max {}",
        mesh.n_triangles(),
        mesh.h_max()
    );
    solve_coupled(geom, None, mesh, cfg.degree, solver)
}

/// `‖∇(u_ref - u_h^c)‖` over the channel.
pub fn error_against<T: Real>(coupled: &CoupledSolution<T>, reference: &CoupledSolution<T>) -> Result<T> {
    if reference.interface.is_some() {
        return Err(Error::InvalidParameter(
            "a reference must cover the whole channel".into(),
        ));
    }
    energy_norm_error(coupled, &reference.field, 2 * reference.space().degree() + 2)
}

pub fn write_field<T: Real, W: Write>(geom: &ChannelGeometry<T>, field: &ScalarField<T>, mut out: W) -> Result<()> {
    writeln!(out, "{} {}", field.space().degree(), field.coeffs().len())?;
    let params = [geom.l, geom.r, geom.w, geom.l_out, geom.u_av].map(|v| format_g17(v.as_f64()));
    writeln!(out, "{}", params.join(" "))?;
    for c in field.coeffs() {
        writeln!(out, "{}", format_g17(c.as_f64()))?;
    }
    Ok(())
}

/// Reads a field written by [`write_field`] onto `mesh`, returning the
/// channel parameters stored with it.
pub fn read_field<T: Real, R: BufRead>(
    mesh: Arc<TriMesh<T>>,
    input: R,
) -> Result<(ChannelGeometry<T>, ScalarField<T>)> {
    let mut lines = input.lines().enumerate();
    let mut next = || -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => Ok((i + 1, l?)),
            None => Err(Error::Parse {
                line: 0,
                message: "unexpected end of field file".into(),
            }),
        }
    };
    fn nums(line: usize, s: &str, n: usize) -> Result<Vec<f64>> {
        let v: Vec<f64> = s
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        if v.len() != n {
            return Err(Error::Parse {
                line,
                message: format!("expected {n} numbers, found {}", v.len()),
            });
        }
        Ok(v)
    }
    let (no, head) = next()?;
    let head = nums(no, &head, 2)?;
    let (degree, n) = (head[0] as usize, head[1] as usize);
    let (no, params) = next()?;
    let p = nums(no, &params, 5)?.into_iter().map(T::lit).collect::<Vec<_>>();
    let geom = ChannelGeometry::new(p[0], p[1], p[2], p[3], p[4])?;
    let mut coeffs = Vec::with_capacity(n);
    for _ in 0..n {
        let (no, line) = next()?;
        coeffs.push(T::lit(nums(no, &line, 1)?[0]));
    }
    let space = Arc::new(LagrangeSpace::new(mesh, degree)?);
    Ok((geom, ScalarField::new(space, coeffs)?))
}

fn cache_paths<T: Real>(dir: &Path, cfg: &ReferenceConfig<T>) -> (PathBuf, PathBuf) {
    let grading = cfg.grading.map_or("none".to_string(), |g| format_g17(g.as_f64()));
    let stem = format!("reference_h{}_k{}_g{}", format_g17(cfg.h.as_f64()), cfg.degree, grading);
    (dir.join(format!("{stem}.mesh")), dir.join(format!("{stem}.field")))
}

pub fn save_reference<T: Real>(reference: &CoupledSolution<T>, mesh_path: &Path, field_path: &Path) -> Result<()> {
    let mut m = BufWriter::new(File::create(mesh_path)?);
    write_mesh(reference.mesh().as_ref(), &mut m)?;
    m.flush()?;
    let mut f = BufWriter::new(File::create(field_path)?);
    write_field(&reference.geometry, &reference.field, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_reference<T: Real>(mesh_path: &Path, field_path: &Path) -> Result<CoupledSolution<T>> {
    let mesh = Arc::new(read_mesh(BufReader::new(File::open(mesh_path)?))?);
    let (geometry, field) = read_field(mesh, BufReader::new(File::open(field_path)?))?;
    Ok(CoupledSolution {
        geometry,
        interface: None,
        field,
    })
}

fn same_channel<T: Real>(a: &ChannelGeometry<T>, b: &ChannelGeometry<T>) -> bool {
    [a.l - b.l, a.r - b.r, a.w - b.w, a.l_out - b.l_out, a.u_av - b.u_av]
        .iter()
        .all(|d| d.abs() <= T::lit(1e-14) * (T::one() + a.l))
}

/// Loads the reference from `dir` if a matching one is cached there,
/// otherwise computes and stores it.
pub fn cached_reference<T: Real>(
    geom: &ChannelGeometry<T>,
    cfg: &ReferenceConfig<T>,
    dir: &Path,
    solver: LinearSolver,
) -> Result<CoupledSolution<T>> {
    let (mesh_path, field_path) = cache_paths(dir, cfg);
    if mesh_path.exists() && field_path.exists() {
        match load_reference::<T>(&mesh_path, &field_path) {
            Ok(r) if same_channel(&r.geometry, geom) => {
                log::info!("loaded reference from {}", field_path.display());
                return Ok(r);
            }
            Ok(_) => log::warn!("cached reference in {} is for another channel", dir.display()),
            Err(e) => log::warn!("ignoring unreadable cached reference: {e}"),
        }
    }
    let r = compute_reference(geom, cfg, solver)?;
    std::fs::create_dir_all(dir)?;
    save_reference(&r, &mesh_path, &field_path)?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::InterfaceConfig;
    use crate::mesh::triangulate;

    #[test]
    fn graded_mesh_is_finer_at_the_corners() {
        let g = ChannelGeometry::<f64>::benchmark();
        let cfg = ReferenceConfig {
            h: 0.1,
            degree: 2,
            grading: Some(0.5),
        };
        let m = reference_mesh(&g, &cfg).unwrap();
        let corner = crate::point::Vec2::new(g.l, 0.0);
        let near = (0..m.n_triangles())
            .filter(|&t| (m.centroid(t) - corner).norm() < 0.02)
            .map(|t| m.diameter(t))
            .fold(f64::INFINITY, f64::min);
        assert!(near < 0.02, "{near}");
        assert!(m.h_max() <= 0.1 + 1e-12);
        assert!((m.total_area() - g.area()).abs() < 1e-12);
    }

    #[test]
    fn field_round_trip_and_cache() {
        let g = ChannelGeometry::<f64>::benchmark();
        let cfg = ReferenceConfig {
            h: 0.2,
            degree: 2,
            grading: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let a = cached_reference(&g, &cfg, dir.path(), LinearSolver::Cholesky).unwrap();
        let b = cached_reference(&g, &cfg, dir.path(), LinearSolver::Cholesky).unwrap();
        assert_eq!(a.field.coeffs(), b.field.coeffs());
        assert_eq!(a.mesh().vertices(), b.mesh().vertices());
        // a different channel is not served from the cache
        let g2 = g.with_u_av(2.0);
        let c = cached_reference(&g2, &cfg, dir.path(), LinearSolver::Cholesky).unwrap();
        assert!((c.field.coeffs()[7] - 2.0 * a.field.coeffs()[7]).abs() < 1e-12);
    }

    #[test]
    fn error_shrinks_with_the_mesh() {
        let g = ChannelGeometry::<f64>::benchmark();
        let reference = compute_reference(
            &g,
            &ReferenceConfig {
                h: 0.05,
                degree: 2,
                grading: Some(0.5),
            },
            LinearSolver::Cholesky,
        )
        .unwrap();
        let i = InterfaceConfig::new(&g, 3.0).unwrap();
        let errs: Vec<f64> = [0.4, 0.2]
            .iter()
            .map(|&h| {
                let mesh = Arc::new(triangulate(&g.fe_polygon(Some(&i)), h).unwrap());
                let c = solve_coupled(&g, Some(i), mesh, 2, LinearSolver::Cholesky).unwrap();
                error_against(&c, &reference).unwrap()
            })
            .collect();
        assert!(errs[1] < errs[0], "{errs:?}");
        assert!(error_against(&reference, &reference).unwrap() < 1e-10);
    }
}
