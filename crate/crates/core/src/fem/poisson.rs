//! Assembly and solution of `-Δu = f` with Dirichlet data on every boundary
//! edge.

use std::sync::Arc;

use rayon::prelude::*;

use super::field::ScalarField;
use super::space::LagrangeSpace;
use crate::error::{Error, Result};
use crate::geometry::BoundaryLabel;
use crate::linsolve::{solve_spd, CsrMatrix, LinearSolver};
use crate::point::Vec2;
use crate::quadrature::TriangleRule;
use crate::scalar::Real;

const NOT_FREE: usize = usize::MAX;
const CHUNK: usize = 4096;

/// Element stiffness matrix (row-major) and load vector for a constant source.
fn element_system<T: Real>(
    space: &LagrangeSpace<T>,
    t: usize,
    rule: &TriangleRule<T>,
    tab: &super::element::Tabulation<T>,
    f: T,
) -> (Vec<T>, Vec<T>) {
    let n = space.n_local();
    let map = space.element_map(t);
    let det = map.det.abs();
    let mut k = vec![T::zero(); n * n];
    let mut load = vec![T::zero(); n];
    for (q, &w) in rule.weights.iter().enumerate() {
        let wq = w * det;
        let grads: Vec<Vec2<T>> = tab.gradients[q].iter().map(|&g| map.push_gradient(g)).collect();
        for i in 0..n {
            load[i] += wq * f * tab.values[q][i];
            for j in i..n {
                k[i * n + j] += wq * grads[i].dot(grads[j]);
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            k[i * n + j] = k[j * n + i];
        }
    }
    (k, load)
}

/// Linear system after Dirichlet elimination.
struct ReducedSystem {
    matrix: CsrMatrix,
    rhs: Vec<f64>,
    free: Vec<usize>,
}

fn assemble<T: Real>(space: &LagrangeSpace<T>, f: T, dirichlet: &[Option<T>]) -> Result<ReducedSystem> {
    let mesh = space.mesh();
    let n_dofs = space.n_dofs();
    let mut free = vec![NOT_FREE; n_dofs];
    let mut n_free = 0;
    for d in 0..n_dofs {
        if dirichlet[d].is_none() {
            free[d] = n_free;
            n_free += 1;
        }
    }

    // sparsity: rows of free DoFs, columns of free DoFs sharing an element
    let mut dof_elems_ptr = vec![0usize; n_dofs + 1];
    for t in 0..mesh.n_triangles() {
        for &d in space.element_dofs(t) {
            dof_elems_ptr[d + 1] += 1;
        }
    }
    for d in 0..n_dofs {
        dof_elems_ptr[d + 1] += dof_elems_ptr[d];
    }
    let mut next = dof_elems_ptr.clone();
    let mut dof_elems = vec![0usize; dof_elems_ptr[n_dofs]];
    for t in 0..mesh.n_triangles() {
        for &d in space.element_dofs(t) {
            dof_elems[next[d]] = t;
            next[d] += 1;
        }
    }
    let mut row_ptr = Vec::with_capacity(n_free + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    let mut scratch = Vec::new();
    for d in 0..n_dofs {
        if free[d] == NOT_FREE {
            continue;
        }
        scratch.clear();
        for &t in &dof_elems[dof_elems_ptr[d]..dof_elems_ptr[d + 1]] {
            scratch.extend(
                space
                    .element_dofs(t)
                    .iter()
                    .map(|&c| free[c])
                    .filter(|&c| c != NOT_FREE),
            );
        }
        scratch.sort_unstable();
        scratch.dedup();
        col_idx.extend_from_slice(&scratch);
        row_ptr.push(col_idx.len());
    }
    drop(dof_elems);

    let degree = space.degree();
    let rule = TriangleRule::<T>::with_degree(2 * degree);
    let tab = space.element().tabulate(&rule.points);
    let mut values = vec![0.0f64; col_idx.len()];
    let mut rhs = vec![0.0f64; n_free];
    let n = space.n_local();
    let n_tri = mesh.n_triangles();
    for start in (0..n_tri).step_by(CHUNK) {
        let end = (start + CHUNK).min(n_tri);
        let blocks: Vec<_> = (start..end)
            .into_par_iter()
            .map(|t| element_system(space, t, &rule, &tab, f))
            .collect();
        for (t, (k, load)) in (start..end).zip(blocks) {
            let dofs = space.element_dofs(t);
            for i in 0..n {
                let r = free[dofs[i]];
                if r == NOT_FREE {
                    continue;
                }
                rhs[r] += load[i].as_f64();
                let row = &col_idx[row_ptr[r]..row_ptr[r + 1]];
                for j in 0..n {
                    let kij = k[i * n + j].as_f64();
                    match dirichlet[dofs[j]] {
                        Some(g) => rhs[r] -= kij * g.as_f64(),
                        None => {
                            let c = free[dofs[j]];
                            let pos = row.binary_search(&c).expect("pattern contains element couplings");
                            values[row_ptr[r] + pos] += kij;
                        }
                    }
                }
            }
        }
    }
    let matrix = CsrMatrix::from_raw(n_free, n_free, row_ptr, col_idx, values)?;
    Ok(ReducedSystem { matrix, rhs, free })
}

/// Galerkin solution of `-Δu = f` with `u = g(x, label)` at every boundary
/// DoF (nodal interpolation of the data).
pub fn solve_poisson<T: Real>(
    space: &Arc<LagrangeSpace<T>>,
    f: T,
    g: impl Fn(Vec2<T>, BoundaryLabel) -> T,
    solver: LinearSolver,
) -> Result<ScalarField<T>> {
    let n_dofs = space.n_dofs();
    let dirichlet: Vec<Option<T>> = (0..n_dofs)
        .map(|d| space.dof_label(d).map(|label| g(space.dof_point(d), label)))
        .collect();
    let sys = assemble(space, f, &dirichlet)?;
    let x = solve_spd(&sys.matrix, &sys.rhs, solver)?;

    let b_max = sys.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let r = sys.matrix.mul_vec(&x);
    let res = r.iter().zip(&sys.rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    log::debug!(
        "Poisson solve: {} free DoFs, {} nonzeros, residual {res:e} (|b| = {b_max:e})",
        sys.matrix.n_rows(),
        sys.matrix.nnz()
    );
    if res > 1e-10 * b_max {
        return Err(Error::NotConverged {
            iterations: 0,
            residual: res / b_max,
        });
    }

    let coeffs = (0..n_dofs)
        .map(|d| match dirichlet[d] {
            Some(v) => v,
            None => T::lit(x[sys.free[d]]),
        })
        .collect();
    ScalarField::new(space.clone(), coeffs)
}

/// `∫ f ψ^a - ∇u·∇ψ^a` for every mesh vertex `a`. Vanishes (up to rounding)
/// at interior vertices for the Galerkin solution.
pub fn hat_residuals<T: Real>(u: &ScalarField<T>, f: T) -> Vec<T> {
    let space = u.space();
    let mesh = space.mesh();
    let rule = TriangleRule::<T>::with_degree(2 * space.degree());
    let tab = space.element().tabulate(&rule.points);
    let mut out = vec![T::zero(); mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let map = space.element_map(t);
        let det = map.det.abs();
        let grads = u.element_gradients(t, &tab);
        // hat gradients are constant on the element
        let hat_ref = [[-T::one(), -T::one()], [T::one(), T::zero()], [T::zero(), T::one()]];
        let tri = mesh.triangle(t);
        for (v, &hr) in hat_ref.iter().enumerate() {
            let gh = map.push_gradient(hr);
            let mut acc = T::zero();
            for (q, &w) in rule.weights.iter().enumerate() {
                let p = rule.points[q];
                let lam = [T::one() - p[0] - p[1], p[0], p[1]][v];
                acc += w * det * (f * lam - grads[q].dot(gh));
            }
            out[tri[v]] += acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ChannelGeometry, InterfaceConfig};
    use crate::mesh::{triangulate, TriMesh};

    fn rectangle_space(k: usize) -> Arc<LagrangeSpace<f64>> {
        let g = ChannelGeometry::<f64>::benchmark();
        let poly = crate::geometry::LabeledPolygon::new(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, g.r),
                Vec2::new(0.0, g.r),
            ],
            vec![
                BoundaryLabel::Wall,
                BoundaryLabel::Outlet,
                BoundaryLabel::Wall,
                BoundaryLabel::Inlet,
            ],
        )
        .unwrap();
        let m = triangulate(&poly, 0.1).unwrap();
        Arc::new(LagrangeSpace::new(Arc::new(m), k).unwrap())
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let s = rectangle_space(2);
        let u = solve_poisson(&s, 0.0, |_, _| 0.0, LinearSolver::Cholesky).unwrap();
        assert!(u.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn quadratic_profile_is_exact() {
        let g = ChannelGeometry::<f64>::benchmark();
        for k in [2, 3] {
            let s = rectangle_space(k);
            let u = solve_poisson(&s, g.source(), |p, _| g.profile(p.y), LinearSolver::Cholesky).unwrap();
            for d in 0..s.n_dofs() {
                assert!((u.coeffs()[d] - g.profile(s.dof_point(d).y)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pcg_matches_direct() {
        let g = ChannelGeometry::<f64>::benchmark();
        let i = InterfaceConfig::new(&g, 4.0).unwrap();
        let m: TriMesh<f64> = triangulate(&g.fe_polygon(Some(&i)), 0.1).unwrap();
        let s = Arc::new(LagrangeSpace::new(Arc::new(m), 2).unwrap());
        let a = solve_poisson(&s, g.source(), |p, l| g.boundary_data(p, l), LinearSolver::Cholesky).unwrap();
        let b = solve_poisson(
            &s,
            g.source(),
            |p, l| g.boundary_data(p, l),
            LinearSolver::Pcg {
                rel_tol: 1e-13,
                max_iter: 20_000,
            },
        )
        .unwrap();
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((x - y).abs() < 1e-9);
        }
        // Galerkin orthogonality against interior hats
        let r = hat_residuals(&a, g.source());
        for v in 0..s.mesh().n_vertices() {
            if !s.mesh().is_boundary_vertex(v) {
                assert!(r[v].abs() < 1e-10, "vertex {v}: {}", r[v]);
            }
        }
        // positive source and nonnegative data: minimum principle
        let low = a.coeffs().iter().fold(f64::INFINITY, |m, &c| m.min(c));
        assert!(low >= -1e-12, "{low}");
    }
}
