//! Raviart–Thomas elements of degree `k` on physical triangles.
//!
//! The local space is spanned by `[P_k]^2` plus `x p` for homogeneous `p` of
//! degree `k`, written in scaled coordinates `s = (x - c) / h` to keep the
//! DoF matrix well conditioned. DoFs:
//!
//! * edge DoFs: normal component at the `k + 1` Gauss points of each edge,
//!   with the normal and the point order fixed by the global vertex ids
//!   (from the lower to the higher id, normal = tangent rotated clockwise),
//!   so neighbouring elements share them without sign fixes;
//! * interior DoFs: moments against `[P_{k-1}]^2`, divided by the area.

use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::fem::ElementMap;
use crate::mesh::TriMesh;
use crate::point::Vec2;
use crate::quadrature::{LineRule, TriangleRule};
use crate::scalar::Real;

/// `(a, b)` exponents of the monomials `s1^a s2^b` of total degree `<= k`.
pub(crate) fn monomials(k: usize) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for total in 0..=k as i32 {
        for b in 0..=total {
            out.push((total - b, b));
        }
    }
    out
}

/// Dimension of `RT_k` on a triangle.
pub fn rt_dim(k: usize) -> usize {
    (k + 1) * (k + 3)
}

/// Dimension of `P_k` on a triangle.
pub fn p_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

#[derive(Debug, Clone)]
pub struct RtElement<T> {
    degree: usize,
    center: Vec2<T>,
    h: T,
    /// Basis function `i` is `sum_j coeffs[(j, i)] * span_j`.
    coeffs: DenseMatrix<T>,
    monos: Vec<(i32, i32)>,
}

impl<T: Real> RtElement<T> {
    pub fn new(points: [Vec2<T>; 3], ids: [usize; 3], degree: usize) -> Result<Self> {
        let center = (points[0] + points[1] + points[2]) * T::lit(1.0 / 3.0);
        let h = (points[0] - points[1])
            .norm()
            .max((points[1] - points[2]).norm())
            .max((points[2] - points[0]).norm());
        let monos = monomials(degree);
        let mut el = Self {
            degree,
            center,
            h,
            coeffs: DenseMatrix::identity(rt_dim(degree)),
            monos,
        };
        let n = rt_dim(degree);
        let mut dof = DenseMatrix::zeros(n, n);
        let line = LineRule::<T>::gauss_legendre(degree + 1);
        let mut row = 0;
        for i in 0..3 {
            let (a, b) = (ids[(i + 1) % 3], ids[(i + 2) % 3]);
            let (lo, hi) = if a < b {
                (points[(i + 1) % 3], points[(i + 2) % 3])
            } else {
                (points[(i + 2) % 3], points[(i + 1) % 3])
            };
            let t = hi - lo;
            let normal = Vec2::new(t.y, -t.x) * (T::one() / t.norm());
            for &g in &line.points {
                let span = el.span_values(lo + t * g);
                for (j, v) in span.iter().enumerate() {
                    dof[(row, j)] = v.dot(normal);
                }
                row += 1;
            }
        }
        let map = ElementMap::new(points);
        let area = map.det.abs() * T::lit(0.5);
        let rule = TriangleRule::<T>::with_degree(2 * degree);
        let n_moments = p_dim(degree - 1);
        for (q, &w) in rule.weights.iter().enumerate() {
            let x = map.map(rule.points[q]);
            let span = el.span_values(x);
            let s = el.scaled(x);
            let wq = w * map.det.abs() / area;
            for m in 0..n_moments {
                let pm = mono(s, el.monos[m]);
                for (j, v) in span.iter().enumerate() {
                    dof[(row + 2 * m, j)] += wq * v.x * pm;
                    dof[(row + 2 * m + 1, j)] += wq * v.y * pm;
                }
            }
        }
        el.coeffs = dof.inverse()?;
        Ok(el)
    }

    /// Element `t` of `mesh`.
    pub fn for_triangle(mesh: &TriMesh<T>, t: usize, degree: usize) -> Result<Self> {
        Self::new(mesh.triangle_points(t), mesh.triangle(t), degree)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_basis(&self) -> usize {
        rt_dim(self.degree)
    }

    /// Edge DoFs come first: `(k + 1) * i + j` is Gauss point `j` of local
    /// edge `i`.
    pub fn n_edge_dofs(&self) -> usize {
        3 * (self.degree + 1)
    }

    #[inline]
    fn scaled(&self, x: Vec2<T>) -> Vec2<T> {
        (x - self.center) * (T::one() / self.h)
    }

    fn span_values(&self, x: Vec2<T>) -> Vec<Vec2<T>> {
        let s = self.scaled(x);
        let m = self.monos.len();
        let k = self.degree as i32;
        let mut out = Vec::with_capacity(rt_dim(self.degree));
        for &e in &self.monos {
            out.push(Vec2::new(mono(s, e), T::zero()));
        }
        for &e in &self.monos {
            out.push(Vec2::new(T::zero(), mono(s, e)));
        }
        for &e in &self.monos[m - (self.degree + 1)..] {
            debug_assert_eq!(e.0 + e.1, k);
            let p = mono(s, e);
            out.push(Vec2::new(s.x * p, s.y * p));
        }
        out
    }

    fn span_divergences(&self, x: Vec2<T>) -> Vec<T> {
        let s = self.scaled(x);
        let inv_h = T::one() / self.h;
        let m = self.monos.len();
        let mut out = Vec::with_capacity(rt_dim(self.degree));
        for &(a, b) in &self.monos {
            out.push(if a == 0 {
                T::zero()
            } else {
                T::from_usize_lossy(a as usize) * mono(s, (a - 1, b)) * inv_h
            });
        }
        for &(a, b) in &self.monos {
            out.push(if b == 0 {
                T::zero()
            } else {
                T::from_usize_lossy(b as usize) * mono(s, (a, b - 1)) * inv_h
            });
        }
        let factor = T::from_usize_lossy(self.degree + 2) * inv_h;
        for &e in &self.monos[m - (self.degree + 1)..] {
            out.push(factor * mono(s, e));
        }
        out
    }

    /// Basis values at a physical point.
    pub fn values(&self, x: Vec2<T>) -> Vec<Vec2<T>> {
        let span = self.span_values(x);
        let n = self.n_basis();
        (0..n)
            .map(|i| {
                let mut acc = Vec2::zero();
                for (j, v) in span.iter().enumerate() {
                    acc += *v * self.coeffs[(j, i)];
                }
                acc
            })
            .collect()
    }

    /// Basis divergences at a physical point.
    pub fn divergences(&self, x: Vec2<T>) -> Vec<T> {
        self.coeffs.transpose_mul_vec(&self.span_divergences(x))
    }

    /// Broken `P_k` pressure basis (scaled monomials) at a physical point.
    pub fn pressure_values(&self, x: Vec2<T>) -> Vec<T> {
        let s = self.scaled(x);
        self.monos.iter().map(|&e| mono(s, e)).collect()
    }

    /// Field value for local coefficients `c`.
    pub fn evaluate(&self, c: &[T], x: Vec2<T>) -> Vec2<T> {
        self.values(x)
            .into_iter()
            .zip(c)
            .fold(Vec2::zero(), |acc, (v, &ci)| acc + v * ci)
    }

    pub fn evaluate_divergence(&self, c: &[T], x: Vec2<T>) -> T {
        self.divergences(x).into_iter().zip(c).map(|(d, &ci)| d * ci).sum()
    }
}

#[inline]
fn mono<T: Real>(s: Vec2<T>, (a, b): (i32, i32)) -> T {
    s.x.powi(a) * s.y.powi(b)
}

/// Physical Gauss points of mesh edge `e`, ordered from its lower to its
/// higher vertex id, and its unit normal.
pub fn edge_gauss_points<T: Real>(mesh: &TriMesh<T>, e: usize, degree: usize) -> (Vec<Vec2<T>>, Vec2<T>) {
    let [lo, hi] = mesh.edge(e);
    let (a, b) = (mesh.vertex(lo.min(hi)), mesh.vertex(lo.max(hi)));
    let t = b - a;
    let line = LineRule::<T>::gauss_legendre(degree + 1);
    let pts = line.points.iter().map(|&g| a + t * g).collect();
    (pts, Vec2::new(t.y, -t.x) * (T::one() / t.norm()))
}
