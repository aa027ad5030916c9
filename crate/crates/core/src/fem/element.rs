//! Reference Lagrange element and the affine element map.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::point::Vec2;
use crate::scalar::Real;

/// Affine map from the reference triangle `(0,0), (1,0), (0,1)`.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap<T> {
    pub origin: Vec2<T>,
    /// Columns are the edge vectors `p1 - p0` and `p2 - p0`.
    pub jac: [[T; 2]; 2],
    pub det: T,
}

impl<T: Real> ElementMap<T> {
    pub fn new(p: [Vec2<T>; 3]) -> Self {
        let e1 = p[1] - p[0];
        let e2 = p[2] - p[0];
        let jac = [[e1.x, e2.x], [e1.y, e2.y]];
        Self {
            origin: p[0],
            jac,
            det: e1.x * e2.y - e2.x * e1.y,
        }
    }

    #[inline]
    pub fn map(&self, xi: [T; 2]) -> Vec2<T> {
        Vec2::new(
            self.origin.x + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin.y + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        )
    }

    /// Reference coordinates of a physical point.
    #[inline]
    pub fn inverse(&self, p: Vec2<T>) -> [T; 2] {
        let d = p - self.origin;
        [
            (self.jac[1][1] * d.x - self.jac[0][1] * d.y) / self.det,
            (-self.jac[1][0] * d.x + self.jac[0][0] * d.y) / self.det,
        ]
    }

    /// Physical gradient from a reference gradient, `J^{-T} g`.
    #[inline]
    pub fn push_gradient(&self, g: [T; 2]) -> Vec2<T> {
        let j = &self.jac;
        Vec2::new(
            (j[1][1] * g[0] - j[1][0] * g[1]) / self.det,
            (-j[0][1] * g[0] + j[0][0] * g[1]) / self.det,
        )
    }
}

/// Basis values and reference gradients at a set of reference points.
#[derive(Debug, Clone)]
pub struct Tabulation<T> {
    pub values: Vec<Vec<T>>,
    pub gradients: Vec<Vec<[T; 2]>>,
}

/// Nodal `P_k` element on the reference triangle.
///
/// Node order: the three vertices, then `k - 1` nodes per edge (edge `i` is
/// opposite vertex `i` and is traversed from vertex `i + 1` to `i + 2`),
/// then interior nodes.
#[derive(Debug, Clone)]
pub struct LagrangeElement<T> {
    degree: usize,
    nodes: Vec<[T; 2]>,
    exponents: Vec<(i32, i32)>,
    /// Column `j` holds the monomial coefficients of basis function `j`.
    coeffs: DenseMatrix<T>,
}

pub(crate) fn monomial_exponents(k: usize) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for total in 0..=k as i32 {
        for b in 0..=total {
            out.push((total - b, b));
        }
    }
    out
}

impl<T: Real> LagrangeElement<T> {
    pub fn new(degree: usize) -> Result<Self> {
        if !(1..=3).contains(&degree) {
            return Err(Error::UnsupportedDegree(degree));
        }
        let k = T::from_usize_lossy(degree);
        let verts = [[T::zero(), T::zero()], [T::one(), T::zero()], [T::zero(), T::one()]];
        let mut nodes: Vec<[T; 2]> = verts.to_vec();
        for i in 0..3 {
            let a = verts[(i + 1) % 3];
            let b = verts[(i + 2) % 3];
            for j in 1..degree {
                let t = T::from_usize_lossy(j) / k;
                nodes.push([a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]);
            }
        }
        for j in 1..degree {
            for i in 1..degree {
                if i + j < degree {
                    nodes.push([T::from_usize_lossy(i) / k, T::from_usize_lossy(j) / k]);
                }
            }
        }
        let exponents = monomial_exponents(degree);
        let n = exponents.len();
        debug_assert_eq!(nodes.len(), n);
        let vander = DenseMatrix::from_fn(n, n, |i, m| {
            let (a, b) = exponents[m];
            nodes[i][0].powi(a) * nodes[i][1].powi(b)
        });
        let coeffs = vander.inverse()?;
        Ok(Self {
            degree,
            nodes,
            exponents,
            coeffs,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_basis(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[T; 2]] {
        &self.nodes
    }

    pub fn n_interior(&self) -> usize {
        (self.degree - 1) * self.degree.saturating_sub(2) / 2
    }

    pub fn values(&self, xi: [T; 2]) -> Vec<T> {
        let mono: Vec<T> = self
            .exponents
            .iter()
            .map(|&(a, b)| xi[0].powi(a) * xi[1].powi(b))
            .collect();
        self.coeffs.transpose_mul_vec(&mono)
    }

    pub fn gradients(&self, xi: [T; 2]) -> Vec<[T; 2]> {
        let dx: Vec<T> = self
            .exponents
            .iter()
            .map(|&(a, b)| {
                if a == 0 {
                    T::zero()
                } else {
                    T::from_usize_lossy(a as usize) * xi[0].powi(a - 1) * xi[1].powi(b)
                }
            })
            .collect();
        let dy: Vec<T> = self
            .exponents
            .iter()
            .map(|&(a, b)| {
                if b == 0 {
                    T::zero()
                } else {
                    T::from_usize_lossy(b as usize) * xi[0].powi(a) * xi[1].powi(b - 1)
                }
            })
            .collect();
        let gx = self.coeffs.transpose_mul_vec(&dx);
        let gy = self.coeffs.transpose_mul_vec(&dy);
        gx.into_iter().zip(gy).map(|(a, b)| [a, b]).collect()
    }

    pub fn tabulate(&self, points: &[[T; 2]]) -> Tabulation<T> {
        Tabulation {
            values: points.iter().map(|&p| self.values(p)).collect(),
            gradients: points.iter().map(|&p| self.gradients(p)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodal_basis_is_kronecker() {
        for k in 1..=3 {
            let e = LagrangeElement::<f64>::new(k).unwrap();
            assert_eq!(e.n_basis(), (k + 1) * (k + 2) / 2);
            for (i, &node) in e.nodes().iter().enumerate() {
                let v = e.values(node);
                for (j, &vj) in v.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((vj - expect).abs() < 1e-12, "k = {k}, node {i}, basis {j}");
                }
            }
        }
        assert!(LagrangeElement::<f64>::new(0).is_err());
        assert!(LagrangeElement::<f64>::new(4).is_err());
    }

    #[test]
    fn basis_sums_to_one_and_gradients_to_zero() {
        let e = LagrangeElement::<f64>::new(2).unwrap();
        for xi in [[0.1, 0.2], [0.7, 0.1], [0.3, 0.3]] {
            assert!((e.values(xi).iter().sum::<f64>() - 1.0).abs() < 1e-13);
            let g = e.gradients(xi);
            assert!(g.iter().map(|g| g[0]).sum::<f64>().abs() < 1e-12);
            assert!(g.iter().map(|g| g[1]).sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn element_map_round_trip() {
        let m = ElementMap::<f64>::new([Vec2::new(1.0, 1.0), Vec2::new(3.0, 1.5), Vec2::new(1.5, 2.0)]);
        let p = m.map([0.2, 0.3]);
        let xi = m.inverse(p);
        assert!((xi[0] - 0.2).abs() < 1e-14 && (xi[1] - 0.3).abs() < 1e-14);
        // gradient of x maps to (1, 0)
        let gx = m.push_gradient([m.jac[0][0], m.jac[0][1]]);
        assert!((gx.x - 1.0).abs() < 1e-14 && gx.y.abs() < 1e-14);
    }
}
