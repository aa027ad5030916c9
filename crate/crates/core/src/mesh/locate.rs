//! Point location with a uniform bucket grid.

use super::TriMesh;
use crate::point::{orient2d, Vec2};
use crate::scalar::Real;

/// Bucket-grid point locator. When a point lies on shared edges or vertices
/// the triangle with the lowest index wins.
#[derive(Debug, Clone)]
pub struct Locator<T> {
    lo: Vec2<T>,
    cell: Vec2<T>,
    nx: usize,
    ny: usize,
    start: Vec<usize>,
    items: Vec<usize>,
    tol: T,
}

impl<T: Real> Locator<T> {
    pub fn new(mesh: &TriMesh<T>) -> Self {
        let verts = mesh.vertices();
        let mut lo = verts[0];
        let mut hi = verts[0];
        for v in verts {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        let span = Vec2::new((hi.x - lo.x).max(T::epsilon()), (hi.y - lo.y).max(T::epsilon()));
        // about two triangles per bucket
        let target = (mesh.n_triangles() / 2).max(1) as f64;
        let ratio = (span.x / span.y).as_f64();
        let nx = ((target * ratio).sqrt().ceil() as usize).clamp(1, 1 << 14);
        let ny = ((target / ratio).sqrt().ceil() as usize).clamp(1, 1 << 14);
        let cell = Vec2::new(span.x / T::from_usize_lossy(nx), span.y / T::from_usize_lossy(ny));
        let tol = T::lit(1e-12);

        let mut loc = Self {
            lo,
            cell,
            nx,
            ny,
            start: Vec::new(),
            items: Vec::new(),
            tol,
        };
        let ranges: Vec<_> = (0..mesh.n_triangles())
            .map(|t| {
                let [a, b, c] = mesh.triangle_points(t);
                let min = Vec2::new(a.x.min(b.x).min(c.x), a.y.min(b.y).min(c.y));
                let max = Vec2::new(a.x.max(b.x).max(c.x), a.y.max(b.y).max(c.y));
                let (i0, j0) = loc.bucket(min);
                let (i1, j1) = loc.bucket(max);
                (i0, j0, i1, j1)
            })
            .collect();
        let mut counts = vec![0usize; nx * ny + 1];
        for &(i0, j0, i1, j1) in &ranges {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    counts[j * nx + i + 1] += 1;
                }
            }
        }
        for k in 0..nx * ny {
            counts[k + 1] += counts[k];
        }
        let mut next = counts.clone();
        let mut items = vec![0usize; counts[nx * ny]];
        // triangles are inserted in ascending order, so buckets stay sorted
        for (t, &(i0, j0, i1, j1)) in ranges.iter().enumerate() {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let k = j * nx + i;
                    items[next[k]] = t;
                    next[k] += 1;
                }
            }
        }
        loc.start = counts;
        loc.items = items;
        loc
    }

    fn bucket(&self, p: Vec2<T>) -> (usize, usize) {
        let fx = ((p.x - self.lo.x) / self.cell.x).floor().to_i64().unwrap_or(0);
        let fy = ((p.y - self.lo.y) / self.cell.y).floor().to_i64().unwrap_or(0);
        (
            fx.clamp(0, self.nx as i64 - 1) as usize,
            fy.clamp(0, self.ny as i64 - 1) as usize,
        )
    }

    /// Containing triangle and clamped barycentric coordinates, or `None`
    /// when the point is outside the mesh.
    pub fn locate(&self, mesh: &TriMesh<T>, p: Vec2<T>) -> Option<(usize, [T; 3])> {
        let (i, j) = self.bucket(p);
        let k = j * self.nx + i;
        self.items[self.start[k]..self.start[k + 1]]
            .iter()
            .find_map(|&t| barycentric_inside(mesh, t, p, self.tol).map(|b| (t, b)))
    }

    /// Tries `hint` first, which is much cheaper for runs of nearby points.
    /// Falls back to [`Locator::locate`] (and its tie-break) otherwise.
    pub fn locate_with_hint(&self, mesh: &TriMesh<T>, p: Vec2<T>, hint: usize) -> Option<(usize, [T; 3])> {
        if hint < mesh.n_triangles() {
            if let Some(b) = barycentric_inside(mesh, hint, p, -self.tol) {
                return Some((hint, b));
            }
        }
        self.locate(mesh, p)
    }
}

/// Barycentric coordinates of `p` in `t`, if all are `>= -tol`; the result
/// is clamped to `[0, 1]` and renormalized.
pub(crate) fn barycentric_inside<T: Real>(mesh: &TriMesh<T>, t: usize, p: Vec2<T>, tol: T) -> Option<[T; 3]> {
    let [a, b, c] = mesh.triangle_points(t);
    let twice = orient2d(a, b, c);
    let l0 = orient2d(p, b, c) / twice;
    let l1 = orient2d(a, p, c) / twice;
    let l2 = orient2d(a, b, p) / twice;
    if l0 < -tol || l1 < -tol || l2 < -tol {
        return None;
    }
    let mut l = [l0, l1, l2].map(|v| v.max(T::zero()).min(T::one()));
    let s = l[0] + l[1] + l[2];
    for v in &mut l {
        *v /= s;
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChannelGeometry;
    use crate::mesh::triangulate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn centroid_and_vertex() {
        let g = ChannelGeometry::<f64>::benchmark();
        let m = triangulate(&g.boundary, 0.2).unwrap();
        let loc = Locator::new(&m);
        for t in [0, 7, m.n_triangles() - 1] {
            let (found, b) = loc.locate(&m, m.centroid(t)).unwrap();
            assert_eq!(found, t);
            for v in b {
                assert!((v - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        // shared vertex: lowest incident triangle, one coordinate equal to 1
        let v = m.triangle(5)[1];
        let lowest = (0..m.n_triangles()).find(|&t| m.triangle(t).contains(&v)).unwrap();
        let (found, b) = loc.locate(&m, m.vertex(v)).unwrap();
        assert_eq!(found, lowest);
        assert!(b.contains(&1.0));
        assert!(loc.locate(&m, Vec2::new(1.0, -0.5)).is_none());
        assert!(loc.locate(&m, Vec2::new(-0.1, 0.2)).is_none());
    }

    #[test]
    fn matches_exhaustive_scan() {
        let g = ChannelGeometry::<f64>::benchmark();
        let m = triangulate(&g.boundary, 0.1).unwrap();
        let loc = Locator::new(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut n = 0;
        while n < 1000 {
            let p = Vec2::new(rng.gen_range(0.0..5.6), rng.gen_range(-1.4..0.5));
            if !g.boundary.contains(p) {
                continue;
            }
            n += 1;
            let brute = (0..m.n_triangles())
                .find_map(|t| barycentric_inside(&m, t, p, 1e-12).map(|b| (t, b)))
                .unwrap();
            let (t, b) = loc.locate(&m, p).unwrap();
            assert_eq!(t, brute.0);
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(b.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let q = m.point_at(t, b);
            assert!((q - p).norm() < 1e-12);
        }
    }
}
