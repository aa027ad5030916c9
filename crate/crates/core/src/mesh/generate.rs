//! Structured triangulation of axis-aligned polygons.
//!
//! The polygon's distinct x and y coordinates cut its bounding box into a
//! tensor grid of rectangles. Every interval is split into pieces no longer
//! than the target size, extra splits are added until no kept cell is more
//! elongated than [`MAX_ASPECT`], and each kept cell is cut along the same
//! diagonal.

use std::collections::HashMap;

use super::{edge_key, BoundaryEdge, TriMesh};
use crate::error::{Error, Result};
use crate::geometry::LabeledPolygon;
use crate::point::Vec2;
use crate::scalar::Real;

/// Largest side ratio of a grid cell; keeps the minimum angle above
/// `atan(1 / 2.5) ≈ 21.8°`.
const MAX_ASPECT: f64 = 2.5;

/// Smallest distance between two parallel, non-adjacent edges whose
/// projections overlap on a segment of positive length.
pub fn narrowest_width<T: Real>(poly: &LabeledPolygon<T>) -> T {
    let n = poly.n_edges();
    let mut best = T::infinity();
    for i in 0..n {
        for j in (i + 1)..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a, b) = poly.edge(i);
            let (c, d) = poly.edge(j);
            let horizontal = |p: Vec2<T>, q: Vec2<T>| p.y == q.y;
            let vertical = |p: Vec2<T>, q: Vec2<T>| p.x == q.x;
            let (lo1, hi1, lo2, hi2, dist) = if horizontal(a, b) && horizontal(c, d) {
                (
                    a.x.min(b.x),
                    a.x.max(b.x),
                    c.x.min(d.x),
                    c.x.max(d.x),
                    (a.y - c.y).abs(),
                )
            } else if vertical(a, b) && vertical(c, d) {
                (
                    a.y.min(b.y),
                    a.y.max(b.y),
                    c.y.min(d.y),
                    c.y.max(d.y),
                    (a.x - c.x).abs(),
                )
            } else {
                continue;
            };
            if hi1.min(hi2) > lo1.max(lo2) {
                best = best.min(dist);
            }
        }
    }
    best
}

/// Sorted distinct coordinates; values closer than `tol` are merged, keeping
/// the one flagged as preferred.
fn distinct<T: Real>(mut values: Vec<(T, bool)>, tol: T) -> Vec<T> {
    values.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite coordinates"));
    let mut out: Vec<(T, bool)> = Vec::new();
    for (v, pref) in values {
        match out.last_mut() {
            Some(last) if v - last.0 <= tol => {
                if pref && !last.1 {
                    *last = (v, true);
                }
            }
            _ => out.push((v, pref)),
        }
    }
    out.into_iter().map(|(v, _)| v).collect()
}

fn subdivide<T: Real>(breaks: &[T], pieces: &[usize]) -> Vec<T> {
    let mut out = vec![breaks[0]];
    for (k, w) in breaks.windows(2).enumerate() {
        let n = pieces[k];
        for j in 1..n {
            let t = T::from_usize_lossy(j) / T::from_usize_lossy(n);
            out.push(w[0] + (w[1] - w[0]) * t);
        }
        // endpoints are copied, never recomputed
        out.push(w[1]);
    }
    out
}

/// Quasi-uniform mesh whose largest triangle diameter is at most `h_max`.
pub fn triangulate_max_diameter<T: Real>(poly: &LabeledPolygon<T>, h_max: T) -> Result<TriMesh<T>> {
    triangulate(poly, h_max / T::SQRT_2())
}

/// Meshes an axis-aligned polygon with cells of side at most `target_h`, so
/// the triangle diameters are at most `sqrt(2) * target_h`.
pub fn triangulate<T: Real>(poly: &LabeledPolygon<T>, target_h: T) -> Result<TriMesh<T>> {
    if !(target_h > T::zero()) || !target_h.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "target_h must be positive, got {target_h}"
        )));
    }
    for i in 0..poly.n_edges() {
        let (a, b) = poly.edge(i);
        if a.x != b.x && a.y != b.y {
            return Err(Error::DegeneratePolygon(format!(
                "edge {i} is not axis-aligned; only rectilinear polygons are supported"
            )));
        }
    }
    let width = narrowest_width(poly);
    if target_h > width {
        return Err(Error::InvalidParameter(format!(
            "target_h = {target_h} exceeds the narrowest channel width {width}"
        )));
    }

    let (lo, hi) = poly.bounding_box();
    let tol = T::lit(1e-12) * (hi.x - lo.x).max(hi.y - lo.y);
    // Interface endpoints keep their exact abscissa when coordinates merge.
    let pref = |i: usize| poly.labels[i] == crate::geometry::BoundaryLabel::Interface;
    let n = poly.n_edges();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, v) in poly.vertices.iter().enumerate() {
        let preferred = pref(i) || pref((i + n - 1) % n);
        xs.push((v.x, preferred));
        ys.push((v.y, preferred));
    }
    let xb = distinct(xs, tol);
    let yb = distinct(ys, tol);

    let inside = |i: usize, j: usize| {
        let c = Vec2::new((xb[i] + xb[i + 1]) * T::lit(0.5), (yb[j] + yb[j + 1]) * T::lit(0.5));
        poly.contains(c)
    };
    let ceil_div = |len: T, s: T| -> usize { (len / s - T::lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1) };
    let mut nx: Vec<usize> = xb.windows(2).map(|w| ceil_div(w[1] - w[0], target_h)).collect();
    let mut ny: Vec<usize> = yb.windows(2).map(|w| ceil_div(w[1] - w[0], target_h)).collect();
    let aspect = T::lit(MAX_ASPECT);
    for _ in 0..64 {
        let mut changed = false;
        for i in 0..nx.len() {
            for j in 0..ny.len() {
                if !inside(i, j) {
                    continue;
                }
                let dx = (xb[i + 1] - xb[i]) / T::from_usize_lossy(nx[i]);
                let dy = (yb[j + 1] - yb[j]) / T::from_usize_lossy(ny[j]);
                if dx > aspect * dy {
                    nx[i] = ceil_div(xb[i + 1] - xb[i], aspect * dy);
                    changed = true;
                } else if dy > aspect * dx {
                    ny[j] = ceil_div(yb[j + 1] - yb[j], aspect * dx);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let gx = subdivide(&xb, &nx);
    let gy = subdivide(&yb, &ny);
    // interval index of every sub-cell
    let owner = |pieces: &[usize]| -> Vec<usize> {
        pieces
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat_n(k, n))
            .collect()
    };
    let ox = owner(&nx);
    let oy = owner(&ny);

    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for cj in 0..gy.len() - 1 {
        for ci in 0..gx.len() - 1 {
            if !inside(ox[ci], oy[cj]) {
                continue;
            }
            let mut id = |i: usize, j: usize| {
                *index.entry((i, j)).or_insert_with(|| {
                    vertices.push(Vec2::new(gx[i], gy[j]));
                    vertices.len() - 1
                })
            };
            let p00 = id(ci, cj);
            let p10 = id(ci + 1, cj);
            let p01 = id(ci, cj + 1);
            let p11 = id(ci + 1, cj + 1);
            triangles.push([p10, p11, p00]);
            triangles.push([p01, p00, p11]);
        }
    }

    // boundary edges: those used by exactly one triangle
    let mut count: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
    let mut order = Vec::new();
    for tri in &triangles {
        for i in 0..3 {
            let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
            let key = edge_key(a, b);
            let entry = count.entry(key).or_insert_with(|| {
                order.push(key);
                (0, [a, b])
            });
            entry.0 += 1;
        }
    }
    let label_tol = T::lit(1e-9) * (hi.x - lo.x).max(hi.y - lo.y);
    let mut boundary = Vec::new();
    for key in order {
        let (c, verts) = count[&key];
        if c != 1 {
            continue;
        }
        let mid = vertices[verts[0]].midpoint(vertices[verts[1]]);
        let Some(i) = poly.edge_containing(mid, label_tol) else {
            return Err(Error::InvalidMesh(format!(
                "boundary edge at ({}, {}) does not lie on the polygon",
                mid.x, mid.y
            )));
        };
        boundary.push(BoundaryEdge {
            vertices: verts,
            label: poly.labels[i],
        });
    }
    TriMesh::new(vertices, triangles, boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundaryLabel, ChannelGeometry, InterfaceConfig};

    fn unit_square() -> LabeledPolygon<f64> {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        LabeledPolygon::new(v, vec![BoundaryLabel::Wall; 4]).unwrap()
    }

    #[test]
    fn unit_square_coarse() {
        let m = triangulate(&unit_square(), 0.5).unwrap();
        assert_eq!(m.n_triangles(), 8);
        assert_eq!(m.boundary_edges().len(), 8);
        assert!((m.total_area() - 1.0).abs() < 1e-14);
        let s = m.stats();
        assert!(s.h_max >= 0.25 && s.h_max <= 0.75);
        assert!((s.min_angle - 45.0).abs() < 1e-9);
    }

    #[test]
    fn channel_widths() {
        let g = ChannelGeometry::<f64>::benchmark();
        assert!((narrowest_width(&g.boundary) - 0.5).abs() < 1e-12);
        let i = InterfaceConfig::new(&g, 5.08).unwrap();
        assert!((narrowest_width(&g.fe_polygon(Some(&i))) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn too_coarse_target_is_rejected() {
        let g = ChannelGeometry::<f64>::benchmark();
        assert!(triangulate(&g.boundary, 0.6).is_err());
        assert!(triangulate(&g.boundary, 0.0).is_err());
    }

    #[test]
    fn interface_vertices_are_exact_and_thin_columns_stay_shapely() {
        let g = ChannelGeometry::<f64>::benchmark();
        for x in [0.1, 4.6, 5.08, 4.8, 4.6 - 0.2] {
            let i = InterfaceConfig::new(&g, x).unwrap();
            let poly = g.fe_polygon(Some(&i));
            for h in [0.08, 0.04] {
                let m = triangulate(&poly, h).unwrap();
                let s = m.stats();
                assert!(s.min_angle >= 20.0, "x = {x}, h = {h}: {}", s.min_angle);
                assert!(s.h_max <= 1.5 * h);
                assert!((m.total_area() - poly.signed_area()).abs() < 1e-10);
                let on_gamma = m.vertices().iter().filter(|v| v.x == x).count();
                assert!(on_gamma >= 2);
                for be in m.boundary_edges() {
                    if be.label == BoundaryLabel::Interface {
                        assert!(be.vertices.iter().all(|&v| m.vertex(v).x == x));
                    }
                }
            }
        }
    }
}
