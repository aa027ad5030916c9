//! The serpentine channel: domain polygon, boundary labels, and the closed-form
//! data of the model (Poiseuille profile, source, Dirichlet data, the 0D
//! solution and the continuous interface cut-off function).

use std::fmt;

use crate::error::{Error, Result};
use crate::point::Vec2;
use crate::scalar::Real;

/// Boundary label of a domain edge. The numeric codes are those of the ASCII
/// mesh format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryLabel {
    Inlet = 1,
    Wall = 2,
    Outlet = 3,
    Interface = 4,
}

impl BoundaryLabel {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Self::Inlet),
            2 => Some(Self::Wall),
            3 => Some(Self::Outlet),
            4 => Some(Self::Interface),
            _ => None,
        }
    }
}

impl fmt::Display for BoundaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Inlet => "INLET",
            Self::Wall => "WALL",
            Self::Outlet => "OUTLET",
            Self::Interface => "INTERFACE",
        };
        f.write_str(s)
    }
}

/// A closed polygon with one label per edge; edge `i` joins vertex `i` to
/// vertex `i + 1 (mod n)`.
#[derive(Debug, Clone)]
pub struct LabeledPolygon<T> {
    pub vertices: Vec<Vec2<T>>,
    pub labels: Vec<BoundaryLabel>,
}

impl<T: Real> LabeledPolygon<T> {
    pub fn new(vertices: Vec<Vec2<T>>, labels: Vec<BoundaryLabel>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegeneratePolygon(format!("{} vertices", vertices.len())));
        }
        if vertices.len() != labels.len() {
            return Err(Error::DegeneratePolygon(format!(
                "{} vertices but {} edge labels",
                vertices.len(),
                labels.len()
            )));
        }
        let poly = Self { vertices, labels };
        if poly.signed_area() <= T::zero() {
            return Err(Error::DegeneratePolygon(
                "polygon must be counterclockwise with positive area".into(),
            ));
        }
        if !poly.is_simple() {
            return Err(Error::DegeneratePolygon("polygon self-intersects".into()));
        }
        Ok(poly)
    }

    pub fn n_edges(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge(&self, i: usize) -> (Vec2<T>, Vec2<T>) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn signed_area(&self) -> T {
        let n = self.vertices.len();
        let mut twice = T::zero();
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            twice += a.cross(b);
        }
        twice * T::lit(0.5)
    }

    fn is_simple(&self) -> bool {
        let n = self.n_edges();
        for i in 0..n {
            for j in (i + 1)..n {
                // adjacent edges share exactly one endpoint
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, b) = self.edge(i);
                let (c, d) = self.edge(j);
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// Even-odd point-in-polygon test. Points on the boundary may go either way.
    pub fn contains(&self, p: Vec2<T>) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[j]);
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Index of the first edge whose closed segment contains `p` within `tol`.
    pub fn edge_containing(&self, p: Vec2<T>, tol: T) -> Option<usize> {
        (0..self.n_edges()).find(|&i| {
            let (a, b) = self.edge(i);
            point_on_segment(p, a, b, tol)
        })
    }

    /// Vertices with an interior angle larger than pi.
    pub fn reentrant_corners(&self) -> Vec<Vec2<T>> {
        let n = self.vertices.len();
        (0..n)
            .filter_map(|i| {
                let prev = self.vertices[(i + n - 1) % n];
                let cur = self.vertices[i];
                let next = self.vertices[(i + 1) % n];
                ((cur - prev).cross(next - cur) < T::zero()).then_some(cur)
            })
            .collect()
    }

    pub fn bounding_box(&self) -> (Vec2<T>, Vec2<T>) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }
}

fn segments_intersect<T: Real>(a: Vec2<T>, b: Vec2<T>, c: Vec2<T>, d: Vec2<T>) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    let z = T::zero();
    if ((o1 > z && o2 < z) || (o1 < z && o2 > z)) && ((o3 > z && o4 < z) || (o3 < z && o4 > z)) {
        return true;
    }
    let tol = T::epsilon();
    (o1.abs() <= tol && point_on_segment(c, a, b, tol))
        || (o2.abs() <= tol && point_on_segment(d, a, b, tol))
        || (o3.abs() <= tol && point_on_segment(a, c, d, tol))
        || (o4.abs() <= tol && point_on_segment(b, c, d, tol))
}

/// Distance test of `p` against the closed segment `[a, b]`.
pub fn point_on_segment<T: Real>(p: Vec2<T>, a: Vec2<T>, b: Vec2<T>, tol: T) -> bool {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == T::zero() {
        return (p - a).norm() <= tol;
    }
    let t = (p - a).dot(ab) / len2;
    let t = t.max(T::zero()).min(T::one());
    (a + ab * t - p).norm() <= tol
}

/// Physical parameters and polygon of the single-bend channel.
#[derive(Debug, Clone)]
pub struct ChannelGeometry<T> {
    /// Length of the straight channel.
    pub l: T,
    /// Channel width.
    pub r: T,
    /// Straight part of the bend.
    pub w: T,
    /// Length of the outlet stub.
    pub l_out: T,
    /// Average inlet value.
    pub u_av: T,
    /// Aspect ratio `R / L` (diagnostic only).
    pub epsilon: T,
    pub boundary: LabeledPolygon<T>,
}

impl<T: Real> ChannelGeometry<T> {
    pub fn new(l: T, r: T, w: T, l_out: T, u_av: T) -> Result<Self> {
        for (name, v) in [("L", l), ("R", r), ("W", w), ("L_out", l_out)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !u_av.is_finite() {
            return Err(Error::InvalidParameter("u_av must be finite".into()));
        }
        if l_out <= r {
            return Err(Error::InvalidParameter(format!(
                "L_out = {l_out} must exceed R = {r} for the outlet stub to exist"
            )));
        }
        let v = |x: T, y: T| Vec2::new(x, y);
        let x_stub = l + r - l_out;
        let vertices = vec![
            v(T::zero(), T::zero()),
            v(l, T::zero()),
            v(l, -w),
            v(x_stub, -w),
            v(x_stub, -w - r),
            v(l + r, -w - r),
            v(l + r, r),
            v(T::zero(), r),
        ];
        use BoundaryLabel::*;
        let labels = vec![Wall, Wall, Wall, Outlet, Wall, Wall, Wall, Inlet];
        let boundary = LabeledPolygon::new(vertices, labels)?;
        Ok(Self {
            l,
            r,
            w,
            l_out,
            u_av,
            epsilon: r / l,
            boundary,
        })
    }

    /// `L = 5.1, R = 0.5, W = 0.9, L_out = 0.8, u_av = 1`.
    pub fn benchmark() -> Self {
        Self::new(T::lit(5.1), T::lit(0.5), T::lit(0.9), T::lit(0.8), T::one()).expect("benchmark parameters are valid")
    }

    /// Same polygon with a different average inlet value.
    pub fn with_u_av(&self, u_av: T) -> Self {
        Self { u_av, ..self.clone() }
    }

    /// Absolute tolerance for on-boundary tests.
    pub fn tolerance(&self) -> T {
        T::lit(1e-10) * self.l.max(self.r).max(self.w)
    }

    /// Poiseuille profile `S(y) = 6 u_av / R^2 * y (R - y)`.
    pub fn profile(&self, y: T) -> T {
        T::lit(6.0) * self.u_av / (self.r * self.r) * y * (self.r - y)
    }

    /// `S'(y) = 6 u_av / R^2 * (R - 2y)`.
    pub fn profile_slope(&self, y: T) -> T {
        T::lit(6.0) * self.u_av / (self.r * self.r) * (self.r - y - y)
    }

    /// Constant source `f = 12 u_av / R^2`.
    pub fn source(&self) -> T {
        T::lit(12.0) * self.u_av / (self.r * self.r)
    }

    /// Dirichlet data `g` on an edge with the given label. The interface label
    /// carries the 0D trace `S(y)`.
    pub fn dirichlet_value(&self, p: Vec2<T>, label: BoundaryLabel) -> Result<T> {
        if label != BoundaryLabel::Interface {
            let tol = self.tolerance();
            let on_label = (0..self.boundary.n_edges()).any(|i| {
                let (a, b) = self.boundary.edge(i);
                self.boundary.labels[i] == label && point_on_segment(p, a, b, tol)
            });
            if !on_label {
                return Err(Error::LabelMismatch {
                    x: p.x.as_f64(),
                    y: p.y.as_f64(),
                    label: label.to_string(),
                });
            }
        }
        Ok(self.boundary_data(p, label))
    }

    /// Dirichlet data without the geometric membership check.
    pub fn boundary_data(&self, p: Vec2<T>, label: BoundaryLabel) -> T {
        match label {
            BoundaryLabel::Inlet | BoundaryLabel::Interface => self.profile(p.y),
            BoundaryLabel::Wall => T::zero(),
            BoundaryLabel::Outlet => self.profile(p.y + self.w + self.r),
        }
    }

    /// The 0D solution `u' = S(y)` and its gradient `(0, S'(y))` in the
    /// closure of the 0D region left of the interface.
    pub fn zero_d_solution(&self, iface: &InterfaceConfig<T>, p: Vec2<T>) -> Result<(T, Vec2<T>)> {
        let tol = self.tolerance();
        if p.x < -tol || p.x > iface.x_gamma + tol || p.y < -tol || p.y > self.r + tol {
            return Err(Error::OutsideRegion {
                x: p.x.as_f64(),
                y: p.y.as_f64(),
                region: "the 0D subdomain",
            });
        }
        Ok((self.profile(p.y), Vec2::new(T::zero(), self.profile_slope(p.y))))
    }

    /// Polygon of the FE subdomain right of the interface, or of the whole
    /// channel when no interface is given.
    pub fn fe_polygon(&self, iface: Option<&InterfaceConfig<T>>) -> LabeledPolygon<T> {
        let Some(iface) = iface else {
            return self.boundary.clone();
        };
        let x0 = iface.x_gamma;
        let mut vertices = self.boundary.vertices.clone();
        vertices[0].x = x0;
        vertices[7].x = x0;
        let mut labels = self.boundary.labels.clone();
        labels[7] = BoundaryLabel::Interface;
        LabeledPolygon { vertices, labels }
    }

    /// Area of the whole channel.
    pub fn area(&self) -> T {
        self.boundary.signed_area()
    }
}

/// Position of the interface between the 0D and the 2D model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceConfig<T> {
    pub x_gamma: T,
}

impl<T: Real> InterfaceConfig<T> {
    pub fn new(geom: &ChannelGeometry<T>, x_gamma: T) -> Result<Self> {
        if !(x_gamma > T::zero() && x_gamma < geom.l) {
            return Err(Error::InvalidParameter(format!(
                "interface position {x_gamma} must lie in (0, {})",
                geom.l
            )));
        }
        Ok(Self { x_gamma })
    }

    /// Length of the interface segment; always equal to `R`.
    pub fn length(&self, geom: &ChannelGeometry<T>) -> T {
        geom.r
    }

    /// Whether `p` lies in the open 0D region `(0, x_gamma) x (0, R)`.
    pub fn in_zero_d(&self, geom: &ChannelGeometry<T>, p: Vec2<T>) -> bool {
        p.x < self.x_gamma && p.x > T::zero() && p.y > T::zero() && p.y < geom.r
    }

    /// Continuous cut-off: 1 left of the interface, a linear ramp to 0 over
    /// one channel width, and 0 outside the strip `0 <= y <= R`.
    pub fn psi_gamma(&self, geom: &ChannelGeometry<T>, p: Vec2<T>) -> T {
        if p.y < T::zero() || p.y > geom.r {
            return T::zero();
        }
        if p.x < self.x_gamma {
            T::one()
        } else if p.x <= self.x_gamma + geom.r {
            (self.x_gamma + geom.r - p.x) / geom.r
        } else {
            T::zero()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bench() -> ChannelGeometry<f64> {
        ChannelGeometry::benchmark()
    }

    #[test]
    fn benchmark_polygon_matches_construction() {
        let g = bench();
        let expect = [
            (0.0, 0.0),
            (5.1, 0.0),
            (5.1, -0.9),
            (4.8, -0.9),
            (4.8, -1.4),
            (5.6, -1.4),
            (5.6, 0.5),
            (0.0, 0.5),
        ];
        for (v, e) in g.boundary.vertices.iter().zip(expect) {
            assert!((v.x - e.0).abs() < 1e-12 && (v.y - e.1).abs() < 1e-12, "{v:?} vs {e:?}");
        }
        let corners = g.boundary.reentrant_corners();
        assert_eq!(corners.len(), 2);
        assert!((corners[0] - Vec2::new(5.1, 0.0)).norm() < 1e-12);
        assert!((corners[1] - Vec2::new(5.1, -0.9)).norm() < 1e-12);
        // the stub corner (4.8, -0.9) is convex
        let outlet: Vec<_> = (0..8)
            .filter(|&i| g.boundary.labels[i] == BoundaryLabel::Outlet)
            .collect();
        assert_eq!(outlet.len(), 1);
        let (a, b) = g.boundary.edge(outlet[0]);
        // the flow turns back: the outlet closes the stub on the left
        assert!((a.x - 4.8).abs() < 1e-12 && (b.x - 4.8).abs() < 1e-12);
        for y in [a.y, b.y] {
            let t = y + g.w + g.r;
            assert!((-1e-12..=g.r + 1e-12).contains(&t));
        }
        let inlet: Vec<_> = (0..8)
            .filter(|&i| g.boundary.labels[i] == BoundaryLabel::Inlet)
            .collect();
        assert_eq!(inlet, vec![7]);
    }

    #[test]
    fn unit_geometry_is_valid() {
        let g = ChannelGeometry::new(1.0, 1.0, 1.0, 2.0, 0.0).unwrap();
        assert_eq!(g.epsilon, 1.0);
        assert!(g.area() > 0.0);
    }

    #[test]
    fn short_outlet_stub_is_rejected() {
        assert!(ChannelGeometry::new(5.1, 0.5, 0.9, 0.4, 1.0).is_err());
        assert!(ChannelGeometry::new(5.1, 0.5, 0.9, 0.5, 1.0).is_err());
        assert!(ChannelGeometry::new(-1.0, 0.5, 0.9, 0.8, 1.0).is_err());
        assert!(ChannelGeometry::new(5.1, 0.0, 0.9, 0.8, 1.0).is_err());
        assert!(ChannelGeometry::new(5.1, 0.5, 0.9, 0.8, f64::NAN).is_err());
    }

    #[test]
    fn profile_values() {
        let g = bench();
        assert_eq!(g.profile(0.0), 0.0);
        assert_eq!(g.profile(g.r), 0.0);
        assert!((g.profile(0.25) - 1.5).abs() < 1e-14);
        assert!((g.source() - 48.0).abs() < 1e-12);
        assert_eq!(g.with_u_av(0.0).source(), 0.0);
        assert!((g.source() * g.r * g.r / g.u_av - 12.0).abs() < 1e-12);
    }

    #[test]
    fn profile_integrates_to_average() {
        // 3-point Gauss-Legendre is exact for the quadratic profile.
        for (r, u) in [(0.5, 1.0), (1.3, -2.0), (0.01, 7.5)] {
            let g = ChannelGeometry::new(5.0, r, 1.0, 2.0 * r, u).unwrap();
            let pts = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
            let wts = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
            let integral: f64 = pts
                .iter()
                .zip(wts)
                .map(|(&t, w)| w * g.profile(0.5 * r * (t + 1.0)) * 0.5 * r)
                .sum();
            assert!((integral - u * r).abs() <= 1e-12 * (u * r).abs());
        }
    }

    #[test]
    fn second_derivative_of_profile_is_minus_source() {
        let g = bench();
        for i in 0..10 {
            let y = 0.05 * i as f64 + 0.013;
            let h = 1e-3;
            let d2 = (g.profile(y + h) - 2.0 * g.profile(y) + g.profile(y - h)) / (h * h);
            assert!((-d2 - g.source()).abs() < 1e-6);
            let ds = (g.profile_slope(y + h) - g.profile_slope(y - h)) / (2.0 * h);
            assert!((-ds - g.source()).abs() < 1e-9);
        }
    }

    #[test]
    fn dirichlet_data_by_label() {
        let g = bench();
        let v = g.dirichlet_value(Vec2::new(0.0, 0.25), BoundaryLabel::Inlet).unwrap();
        assert!((v - 1.5).abs() < 1e-14);
        let v = g.dirichlet_value(Vec2::new(2.0, 0.0), BoundaryLabel::Wall).unwrap();
        assert_eq!(v, 0.0);
        let v = g.dirichlet_value(Vec2::new(4.8, -1.15), BoundaryLabel::Outlet).unwrap();
        assert!((v - 1.5).abs() < 1e-12);
        assert!(g.dirichlet_value(Vec2::new(2.0, 0.25), BoundaryLabel::Wall).is_err());
        assert!(g.dirichlet_value(Vec2::new(0.0, 0.25), BoundaryLabel::Outlet).is_err());
    }

    #[test]
    fn zero_d_solution_and_gradient() {
        let g = bench();
        let iface = InterfaceConfig::new(&g, 4.0).unwrap();
        let (v, grad) = g.zero_d_solution(&iface, Vec2::new(1.0, 0.25)).unwrap();
        assert!((v - 1.5).abs() < 1e-14);
        assert_eq!(grad.x, 0.0);
        assert!(grad.y.abs() < 1e-14);
        let (_, grad) = g.zero_d_solution(&iface, Vec2::new(1.0, 0.0)).unwrap();
        assert!((grad.y - 6.0 * g.u_av / g.r).abs() < 1e-12);
        assert!(g.zero_d_solution(&iface, Vec2::new(4.5, 0.25)).is_err());
    }

    #[test]
    fn interface_validation() {
        let g = bench();
        assert!(InterfaceConfig::new(&g, 0.0).is_err());
        assert!(InterfaceConfig::new(&g, 5.1).is_err());
        let i = InterfaceConfig::new(&g, 4.6).unwrap();
        assert_eq!(i.length(&g), g.r);
    }

    #[test]
    fn psi_gamma_ramp() {
        let g = bench();
        let i = InterfaceConfig::new(&g, 3.0).unwrap();
        for y in [0.0, 0.2, 0.5] {
            assert_eq!(i.psi_gamma(&g, Vec2::new(3.0, y)), 1.0);
            assert!(i.psi_gamma(&g, Vec2::new(3.5, y)).abs() < 1e-15);
            assert!((i.psi_gamma(&g, Vec2::new(3.25, y)) - 0.5).abs() < 1e-14);
            assert_eq!(i.psi_gamma(&g, Vec2::new(1.0, y)), 1.0);
        }
        assert_eq!(i.psi_gamma(&g, Vec2::new(3.2, 0.6)), 0.0);
        assert_eq!(i.psi_gamma(&g, Vec2::new(5.3, -0.5)), 0.0);
    }

    #[test]
    fn psi_gamma_continuous_across_ramp_edges() {
        let g = bench();
        let i = InterfaceConfig::new(&g, 4.6).unwrap();
        let d = 1e-9;
        for y in [0.1, 0.3] {
            for x in [4.6, 5.1] {
                let jump = i.psi_gamma(&g, Vec2::new(x - d, y)) - i.psi_gamma(&g, Vec2::new(x + d, y));
                assert!(jump.abs() < 1e-6, "jump {jump} at x = {x}");
            }
        }
    }

    #[test]
    fn fe_polygon_cuts_channel() {
        let g = bench();
        let i = InterfaceConfig::new(&g, 4.6).unwrap();
        let p = g.fe_polygon(Some(&i));
        assert_eq!(p.labels[7], BoundaryLabel::Interface);
        let area = p.signed_area();
        assert!((area - (g.area() - 4.6 * 0.5)).abs() < 1e-12);
        assert!(p.contains(Vec2::new(5.0, 0.25)));
        assert!(!p.contains(Vec2::new(4.0, 0.25)));
    }

    #[test]
    fn self_intersecting_polygon_is_rejected() {
        use BoundaryLabel::Wall;
        let bowtie = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(LabeledPolygon::new(bowtie, vec![Wall; 4]).is_err());
        let cw = vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)];
        assert!(LabeledPolygon::new(cw, vec![Wall; 3]).is_err());
    }
}
