//! Planar vectors and convex polygons.
//!
//! Polygons are stored counterclockwise. A polygon may degenerate to a
//! segment (two vertices) or a single point; the separating-axis test
//! handles all three cases.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Collinearity tolerance on twice the signed triangle area, in m².
pub const COLLINEAR_TOL: f64 = 1e-9;

/// Boundary slack used by polygon overlap and containment tests, in m.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at `angle` radians from the +x axis.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2::new(c, s)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Rotate counterclockwise by `angle` radians (body frame to inertial frame).
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Convex polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    /// Wrap vertices that are already convex and counterclockwise.
    pub fn from_ccw(vertices: Vec<Vec2>) -> Self {
        debug_assert!(!vertices.is_empty());
        ConvexPolygon { vertices }
    }

    /// Hull of three points: a counterclockwise triangle, or the spanning
    /// segment when the points are collinear.
    pub fn hull_of_three(a: Vec2, b: Vec2, c: Vec2) -> Self {
        let area2 = (b - a).cross(c - a);
        if area2.abs() <= COLLINEAR_TOL {
            let pts = [a, b, c];
            let mut best = (a, a, 0.0);
            for i in 0..3 {
                for j in (i + 1)..3 {
                    let d = pts[i].distance(pts[j]);
                    if d > best.2 {
                        best = (pts[i], pts[j], d);
                    }
                }
            }
            if best.2 == 0.0 {
                return ConvexPolygon { vertices: vec![a] };
            }
            return ConvexPolygon {
                vertices: vec![best.0, best.1],
            };
        }
        if area2 > 0.0 {
            ConvexPolygon {
                vertices: vec![a, b, c],
            }
        } else {
            ConvexPolygon {
                vertices: vec![a, c, b],
            }
        }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn translated(&self, d: Vec2) -> Self {
        ConvexPolygon {
            vertices: self.vertices.iter().map(|&v| v + d).collect(),
        }
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len() as f64;
        let s = self.vertices.iter().fold(Vec2::ZERO, |acc, &v| acc + v);
        s * (1.0 / n)
    }

    /// Point-in-polygon with `tol` metres of slack outside the boundary.
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        match self.vertices.len() {
            1 => self.vertices[0].distance(p) <= tol,
            2 => distance_to_segment(p, self.vertices[0], self.vertices[1]) <= tol,
            n => (0..n).all(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let edge = b - a;
                // signed distance to the left of the edge
                edge.cross(p - a) / edge.norm() >= -tol
            }),
        }
    }

    /// Separating-axis overlap test. Shapes closer than `tol` count as
    /// intersecting, so touching boundaries report `true`.
    pub fn intersects(&self, other: &ConvexPolygon, tol: f64) -> bool {
        for axis in self.axes().chain(other.axes()) {
            let (amin, amax) = project(&self.vertices, axis);
            let (bmin, bmax) = project(&other.vertices, axis);
            if amax < bmin - tol || bmax < amin - tol {
                return false;
            }
        }
        if self.vertices.len() == 1 && other.vertices.len() == 1 {
            return self.vertices[0].distance(other.vertices[0]) <= tol;
        }
        true
    }

    fn axes(&self) -> impl Iterator<Item = Vec2> + '_ {
        let n = self.vertices.len();
        let edges = match n {
            1 => 0,
            2 => 1,
            _ => n,
        };
        (0..edges).filter_map(move |i| {
            let e = self.vertices[(i + 1) % n] - self.vertices[i];
            let len = e.norm();
            (len > 0.0).then(|| e.perp() * (1.0 / len))
        })
    }
}

fn project(vertices: &[Vec2], axis: Vec2) -> (f64, f64) {
    vertices
        .iter()
        .map(|v| v.dot(axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| {
            (lo.min(q), hi.max(q))
        })
}

pub fn distance_to_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Intersection of two infinite lines given as point + direction.
/// Returns the parameters `(s, u)` with `p + s*d = q + u*e`.
pub fn line_line_params(p: Vec2, d: Vec2, q: Vec2, e: Vec2) -> Option<(f64, f64)> {
    let denom = d.cross(e);
    let scale = d.norm() * e.norm();
    if scale == 0.0 || denom.abs() <= 1e-12 * scale {
        return None;
    }
    let w = q - p;
    Some((w.cross(e) / denom, w.cross(d) / denom))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> ConvexPolygon {
        ConvexPolygon::from_ccw(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
    }

    #[test]
    fn hull_orders_counterclockwise() {
        let h = ConvexPolygon::hull_of_three(
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 0.0),
        );
        let v = h.vertices();
        assert!((v[1] - v[0]).cross(v[2] - v[0]) > 0.0);
    }

    #[test]
    fn collinear_hull_is_segment() {
        let h = ConvexPolygon::hull_of_three(
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(1.0, 1.0),
        );
        assert_eq!(h.len(), 2);
        assert!(h.contains(Vec2::new(0.5, 0.5), 1e-12));
        assert!(h.vertices().contains(&Vec2::new(2.0, 2.0)));
    }

    #[test]
    fn touching_squares_intersect() {
        let a = unit_square();
        let b = a.translated(Vec2::new(1.0, 0.0));
        assert!(a.intersects(&b, BOUNDARY_TOL));
        let c = a.translated(Vec2::new(1.0 + 1e-6, 0.0));
        assert!(!a.intersects(&c, BOUNDARY_TOL));
    }

    #[test]
    fn segment_against_triangle() {
        let tri = ConvexPolygon::hull_of_three(
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        );
        let seg = ConvexPolygon::from_ccw(vec![Vec2::new(0.2, 0.2), Vec2::new(2.0, 2.0)]);
        assert!(tri.intersects(&seg, BOUNDARY_TOL));
        let far = ConvexPolygon::from_ccw(vec![Vec2::new(2.0, 2.0), Vec2::new(4.0, 4.0)]);
        assert!(!tri.intersects(&far, BOUNDARY_TOL));
    }

    #[test]
    fn rotation_quarter_turn() {
        let v = Vec2::new(1.0, 0.0).rotate(std::f64::consts::FRAC_PI_2);
        assert!((v.x).abs() < 1e-15 && (v.y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parallel_lines_have_no_intersection() {
        let r = line_line_params(
            Vec2::ZERO,
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(2.0, 0.0),
        );
        assert!(r.is_none());
    }
}
