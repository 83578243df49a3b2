//! Quadratic Bézier lane-exit paths.
//!
//! The path starts at `p_i` on the entry lane and ends at `p_f` on the
//! exit lane. The middle control point `p_int` is where the two lane
//! centerlines meet, so the path leaves and joins each lane tangentially.
//! The whole curve stays inside the triangle of its control points.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{line_line_params, ConvexPolygon, Vec2};

/// Knots in the cumulative arc-length table.
const ARC_KNOTS: usize = 1024;
/// Absolute tolerance of the total arc-length quadrature, in metres.
const ARC_TOL: f64 = 1e-8;
const MIN_DERIVATIVE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneGeometry {
    pub p_i: Vec2,
    pub p_f: Vec2,
    /// Direction of travel on the entry lane, radians.
    pub theta_i: f64,
    /// Direction of travel on the exit lane, radians.
    pub theta_f: f64,
}

/// Intersection of the entry-lane line through `p_i` and the exit-lane line through `p_f`.
pub fn intermediate_control_point(geom: &LaneGeometry) -> Result<Vec2> {
    let di = Vec2::from_angle(geom.theta_i);
    let df = Vec2::from_angle(geom.theta_f);
    let (s, _) = line_line_params(geom.p_i, di, geom.p_f, df).ok_or(Error::ParallelLanes)?;
    let p = geom.p_i + di * s;
    // snap exact axis-aligned cases (cos(π/2) is 6e-17, not 0)
    Ok(Vec2::new(snap(p.x, geom.p_i.x, geom.p_f.x), snap(p.y, geom.p_i.y, geom.p_f.y)))
}

fn snap(v: f64, a: f64, b: f64) -> f64 {
    let tol = 1e-12 * (1.0 + v.abs());
    if (v - a).abs() <= tol {
        a
    } else if (v - b).abs() <= tol {
        b
    } else {
        v
    }
}

/// Quadratic Bézier path with a precomputed arc-length table.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneExitPath {
    p_i: Vec2,
    p_int: Vec2,
    p_f: Vec2,
    hull: ConvexPolygon,
    arc_length: f64,
    /// cumulative arc length at tau = k / ARC_KNOTS
    cumulative: Vec<f64>,
}

impl LaneExitPath {
    pub fn new(p_i: Vec2, p_int: Vec2, p_f: Vec2) -> Self {
        let hull = ConvexPolygon::hull_of_three(p_i, p_int, p_f);
        let mut path = LaneExitPath {
            p_i,
            p_int,
            p_f,
            hull,
            arc_length: 0.0,
            cumulative: Vec::with_capacity(ARC_KNOTS + 1),
        };
        let mut acc = 0.0;
        path.cumulative.push(0.0);
        let h = 1.0 / ARC_KNOTS as f64;
        let tol = ARC_TOL / ARC_KNOTS as f64;
        for k in 0..ARC_KNOTS {
            let a = k as f64 * h;
            acc += path.integrate_speed(a, a + h, tol);
            path.cumulative.push(acc);
        }
        path.arc_length = acc;
        path
    }

    pub fn from_geometry(geom: &LaneGeometry) -> Result<Self> {
        let p_int = intermediate_control_point(geom)?;
        Ok(LaneExitPath::new(geom.p_i, p_int, geom.p_f))
    }

    pub fn p_i(&self) -> Vec2 {
        self.p_i
    }

    pub fn p_int(&self) -> Vec2 {
        self.p_int
    }

    pub fn p_f(&self) -> Vec2 {
        self.p_f
    }

    pub fn arc_length(&self) -> f64 {
        self.arc_length
    }

    /// Triangle of the control points (a segment when they are collinear).
    pub fn convex_hull(&self) -> &ConvexPolygon {
        &self.hull
    }

    pub fn evaluate(&self, tau: f64) -> Result<Vec2> {
        check_tau(tau)?;
        Ok(self.point(tau))
    }

    fn point(&self, tau: f64) -> Vec2 {
        if tau == 0.0 {
            return self.p_i;
        }
        if tau == 1.0 {
            return self.p_f;
        }
        let s = 1.0 - tau;
        self.p_i * (s * s) + self.p_int * (2.0 * tau * s) + self.p_f * (tau * tau)
    }

    /// dX/dτ.
    pub fn derivative(&self, tau: f64) -> Vec2 {
        self.p_i * (-2.0 * (1.0 - tau)) + self.p_int * (2.0 * (1.0 - 2.0 * tau)) + self.p_f * (2.0 * tau)
    }

    /// Angle of the tangent vector at `tau`.
    pub fn heading(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        let d = self.derivative(tau);
        if d.norm() < MIN_DERIVATIVE {
            return Err(Error::UndefinedHeading(tau));
        }
        Ok(d.angle())
    }

    /// Time to traverse the whole path at constant speed `v_e`.
    pub fn traversal_time(&self, v_e: f64) -> Result<f64> {
        if !(v_e > 0.0) {
            return Err(Error::NonPositiveSpeed(v_e));
        }
        Ok(self.arc_length / v_e)
    }

    /// Curve parameter at which the arc length measured from `p_i` equals `s`.
    pub fn arc_length_to_tau(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0 && s <= self.arc_length) {
            return Err(Error::ArcLengthOutOfRange {
                s,
                total: self.arc_length,
            });
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        if s == self.arc_length {
            return Ok(1.0);
        }
        let k = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => return Ok(i as f64 / ARC_KNOTS as f64),
            Err(i) => i - 1,
        };
        let h = 1.0 / ARC_KNOTS as f64;
        let (mut lo, mut hi) = (k as f64 * h, (k + 1) as f64 * h);
        let base = self.cumulative[k];
        let span = self.cumulative[k + 1] - base;
        if span <= 0.0 {
            return Ok(lo);
        }
        let target = s - base;
        let t0 = lo;
        let mut tau = lo + h * (target / span);
        for _ in 0..100 {
            let f = self.integrate_speed(t0, tau, 1e-14) - target;
            if f.abs() < 1e-11 {
                break;
            }
            if f < 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            let speed = self.derivative(tau).norm();
            let newton = tau - f / speed;
            tau = if speed > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 {
                break;
            }
        }
        Ok(tau)
    }

    /// Arc length between `0` and `tau`.
    pub fn arc_length_at(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        let h = 1.0 / ARC_KNOTS as f64;
        let k = ((tau / h).floor() as usize).min(ARC_KNOTS - 1);
        Ok(self.cumulative[k] + self.integrate_speed(k as f64 * h, tau, 1e-14))
    }

    fn integrate_speed(&self, a: f64, b: f64, tol: f64) -> f64 {
        let f = |t: f64| self.derivative(t).norm();
        adaptive_simpson(&f, a, b, tol)
    }

    /// Write `n + 1` evenly spaced curve samples as `tau,x_m,y_m`.
    pub fn write_polyline_csv<W: Write>(&self, n: usize, mut out: W) -> Result<()> {
        writeln!(out, "tau,x_m,y_m")?;
        let n = n.max(1);
        for k in 0..=n {
            let tau = k as f64 / n as f64;
            let p = self.point(tau);
            writeln!(out, "{},{},{}", tau, p.x, p.y)?;
        }
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::TauOutOfRange(tau))
    }
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 40)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn first_geometry() -> LaneGeometry {
        LaneGeometry {
            p_i: Vec2::new(2.5, -2.7),
            p_f: Vec2::new(11.65, 6.95),
            theta_i: 0.0,
            theta_f: FRAC_PI_2,
        }
    }

    fn trapezoid_length(p: &LaneExitPath, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut sum = 0.5 * (p.derivative(a).norm() + p.derivative(b).norm());
        for k in 1..n {
            sum += p.derivative(a + k as f64 * h).norm();
        }
        sum * h
    }

    #[test]
    fn control_point_first_intersection() {
        let p = intermediate_control_point(&first_geometry()).unwrap();
        assert_eq!(p, Vec2::new(11.65, -2.7));
    }

    #[test]
    fn control_point_second_intersection() {
        let p_i = Vec2::new(11.65, 20.2);
        let p_f = Vec2::new(2.98, 33.2);
        let geom = LaneGeometry {
            p_i,
            p_f,
            theta_i: FRAC_PI_2,
            theta_f: (33.2f64 - 28.2).atan2(2.98 - 11.65),
        };
        let p = intermediate_control_point(&geom).unwrap();
        assert!((p.x - 11.65).abs() < 1e-9 && (p.y - 28.2).abs() < 1e-9, "{p:?}");
    }

    #[test]
    fn control_point_matches_tangent_formula() {
        let geom = LaneGeometry {
            p_i: Vec2::new(0.0, 0.0),
            p_f: Vec2::new(10.0, 8.0),
            theta_i: 0.3,
            theta_f: 1.2,
        };
        let (ti, tf) = (geom.theta_i.tan(), geom.theta_f.tan());
        let x = (geom.p_f.y - geom.p_i.y + geom.p_i.x * ti - geom.p_f.x * tf) / (ti - tf);
        let y = geom.p_i.y + (x - geom.p_i.x) * ti;
        let p = intermediate_control_point(&geom).unwrap();
        assert!((p.x - x).abs() < 1e-9 && (p.y - y).abs() < 1e-9);
    }

    #[test]
    fn parallel_lanes_rejected() {
        let mut g = first_geometry();
        g.theta_f = 0.0;
        assert_eq!(intermediate_control_point(&g), Err(Error::ParallelLanes));
        g.theta_f = PI;
        assert_eq!(intermediate_control_point(&g), Err(Error::ParallelLanes));
    }

    #[test]
    fn evaluation_and_headings() {
        let p = LaneExitPath::from_geometry(&first_geometry()).unwrap();
        assert_eq!(p.evaluate(0.0).unwrap(), p.p_i());
        assert_eq!(p.evaluate(1.0).unwrap(), p.p_f());
        let mid = p.evaluate(0.5).unwrap();
        let want = p.p_i() * 0.25 + p.p_int() * 0.5 + p.p_f() * 0.25;
        assert!(mid.distance(want) < 1e-12);
        assert!(p.evaluate(1.5).is_err());
        assert!(p.heading(0.0).unwrap().abs() < 1e-12);
        assert!((p.heading(1.0).unwrap() - FRAC_PI_2).abs() < 1e-12);
        // derivative at 0.5 is p_f − p_i = (9.15, 9.65)
        assert!((p.heading(0.5).unwrap() - 9.65f64.atan2(9.15)).abs() < 1e-12);
    }

    #[test]
    fn cusp_has_no_heading() {
        // p_int beyond p_f on the same line: derivative vanishes at tau = 2/3
        let p = LaneExitPath::new(Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(1.0, 0.0));
        assert!(matches!(p.heading(2.0 / 3.0), Err(Error::UndefinedHeading(_))));
    }

    #[test]
    fn straight_path_length_is_chord() {
        let p = LaneExitPath::new(Vec2::new(0.0, 0.0), Vec2::new(3.0, 4.0), Vec2::new(6.0, 8.0));
        assert!((p.arc_length() - 10.0).abs() < 1e-9);
        assert!((p.traversal_time(2.0).unwrap() - 5.0).abs() < 1e-9);
        let tau = p.arc_length_to_tau(5.0).unwrap();
        assert!(p.evaluate(tau).unwrap().distance(Vec2::new(3.0, 4.0)) < 1e-6);
        assert_eq!(p.convex_hull().len(), 2);
    }

    #[test]
    fn arc_length_matches_trapezoid_oracle() {
        let p = LaneExitPath::from_geometry(&first_geometry()).unwrap();
        let oracle = trapezoid_length(&p, 0.0, 1.0, 1_000_000);
        assert!((p.arc_length() - oracle).abs() < 1e-6, "{} vs {oracle}", p.arc_length());
        let t = p.traversal_time(7.0).unwrap();
        assert!((t - oracle / 7.0).abs() < 1e-7);
        assert!((p.traversal_time(14.0).unwrap() * 2.0 - t).abs() < 1e-12);
        assert!(p.traversal_time(0.0).is_err());
    }

    #[test]
    fn arc_length_inversion() {
        let p = LaneExitPath::from_geometry(&first_geometry()).unwrap();
        assert_eq!(p.arc_length_to_tau(0.0).unwrap(), 0.0);
        assert_eq!(p.arc_length_to_tau(p.arc_length()).unwrap(), 1.0);
        assert!(p.arc_length_to_tau(-0.1).is_err());
        assert!(p.arc_length_to_tau(p.arc_length() + 0.1).is_err());
        let mut prev = 0.0;
        for k in 1..200 {
            let s = p.arc_length() * k as f64 / 200.0;
            let tau = p.arc_length_to_tau(s).unwrap();
            assert!(tau > prev);
            prev = tau;
            let back = trapezoid_length(&p, 0.0, tau, 20_000);
            assert!((back - s).abs() < 1e-6, "{back} vs {s}");
        }
    }

    #[test]
    fn hull_contains_curve() {
        let p = LaneExitPath::from_geometry(&first_geometry()).unwrap();
        let v = p.convex_hull().vertices();
        assert_eq!(v.len(), 3);
        for want in [Vec2::new(2.5, -2.7), Vec2::new(11.65, -2.7), Vec2::new(11.65, 6.95)] {
            assert!(v.contains(&want));
        }
        for k in 0..=10_000 {
            let q = p.evaluate(k as f64 / 10_000.0).unwrap();
            assert!(p.convex_hull().contains(q, 1e-9));
        }
    }

    #[test]
    fn polyline_export() {
        let p = LaneExitPath::from_geometry(&first_geometry()).unwrap();
        let mut buf = Vec::new();
        p.write_polyline_csv(4, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "tau,x_m,y_m");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], "0,2.5,-2.7");
    }
}
