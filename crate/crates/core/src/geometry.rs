//! Points, segments, polynomial intensity profiles, and line networks.

use std::ops::{Add, Mul, Neg, Sub};

use crate::{Error, Result};

/// A point (or vector) in R^3.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub const ZERO: Point3 = Point3::new(0.0, 0.0, 0.0);

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    /// Returns the unit vector in this direction; `None` for (near-)zero input.
    pub fn normalized(self) -> Option<Point3> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self * (1.0 / n))
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// An oriented line segment from `a` to `b` with cached length and unit
/// tangent.  Construction fails for (near-)zero length, so `length > 0` and
/// `|tau| = 1` hold for every existing value.
#[derive(Clone, Debug)]
pub struct Segment {
    a: Point3,
    b: Point3,
    length: f64,
    tau: Point3,
}

impl Segment {
    pub fn new(a: Point3, b: Point3) -> Result<Segment> {
        let d = b - a;
        let len = d.norm();
        let scale = a.max_abs().max(b.max_abs()).max(1.0);
        if !(len > 1e-14 * scale) || !len.is_finite() {
            return Err(Error::DegenerateSegment(len));
        }
        Ok(Segment {
            a,
            b,
            length: len,
            tau: d * (1.0 / len),
        })
    }

    pub fn a(&self) -> Point3 {
        self.a
    }

    pub fn b(&self) -> Point3 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn tau(&self) -> Point3 {
        self.tau
    }

    /// Point at arclength `t` from `a` (not clamped to the segment).
    pub fn point_at(&self, t: f64) -> Point3 {
        self.a + self.tau * t
    }

    /// Arclength of the orthogonal projection of `x` onto the elongation of
    /// the segment.  Negative before `a`, greater than `length` beyond `b`.
    pub fn project_arclength(&self, x: Point3) -> f64 {
        (x - self.a).dot(self.tau)
    }

    /// (|x - a|, |x - b|).
    pub fn endpoint_distances(&self, x: Point3) -> (f64, f64) {
        (x.dist(self.a), x.dist(self.b))
    }

    /// Distance from `x` to the infinite line through the segment.  The
    /// perpendicular component is formed as a vector rather than via
    /// `|d|^2 - s^2`, which would cancel catastrophically near the axis.
    pub fn axis_distance(&self, x: Point3) -> f64 {
        let d = x - self.a;
        let s = d.dot(self.tau);
        (d - self.tau * s).norm()
    }

    /// Distance from `x` to the closed segment (projection clamped to the
    /// endpoints).
    pub fn distance(&self, x: Point3) -> f64 {
        let s = self.project_arclength(x).clamp(0.0, self.length);
        x.dist(self.point_at(s))
    }

    /// Closest point of the closed segment to `x`.
    pub fn closest_point(&self, x: Point3) -> Point3 {
        let s = self.project_arclength(x).clamp(0.0, self.length);
        self.point_at(s)
    }
}

/// Polynomial source intensity f(t) in the arclength parameter of a segment,
/// stored as coefficients `c[0] + c[1] t + c[2] t^2 + ...`.
#[derive(Clone, Debug)]
pub struct IntensityProfile {
    coeffs: Vec<f64>,
}

impl IntensityProfile {
    pub fn new(coeffs: Vec<f64>) -> IntensityProfile {
        let mut coeffs = coeffs;
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        IntensityProfile { coeffs }
    }

    pub fn constant(c: f64) -> IntensityProfile {
        IntensityProfile::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut v = 0.0;
        for &c in self.coeffs.iter().rev() {
            v = v * t + c;
        }
        v
    }

    /// First derivative f'(t).
    pub fn deriv1(&self, t: f64) -> f64 {
        let mut v = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            v = v * t + c * k as f64;
        }
        v
    }

    /// Second derivative f''(t).
    pub fn deriv2(&self, t: f64) -> f64 {
        let mut v = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(2).rev() {
            v = v * t + c * (k * (k - 1)) as f64;
        }
        v
    }

    /// Integral of f over [0, t].
    pub fn integral(&self, t: f64) -> f64 {
        let mut v = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            v = v * t + c / (k + 1) as f64;
        }
        v * t
    }
}

/// A collection of source segments with per-segment intensity profiles,
/// radii and intensity factors (gamma).  Radii and gammas default to 1 and
/// enter only the modelling-error indicator and the network studies.
#[derive(Clone, Debug, Default)]
pub struct LineNetwork {
    segments: Vec<Segment>,
    profiles: Vec<IntensityProfile>,
    radii: Vec<f64>,
    gammas: Vec<f64>,
}

impl LineNetwork {
    pub fn new() -> LineNetwork {
        LineNetwork::default()
    }

    pub fn single(seg: Segment, profile: IntensityProfile) -> LineNetwork {
        let mut n = LineNetwork::new();
        n.push(seg, profile, 1.0, 1.0);
        n
    }

    pub fn push(&mut self, seg: Segment, profile: IntensityProfile, radius: f64, gamma: f64) {
        self.segments.push(seg);
        self.profiles.push(profile);
        self.radii.push(radius);
        self.gammas.push(gamma);
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segment(&self, i: usize) -> &Segment {
        &self.segments[i]
    }

    pub fn profile(&self, i: usize) -> &IntensityProfile {
        &self.profiles[i]
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    pub fn gamma(&self, i: usize) -> f64 {
        self.gammas[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Segment, &IntensityProfile)> {
        self.segments.iter().zip(self.profiles.iter())
    }

    /// Network restricted to the given segment indices (order preserved).
    pub fn subset(&self, keep: &[usize]) -> LineNetwork {
        let mut n = LineNetwork::new();
        for &i in keep {
            n.push(
                self.segments[i].clone(),
                self.profiles[i].clone(),
                self.radii[i],
                self.gammas[i],
            );
        }
        n
    }
}
