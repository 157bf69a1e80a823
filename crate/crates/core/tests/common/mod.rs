//! Helpers shared by the integration suites: seeded geometry generators and
//! reference numerics kept deliberately independent of the library's own
//! quadrature and kernel code.
#![allow(dead_code)]

use linesource::geometry::{Point3, Segment};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Point3 {
    Point3::new(
        rng.gen_range(lo..hi),
        rng.gen_range(lo..hi),
        rng.gen_range(lo..hi),
    )
}

/// A random non-degenerate segment inside the unit box.
pub fn rand_segment(rng: &mut ChaCha8Rng) -> Segment {
    loop {
        let a = rand_point(rng, 0.08, 0.92);
        let b = rand_point(rng, 0.08, 0.92);
        if a.dist(b) > 0.05 {
            return Segment::new(a, b).expect("distinct endpoints");
        }
    }
}

/// A random point at least `min_dist` away from `seg`.
pub fn point_off_segment(rng: &mut ChaCha8Rng, seg: &Segment, min_dist: f64) -> Point3 {
    loop {
        let p = rand_point(rng, 0.0, 1.0);
        if seg.distance(p) > min_dist {
            return p;
        }
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_step(
    f: &dyn Fn(f64) -> f64,
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
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() < 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`; an oracle independent of the library's Gauss rules.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    adaptive_step(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Central-difference gradient.
pub fn fd_grad(f: &dyn Fn(Point3) -> f64, p: Point3, h: f64) -> Point3 {
    let dx = Point3::new(h, 0.0, 0.0);
    let dy = Point3::new(0.0, h, 0.0);
    let dz = Point3::new(0.0, 0.0, h);
    Point3::new(
        (f(p + dx) - f(p - dx)) / (2.0 * h),
        (f(p + dy) - f(p - dy)) / (2.0 * h),
        (f(p + dz) - f(p - dz)) / (2.0 * h),
    )
}

/// Seven-point finite-difference Laplacian.
pub fn fd_laplacian(f: &dyn Fn(Point3) -> f64, p: Point3, h: f64) -> f64 {
    let mut acc = -6.0 * f(p);
    for d in [
        Point3::new(h, 0.0, 0.0),
        Point3::new(-h, 0.0, 0.0),
        Point3::new(0.0, h, 0.0),
        Point3::new(0.0, -h, 0.0),
        Point3::new(0.0, 0.0, h),
        Point3::new(0.0, 0.0, -h),
    ] {
        acc += f(p + d);
    }
    acc / (h * h)
}
