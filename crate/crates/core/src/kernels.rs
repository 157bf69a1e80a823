//! Closed-form kernels for the splitting method: the segment Green's
//! kernel, its gradient, the infinite-line logarithm, the axial extension of
//! an intensity profile, and the correction right-hand sides built from them.
//!
//! For a segment from `a` to `b` with unit tangent tau and length L, the
//! kernel is the line potential
//!
//!     G(x) = int_0^L dt / |x - a - tau t|
//!          = ln( (r_b + L - s) / (r_a - s) ),        s = (x - a) . tau,
//!
//! with r_a = |x - a| and r_b = |x - b|.  The logarithm form cancels
//! catastrophically for s > L/2, where the algebraically equivalent conjugate
//! form ln((r_a + s) / (r_b + s - L)) is used instead (both follow from
//! (r_a - s)(r_a + s) = r^2 = (r_b + L - s)(r_b + s - L), r the distance to
//! the segment axis).

use std::sync::atomic::{AtomicU64, Ordering};

use crate::geometry::{IntensityProfile, LineNetwork, Point3, Segment};
use crate::{Error, Result};

pub const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Evaluation policy near the source line.  Points closer to a segment than
/// `clamp_dist` are moved radially out to that distance before evaluating;
/// every such event bumps the shared counter.  With `clamp_dist == 0`,
/// on-segment evaluations fail with `NonFiniteEvaluation` instead.
#[derive(Debug)]
pub struct KernelConfig {
    clamp_dist: f64,
    clamps: AtomicU64,
}

impl KernelConfig {
    pub fn new(clamp_dist: f64) -> KernelConfig {
        assert!(clamp_dist >= 0.0 && clamp_dist.is_finite());
        KernelConfig {
            clamp_dist,
            clamps: AtomicU64::new(0),
        }
    }

    /// No clamping: evaluation on a segment is an error.
    pub fn strict() -> KernelConfig {
        KernelConfig::new(0.0)
    }

    /// Default clamp distance for a domain of the given diameter.
    pub fn for_domain(diameter: f64) -> KernelConfig {
        KernelConfig::new(1e-12 * diameter)
    }

    pub fn clamp_dist(&self) -> f64 {
        self.clamp_dist
    }

    /// Number of clamped evaluations since construction (or last reset).
    pub fn clamp_count(&self) -> u64 {
        self.clamps.load(Ordering::Relaxed)
    }

    pub fn reset_clamp_count(&self) {
        self.clamps.store(0, Ordering::Relaxed);
    }
}

impl Default for KernelConfig {
    /// Clamp distance for a unit-box domain (diameter sqrt(3)).
    fn default() -> KernelConfig {
        KernelConfig::for_domain(3.0_f64.sqrt())
    }
}

/// A unit direction orthogonal to `tau`, chosen deterministically.
fn any_perpendicular(tau: Point3) -> Point3 {
    let cands = [
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
    ];
    let mut best = cands[0];
    let mut best_dot = f64::INFINITY;
    for e in cands {
        let d = tau.dot(e).abs();
        if d < best_dot {
            best_dot = d;
            best = e;
        }
    }
    (best - tau * tau.dot(best)).normalized().expect("tau is a unit vector")
}

/// The point at which the kernels are actually evaluated: `x` itself when it
/// keeps `clamp_dist` away from the closed segment, otherwise `x` pushed
/// radially to that distance.  Errors when `x` sits on the segment and no
/// clamp distance is available.
fn effective_point(seg: &Segment, x: Point3, cfg: &KernelConfig) -> Result<Point3> {
    let d = seg.distance(x);
    if d >= cfg.clamp_dist && d > 0.0 {
        return Ok(x);
    }
    if cfg.clamp_dist == 0.0 {
        return Err(Error::NonFiniteEvaluation(x.x, x.y, x.z));
    }
    let foot = seg.closest_point(x);
    // The offset of x from its foot is only a trustworthy direction when it
    // clears the roundoff left by the projection; otherwise the point is on
    // the segment for all practical purposes and any radial direction gives
    // the same kernel value.
    let delta = x - foot;
    let dir = if delta.norm() > 1e-12 * seg.length() {
        delta * (1.0 / delta.norm())
    } else {
        any_perpendicular(seg.tau())
    };
    cfg.clamps.fetch_add(1, Ordering::Relaxed);
    Ok(foot + dir * cfg.clamp_dist)
}

/// The differences `r_a - s` and `r_b - (L - s)` evaluated stably.
///
/// Near the axis both shrink like `r_perp^2 / 2s`, far below what direct
/// subtraction of the almost-equal operands resolves, so when the sign
/// pattern cancels they are computed through the exact identity
/// `r_a - s = r_perp^2 / (r_a + s)` (and its mirror at the other endpoint).
fn stable_diffs(seg: &Segment, x: Point3) -> (f64, f64) {
    let l = seg.length();
    let s = seg.project_arclength(x);
    let (ra, rb) = seg.endpoint_distances(x);
    let u = l - s;
    let rp = seg.axis_distance(x);
    let rp2 = rp * rp;
    let da = if s <= 0.0 { ra - s } else { rp2 / (ra + s) };
    let db = if u <= 0.0 { rb - u } else { rp2 / (rb + u) };
    (da, db)
}

/// Segment Green's kernel G(x); see the module docs for the formula and the
/// stabilized branch choice.
pub fn green_segment(seg: &Segment, x: Point3, cfg: &KernelConfig) -> Result<f64> {
    let x = effective_point(seg, x, cfg)?;
    let l = seg.length();
    let s = seg.project_arclength(x);
    let (ra, rb) = seg.endpoint_distances(x);
    let (da, db) = stable_diffs(seg, x);
    let v = if s <= 0.5 * l {
        ((rb + l - s) / da).ln()
    } else {
        ((ra + s) / db).ln()
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteEvaluation(x.x, x.y, x.z))
    }
}

/// Gradient of the segment Green's kernel.  Differentiating either logarithm
/// branch gives a difference of two rational terms; both branches are kept so
/// the gradient stays stable wherever G does.
pub fn grad_green_segment(seg: &Segment, x: Point3, cfg: &KernelConfig) -> Result<Point3> {
    let x = effective_point(seg, x, cfg)?;
    let l = seg.length();
    let tau = seg.tau();
    let s = seg.project_arclength(x);
    let (ra, rb) = seg.endpoint_distances(x);
    let ea = (x - seg.a()) * (1.0 / ra);
    let eb = (x - seg.b()) * (1.0 / rb);
    let (da, db) = stable_diffs(seg, x);
    let g = if s <= 0.5 * l {
        // d/dx ln(r_b + L - s) - d/dx ln(r_a - s)
        (eb - tau) * (1.0 / (rb + l - s)) - (ea - tau) * (1.0 / da)
    } else {
        // d/dx ln(r_a + s) - d/dx ln(r_b + s - L)
        (ea + tau) * (1.0 / (ra + s)) - (eb + tau) * (1.0 / db)
    };
    if g.is_finite() {
        Ok(g)
    } else {
        Err(Error::NonFiniteEvaluation(x.x, x.y, x.z))
    }
}

/// Kernel of an infinite line through `point` with direction `dir`:
/// G(x) = ln r with r the distance to the line.
pub fn green_infinite_line(
    point: Point3,
    dir: Point3,
    x: Point3,
    cfg: &KernelConfig,
) -> Result<f64> {
    let dir = dir
        .normalized()
        .ok_or_else(|| Error::invalid("infinite line needs a nonzero direction"))?;
    let d = x - point;
    let s = d.dot(dir);
    // Perpendicular component as a vector; |d|^2 - s^2 would cancel.
    let mut r = (d - dir * s).norm();
    if r < cfg.clamp_dist {
        if cfg.clamp_dist == 0.0 {
            return Err(Error::NonFiniteEvaluation(x.x, x.y, x.z));
        }
        cfg.clamps.fetch_add(1, Ordering::Relaxed);
        r = cfg.clamp_dist;
    }
    let v = r.ln();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteEvaluation(x.x, x.y, x.z))
    }
}

/// Axial extension of an intensity profile: E(f)(x) = f(P(x)) with P the
/// unclamped arclength projection onto the segment's elongation.  Returns
/// (E(f)(x), f'(P(x)), f''(P(x))).
pub fn extension_eval(seg: &Segment, f: &IntensityProfile, x: Point3) -> (f64, f64, f64) {
    let p = seg.project_arclength(x);
    (f.eval(p), f.deriv1(p), f.deriv2(p))
}

/// Correction right-hand side for a single segment with unit conductivity:
///
///     F = Lap(E(f)) G + 2 grad(E(f)) . grad(G)
///       = f''(P(x)) G + 2 f'(P(x)) (1/r_a - 1/r_b),
///
/// using grad(E(f)) = f' tau and tau . grad(G) = 1/r_a - 1/r_b.
pub fn correction_rhs_segment(
    seg: &Segment,
    f: &IntensityProfile,
    x: Point3,
    cfg: &KernelConfig,
) -> Result<f64> {
    let xe = effective_point(seg, x, cfg)?;
    let (_, f1, f2) = extension_eval(seg, f, xe);
    let g = green_segment(seg, xe, cfg)?;
    let (ra, rb) = seg.endpoint_distances(xe);
    let v = f2 * g + 2.0 * f1 * (1.0 / ra - 1.0 / rb);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteEvaluation(x.x, x.y, x.z))
    }
}

/// Spatially varying conductivity with its first two derivative fields.
pub struct CoefficientBundle {
    pub kappa: Box<dyn Fn(Point3) -> f64 + Send + Sync>,
    pub grad_kappa: Box<dyn Fn(Point3) -> Point3 + Send + Sync>,
    pub lap_kappa: Box<dyn Fn(Point3) -> f64 + Send + Sync>,
}

impl CoefficientBundle {
    pub fn constant(k: f64) -> CoefficientBundle {
        CoefficientBundle {
            kappa: Box::new(move |_| k),
            grad_kappa: Box::new(|_| Point3::ZERO),
            lap_kappa: Box::new(|_| 0.0),
        }
    }
}

/// Correction right-hand side for one segment with variable conductivity.
/// Writing E = E(f), the singular term of the splitting is E G / kappa and
/// the correction w must absorb everything its flux divergence produces away
/// from the line:
///
///     F = [Lap E - (E Lap k + grad E . grad k)/k + E |grad k|^2 / k^2] G
///       + [2 grad E - E grad k / k] . grad G.
///
/// With constant kappa this reduces to the unit-conductivity form above.
pub fn correction_rhs_variable_kappa(
    seg: &Segment,
    f: &IntensityProfile,
    x: Point3,
    coeff: &CoefficientBundle,
    cfg: &KernelConfig,
) -> Result<f64> {
    let xe = effective_point(seg, x, cfg)?;
    let k = (coeff.kappa)(xe);
    if !(k > 0.0) {
        return Err(Error::NonPositiveKappa(x.x, x.y, x.z));
    }
    let gk = (coeff.grad_kappa)(xe);
    let lk = (coeff.lap_kappa)(xe);
    let (e, f1, f2) = extension_eval(seg, f, xe);
    let grad_e = seg.tau() * f1;
    let g = green_segment(seg, xe, cfg)?;
    let grad_g = grad_green_segment(seg, xe, cfg)?;
    let coeff_g = f2 - (e * lk + grad_e.dot(gk)) / k + e * gk.norm_sq() / (k * k);
    let coeff_grad_g = grad_e * 2.0 - gk * (e / k);
    let v = coeff_g * g + coeff_grad_g.dot(grad_g);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteEvaluation(x.x, x.y, x.z))
    }
}

/// Singular part of the solution for a network with unit conductivity:
/// (1/4pi) sum_i E_i(f) G_i.
pub fn singular_part(net: &LineNetwork, x: Point3, cfg: &KernelConfig) -> Result<f64> {
    let mut acc = 0.0;
    for (seg, f) in net.iter() {
        let (e, _, _) = extension_eval(seg, f, x);
        acc += e * green_segment(seg, x, cfg)?;
    }
    Ok(acc / FOUR_PI)
}

/// Gradient of the singular part: (1/4pi) sum_i (f_i' tau_i G_i + E_i grad G_i).
pub fn grad_singular_part(net: &LineNetwork, x: Point3, cfg: &KernelConfig) -> Result<Point3> {
    let mut acc = Point3::ZERO;
    for (seg, f) in net.iter() {
        let (e, f1, _) = extension_eval(seg, f, x);
        let g = green_segment(seg, x, cfg)?;
        let gg = grad_green_segment(seg, x, cfg)?;
        acc = acc + seg.tau() * (f1 * g) + gg * e;
    }
    Ok(acc * (1.0 / FOUR_PI))
}

/// Dirichlet data for the correction problem: w = 4pi u_D - sum_i E_i(f) G_i
/// on the boundary, so that u = (1/4pi)(sum_i E_i(f) G_i + w) matches u_D.
pub fn dirichlet_data_w(
    u_d: &(dyn Fn(Point3) -> f64 + Sync),
    net: &LineNetwork,
    x: Point3,
    cfg: &KernelConfig,
) -> Result<f64> {
    Ok(FOUR_PI * u_d(x) - FOUR_PI * singular_part(net, x, cfg)?)
}
