//! Uniform-bin spatial index over cells, point location, and clipping of
//! line segments into per-cell subsegments.

use super::{BoxBounds, CellShape, Mesh};
use crate::geometry::{Point3, Segment};
use crate::{Error, Result};

/// Relative slack on local cell coordinates used for containment and
/// clipping.  Intervals are expanded by this much so that adjacent cells
/// overlap slightly rather than leaving roundoff gaps at shared faces.
const BARY_SLACK: f64 = 1e-10;

/// Uniform spatial binning of cells by bounding box.  Bin resolution is
/// chosen per axis from the average cell extent, so structured meshes get
/// close to one layer of cells per bin.
pub struct CellIndex {
    origin: Point3,
    inv_size: [f64; 3],
    dims: [usize; 3],
    bins: Vec<Vec<u32>>,
    /// Mesh bounding box, cached so point queries stay O(1).
    bounds: BoxBounds,
    /// Absolute tolerance for near-boundary queries.
    tol: f64,
}

impl CellIndex {
    pub fn build(mesh: &Mesh) -> CellIndex {
        let bounds = mesh.bounds();
        let extent = bounds.extent();
        let n_cells = mesh.n_cells();

        let mut avg = [0.0f64; 3];
        for c in 0..n_cells {
            let (lo, hi) = cell_bbox(mesh, c);
            let e = hi - lo;
            avg[0] += e.x;
            avg[1] += e.y;
            avg[2] += e.z;
        }
        let ext = [extent.x, extent.y, extent.z];
        let mut dims = [1usize; 3];
        for ax in 0..3 {
            let mean = avg[ax] / n_cells.max(1) as f64;
            let d = if mean > 0.0 { (ext[ax] / mean).round() } else { 1.0 };
            dims[ax] = (d as usize).clamp(1, 256);
        }
        let inv_size = [
            dims[0] as f64 / ext[0],
            dims[1] as f64 / ext[1],
            dims[2] as f64 / ext[2],
        ];

        let mut index = CellIndex {
            origin: bounds.min,
            inv_size,
            dims,
            bins: vec![Vec::new(); dims[0] * dims[1] * dims[2]],
            tol: 1e-9 * bounds.diameter(),
            bounds,
        };
        for c in 0..n_cells {
            let (lo, hi) = cell_bbox(mesh, c);
            // Nudge inward by a hair in index units so cells aligned with
            // bin boundaries land in a single bin instead of two.
            let (il, ih) = index.bin_range(lo, hi, -1e-9);
            for kz in il[2]..=ih[2] {
                for ky in il[1]..=ih[1] {
                    for kx in il[0]..=ih[0] {
                        index.bins[(kz * dims[1] + ky) * dims[0] + kx].push(c as u32);
                    }
                }
            }
        }
        index
    }

    /// Per-axis inclusive bin ranges covering the box `[lo, hi]`, with the
    /// box first grown by `inflate` in index units (negative shrinks).
    fn bin_range(&self, lo: Point3, hi: Point3, inflate: f64) -> ([usize; 3], [usize; 3]) {
        let l = [
            (lo.x - self.origin.x) * self.inv_size[0] - inflate,
            (lo.y - self.origin.y) * self.inv_size[1] - inflate,
            (lo.z - self.origin.z) * self.inv_size[2] - inflate,
        ];
        let h = [
            (hi.x - self.origin.x) * self.inv_size[0] + inflate,
            (hi.y - self.origin.y) * self.inv_size[1] + inflate,
            (hi.z - self.origin.z) * self.inv_size[2] + inflate,
        ];
        let mut il = [0usize; 3];
        let mut ih = [0usize; 3];
        for ax in 0..3 {
            let top = self.dims[ax] as f64 - 1.0;
            il[ax] = l[ax].floor().clamp(0.0, top) as usize;
            ih[ax] = h[ax].floor().clamp(0.0, top) as usize;
            if ih[ax] < il[ax] {
                ih[ax] = il[ax];
            }
        }
        (il, ih)
    }

    /// Sorted unique candidate cells whose bins overlap the box
    /// `[lo - tol, hi + tol]`.
    fn box_candidates(&self, lo: Point3, hi: Point3) -> Vec<u32> {
        let pad = Point3::new(self.tol, self.tol, self.tol);
        let (il, ih) = self.bin_range(lo - pad, hi + pad, 0.0);
        let mut out = Vec::new();
        for kz in il[2]..=ih[2] {
            for ky in il[1]..=ih[1] {
                for kx in il[0]..=ih[0] {
                    out.extend_from_slice(&self.bins[(kz * self.dims[1] + ky) * self.dims[0] + kx]);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Cell containing `x`, or `None`.  When `x` sits on a shared face the
    /// cell with the lowest id wins.
    pub fn locate(&self, mesh: &Mesh, x: Point3) -> Option<usize> {
        if !self.bounds.contains(x, self.tol) {
            return None;
        }
        for c in self.box_candidates(x, x) {
            let shape = CellShape::new(mesh, c as usize);
            if shape.contains(x, BARY_SLACK) {
                return Some(c as usize);
            }
        }
        None
    }

    /// Sorted unique cells whose bins the segment passes through.
    pub fn segment_candidates(&self, seg: &Segment) -> Vec<u32> {
        let (a, b) = (seg.a(), seg.b());
        let lo = Point3::new(a.x.min(b.x), a.y.min(b.y), a.z.min(b.z));
        let hi = Point3::new(a.x.max(b.x), a.y.max(b.y), a.z.max(b.z));
        let pad = Point3::new(self.tol, self.tol, self.tol);
        let (il, ih) = self.bin_range(lo - pad, hi + pad, 0.0);

        let mut out = Vec::new();
        for kz in il[2]..=ih[2] {
            for ky in il[1]..=ih[1] {
                for kx in il[0]..=ih[0] {
                    let bin_lo = Point3::new(
                        self.origin.x + kx as f64 / self.inv_size[0],
                        self.origin.y + ky as f64 / self.inv_size[1],
                        self.origin.z + kz as f64 / self.inv_size[2],
                    );
                    let bin_hi = Point3::new(
                        self.origin.x + (kx + 1) as f64 / self.inv_size[0],
                        self.origin.y + (ky + 1) as f64 / self.inv_size[1],
                        self.origin.z + (kz + 1) as f64 / self.inv_size[2],
                    );
                    if segment_hits_box(seg, bin_lo - pad, bin_hi + pad) {
                        out.extend_from_slice(
                            &self.bins[(kz * self.dims[1] + ky) * self.dims[0] + kx],
                        );
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn cell_bbox(mesh: &Mesh, c: usize) -> (Point3, Point3) {
    let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = lo * -1.0;
    for &n in mesh.cell(c) {
        let p = mesh.nodes()[n];
        lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    (lo, hi)
}

fn segment_hits_box(seg: &Segment, lo: Point3, hi: Point3) -> bool {
    let a = seg.a();
    let tau = seg.tau();
    let (mut t0, mut t1) = (0.0f64, seg.length());
    for ax in 0..3 {
        let (o, d, l, h) = match ax {
            0 => (a.x, tau.x, lo.x, hi.x),
            1 => (a.y, tau.y, lo.y, hi.y),
            _ => (a.z, tau.z, lo.z, hi.z),
        };
        if d.abs() < 1e-14 {
            if o < l || o > h {
                return false;
            }
        } else {
            let (mut u0, mut u1) = ((l - o) / d, (h - o) / d);
            if u0 > u1 {
                std::mem::swap(&mut u0, &mut u1);
            }
            t0 = t0.max(u0);
            t1 = t1.min(u1);
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// One piece of a clipped segment: arclength interval `[t0, t1]` inside
/// cell `cell`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubSegment {
    pub cell: usize,
    pub t0: f64,
    pub t1: f64,
}

/// Splits `seg` into per-cell subsegments covering all of `[0, len]`.
///
/// Subsegments are sorted by `t0`, pairwise disjoint, each longer than
/// `1e-12` of the segment length, and cover the segment with a relative gap
/// below `1e-9`.  Wherever several cells contain a piece (the segment runs
/// along a shared face), the lowest cell id wins, so the result does not
/// depend on candidate enumeration order.  Fails with
/// [`Error::SegmentOutsideMesh`] if part of the segment lies outside the
/// mesh.
pub fn clip_segment(mesh: &Mesh, seg: &Segment) -> Result<Vec<SubSegment>> {
    let index = mesh.index();
    let len = seg.length();
    let min_len = 1e-12 * len;
    let a = seg.a();
    let tau = seg.tau();

    // Clip the parameter interval against each candidate cell's local
    // coordinate half-spaces, expanded by a small slack.
    let mut raw: Vec<SubSegment> = Vec::new();
    for c in index.segment_candidates(seg) {
        let shape = CellShape::new(mesh, c as usize);
        let mut constraints: Vec<(f64, f64)> = Vec::with_capacity(5);
        match &shape {
            CellShape::Tet { d, g, .. } => {
                for i in 0..4 {
                    constraints.push((d[i] + g[i].dot(a), g[i].dot(tau)));
                }
            }
            CellShape::Prism {
                d, gx, gy, z0, z1, ..
            } => {
                for i in 0..3 {
                    constraints
                        .push((d[i] + gx[i] * a.x + gy[i] * a.y, gx[i] * tau.x + gy[i] * tau.y));
                }
                let dz = z1 - z0;
                constraints.push(((a.z - z0) / dz, tau.z / dz));
                constraints.push(((z1 - a.z) / dz, -tau.z / dz));
            }
        }
        let (mut lo, mut hi) = (0.0f64, len);
        let mut empty = false;
        for (c0, c1) in constraints {
            // Constraint c0 + c1 t >= -slack along the segment.
            if c1.abs() * len < 1e-13 {
                if c0 < -BARY_SLACK {
                    empty = true;
                    break;
                }
            } else {
                let t = (-BARY_SLACK - c0) / c1;
                if c1 > 0.0 {
                    lo = lo.max(t);
                } else {
                    hi = hi.min(t);
                }
                if lo >= hi {
                    empty = true;
                    break;
                }
            }
        }
        if !empty && hi - lo > min_len {
            raw.push(SubSegment {
                cell: c as usize,
                t0: lo,
                t1: hi,
            });
        }
    }

    // Assign each elementary interval between consecutive breakpoints to the
    // lowest-id cell covering its midpoint, then merge runs of equal cells.
    let mut cuts: Vec<f64> = Vec::with_capacity(2 * raw.len() + 2);
    cuts.push(0.0);
    cuts.push(len);
    for s in &raw {
        cuts.push(s.t0);
        cuts.push(s.t1);
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).expect("finite cut"));
    cuts.dedup();

    let mut out: Vec<SubSegment> = Vec::new();
    let mut gap = 0.0f64;
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        if v - u <= min_len {
            continue;
        }
        let mid = 0.5 * (u + v);
        let mut best: Option<usize> = None;
        for s in &raw {
            if s.t0 <= mid && mid <= s.t1 {
                best = Some(best.map_or(s.cell, |b| b.min(s.cell)));
            }
        }
        match best {
            Some(cell) => {
                match out.last_mut() {
                    // Adjacent (or separated by a sub-roundoff sliver) and
                    // same cell: extend the previous piece.
                    Some(last) if last.cell == cell && u - last.t1 < min_len => last.t1 = v,
                    _ => out.push(SubSegment { cell, t0: u, t1: v }),
                }
            }
            None => gap += v - u,
        }
    }
    if gap > 1e-9 * len {
        return Err(Error::SegmentOutsideMesh { gap: gap / len });
    }
    Ok(out)
}
