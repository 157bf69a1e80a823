//! Error measurement and model reduction analysis: L2 / H1 norms over the
//! domain or a subdomain excluding tubes around the sources, weighted norms,
//! convergence rate tables, per-segment modelling indicators, ranking
//! heuristics, and the segment removal study.

use crate::assembly::{
    apply_dirichlet, assemble_stiffness, eliminate_rhs, rhs_neumann, rhs_volume, CellQuadrature,
    DirichletBc, FeFunction,
};
use crate::geometry::{LineNetwork, Point3, Segment};
use crate::kernels::{
    correction_rhs_segment, dirichlet_data_w, grad_singular_part, green_segment, singular_part,
    KernelConfig, FOUR_PI,
};
use crate::mesh::{CellShape, Mesh};
use crate::quadrature::QuadratureSpec;
use crate::solver::{cg_solve, CgOptions, CsrMatrix};
use crate::util::{format_spacing, par_map};
use crate::{Error, Result};

/// A tube to exclude from norm integration.
pub enum ExclusionGeom {
    /// All points within `radius` of the (closed) segment.
    SegmentTube { seg: Segment, radius: f64 },
    /// All points within `radius` of an infinite line.
    AxisTube {
        point: Point3,
        dir: Point3,
        radius: f64,
    },
}

impl ExclusionGeom {
    pub fn excludes(&self, x: Point3) -> bool {
        match self {
            ExclusionGeom::SegmentTube { seg, radius } => seg.distance(x) < *radius,
            ExclusionGeom::AxisTube { point, dir, radius } => {
                let d = x - *point;
                let s = d.dot(*dir);
                (d - *dir * s).norm() < *radius
            }
        }
    }
}

/// The integration subdomain: the mesh minus a set of excluded tubes,
/// realized as a quadrature point filter.
pub struct SubdomainSpec {
    pub exclusions: Vec<ExclusionGeom>,
}

impl SubdomainSpec {
    /// No exclusions: integrate over the whole mesh.
    pub fn full() -> SubdomainSpec {
        SubdomainSpec {
            exclusions: Vec::new(),
        }
    }

    pub fn exclude_segment(seg: Segment, radius: f64) -> SubdomainSpec {
        SubdomainSpec {
            exclusions: vec![ExclusionGeom::SegmentTube { seg, radius }],
        }
    }

    pub fn exclude_axis(point: Point3, dir: Point3, radius: f64) -> Result<SubdomainSpec> {
        let dir = dir
            .normalized()
            .ok_or_else(|| Error::invalid("axis tube needs a nonzero direction"))?;
        Ok(SubdomainSpec {
            exclusions: vec![ExclusionGeom::AxisTube { point, dir, radius }],
        })
    }

    pub fn contains(&self, x: Point3) -> bool {
        self.exclusions.iter().all(|e| !e.excludes(x))
    }
}

/// Which error norm to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1Semi,
    /// Full H1 norm: sqrt(L2^2 + H1-seminorm^2).
    H1,
}

/// A reference field to measure against: a value and, when gradient norms
/// are wanted, a gradient.
pub struct ExactField<'a> {
    pub value: &'a (dyn Fn(Point3) -> Result<f64> + Sync),
    pub grad: Option<&'a (dyn Fn(Point3) -> Result<Point3> + Sync)>,
}

impl<'a> ExactField<'a> {
    pub fn value_only(value: &'a (dyn Fn(Point3) -> Result<f64> + Sync)) -> ExactField<'a> {
        ExactField { value, grad: None }
    }

    pub fn with_grad(
        value: &'a (dyn Fn(Point3) -> Result<f64> + Sync),
        grad: &'a (dyn Fn(Point3) -> Result<Point3> + Sync),
    ) -> ExactField<'a> {
        ExactField {
            value,
            grad: Some(grad),
        }
    }
}

const BLOCK: usize = 32768;

fn sweep_cells(
    mesh: &Mesh,
    quad: &QuadratureSpec,
    threads: usize,
    cell_term: &(dyn Fn(usize, &[(Point3, f64)]) -> Result<f64> + Sync),
) -> Result<f64> {
    let cq = CellQuadrature::new(mesh.kind(), quad);
    let n_cells = mesh.n_cells();
    let mut total = 0.0;
    let mut start = 0;
    while start < n_cells {
        let count = BLOCK.min(n_cells - start);
        let parts: Vec<Result<f64>> = par_map(count, threads, |k| {
            let c = start + k;
            let mut qbuf: Vec<(Point3, f64)> = Vec::with_capacity(16);
            cq.points(mesh, c, &mut qbuf);
            cell_term(c, &qbuf)
        });
        for p in parts {
            total += p?;
        }
        start += count;
    }
    Ok(total)
}

/// `||u_h - exact||` in the requested norm over the subdomain.
pub fn error_norm(
    mesh: &Mesh,
    u_h: &FeFunction,
    exact: &ExactField,
    kind: NormKind,
    sub: &SubdomainSpec,
    quad: &QuadratureSpec,
    threads: usize,
) -> Result<f64> {
    if kind != NormKind::L2 && exact.grad.is_none() {
        return Err(Error::invalid(
            "gradient norms need the exact gradient in the reference field",
        ));
    }
    let coeffs = u_h.values();
    let total = sweep_cells(mesh, quad, threads, &|c, qpts| {
        let shape = CellShape::new(mesh, c);
        let nodes = mesh.cell(c);
        let mut vals = [0.0f64; 6];
        let mut grads = [Point3::ZERO; 6];
        let mut acc = 0.0;
        for &(x, w) in qpts {
            if !sub.contains(x) {
                continue;
            }
            if kind != NormKind::H1Semi {
                let ns = shape.values(x, &mut vals);
                let uh: f64 = (0..ns).map(|i| vals[i] * coeffs[nodes[i]]).sum();
                let d = uh - (exact.value)(x)?;
                acc += w * d * d;
            }
            if kind != NormKind::L2 {
                let ns = shape.grads(x, &mut grads);
                let mut gh = Point3::ZERO;
                for i in 0..ns {
                    gh = gh + grads[i] * coeffs[nodes[i]];
                }
                let ge = (exact.grad.expect("checked above"))(x)?;
                acc += w * (gh - ge).norm_sq();
            }
        }
        Ok(acc)
    })?;
    Ok(total.max(0.0).sqrt())
}

/// Weighted error norm `(int dist(x, net)^(2 alpha) (u_h - exact)^2 dx)^(1/2)`
/// with `alpha` in `(-1, 1)`; the weight distance is to the closest segment
/// of the network.
pub fn weighted_l2_norm(
    mesh: &Mesh,
    u_h: &FeFunction,
    exact: &(dyn Fn(Point3) -> Result<f64> + Sync),
    net: &LineNetwork,
    alpha: f64,
    quad: &QuadratureSpec,
    threads: usize,
) -> Result<f64> {
    if !(alpha > -1.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "weight exponent must lie in (-1, 1), got {alpha}"
        )));
    }
    if net.is_empty() {
        return Err(Error::invalid("weighted norm needs at least one segment"));
    }
    let coeffs = u_h.values();
    let total = sweep_cells(mesh, quad, threads, &|c, qpts| {
        let shape = CellShape::new(mesh, c);
        let nodes = mesh.cell(c);
        let mut vals = [0.0f64; 6];
        let mut acc = 0.0;
        for &(x, w) in qpts {
            let r = (0..net.len())
                .map(|i| net.segment(i).distance(x))
                .fold(f64::INFINITY, f64::min);
            let weight = r.powf(2.0 * alpha);
            if !weight.is_finite() {
                // A quadrature point exactly on a segment with negative
                // alpha; with interior rules this cannot happen on meshes
                // that resolve the segment, but stay defensive.
                return Err(Error::NonFiniteInCell { cell: c });
            }
            let ns = shape.values(x, &mut vals);
            let uh: f64 = (0..ns).map(|i| vals[i] * coeffs[nodes[i]]).sum();
            let d = uh - exact(x)?;
            acc += w * weight * d * d;
        }
        Ok(acc)
    })?;
    Ok(total.max(0.0).sqrt())
}

/// The five error norms used by the convergence studies, measured in one
/// sweep: L2 and H1-semi over the full domain, both again over the
/// subdomain, and the weighted L2 norm.
#[derive(Clone, Copy, Debug)]
pub struct NormBundle {
    pub l2: f64,
    pub h1_semi: f64,
    pub l2_sub: f64,
    pub h1_semi_sub: f64,
    pub weighted_l2: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn error_norm_bundle(
    mesh: &Mesh,
    u_h: &FeFunction,
    exact: &ExactField,
    sub: &SubdomainSpec,
    net: &LineNetwork,
    alpha: f64,
    quad: &QuadratureSpec,
    threads: usize,
) -> Result<NormBundle> {
    if exact.grad.is_none() {
        return Err(Error::invalid("the norm bundle needs the exact gradient"));
    }
    if !(alpha > -1.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "weight exponent must lie in (-1, 1), got {alpha}"
        )));
    }
    let coeffs = u_h.values();
    let cq = CellQuadrature::new(mesh.kind(), quad);
    let n_cells = mesh.n_cells();
    let mut sums = [0.0f64; 5];
    let mut start = 0;
    while start < n_cells {
        let count = BLOCK.min(n_cells - start);
        let parts: Vec<Result<[f64; 5]>> = par_map(count, threads, |k| {
            let c = start + k;
            let mut qbuf: Vec<(Point3, f64)> = Vec::with_capacity(16);
            cq.points(mesh, c, &mut qbuf);
            let shape = CellShape::new(mesh, c);
            let nodes = mesh.cell(c);
            let mut vals = [0.0f64; 6];
            let mut grads = [Point3::ZERO; 6];
            let mut acc = [0.0f64; 5];
            for &(x, w) in &qbuf {
                let ns = shape.values(x, &mut vals);
                shape.grads(x, &mut grads);
                let mut uh = 0.0;
                let mut gh = Point3::ZERO;
                for i in 0..ns {
                    uh += vals[i] * coeffs[nodes[i]];
                    gh = gh + grads[i] * coeffs[nodes[i]];
                }
                let d = uh - (exact.value)(x)?;
                let gd = (gh - (exact.grad.expect("checked above"))(x)?).norm_sq();
                acc[0] += w * d * d;
                acc[1] += w * gd;
                if sub.contains(x) {
                    acc[2] += w * d * d;
                    acc[3] += w * gd;
                }
                if !net.is_empty() {
                    let r = (0..net.len())
                        .map(|i| net.segment(i).distance(x))
                        .fold(f64::INFINITY, f64::min);
                    let weight = r.powf(2.0 * alpha);
                    if !weight.is_finite() {
                        return Err(Error::NonFiniteInCell { cell: c });
                    }
                    acc[4] += w * weight * d * d;
                }
            }
            Ok(acc)
        });
        for p in parts {
            let p = p?;
            for i in 0..5 {
                sums[i] += p[i];
            }
        }
        start += count;
    }
    Ok(NormBundle {
        l2: sums[0].max(0.0).sqrt(),
        h1_semi: sums[1].max(0.0).sqrt(),
        l2_sub: sums[2].max(0.0).sqrt(),
        h1_semi_sub: sums[3].max(0.0).sqrt(),
        weighted_l2: sums[4].max(0.0).sqrt(),
    })
}

/// Observed convergence rates between consecutive `(h, error)` pairs:
/// `rate[i] = log(e[i] / e[i+1]) / log(h[i] / h[i+1])`.
pub fn convergence_rate(points: &[(f64, f64)]) -> Vec<f64> {
    points
        .windows(2)
        .map(|w| ((w[0].1 / w[1].1).ln()) / ((w[0].0 / w[1].0).ln()))
        .collect()
}

/// One resolution level of a convergence study.
#[derive(Clone, Debug)]
pub struct RateRow {
    pub h_perp: f64,
    pub h_par: f64,
    pub dofs: usize,
    pub errors: Vec<f64>,
    pub rates: Vec<Option<f64>>,
}

/// A convergence table: one row per resolution, one error column per norm,
/// with observed rates against the previous row.  Rates are computed when
/// the in-plane spacing refines and the axial spacing either stays fixed or
/// refines by the same factor; rows that only change the axial spacing get
/// no rate (they are the anisotropy checks).
#[derive(Clone, Debug)]
pub struct RateTable {
    pub title: String,
    pub col_names: Vec<String>,
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn new(title: impl Into<String>, col_names: &[&str]) -> RateTable {
        RateTable {
            title: title.into(),
            col_names: col_names.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, h_perp: f64, h_par: f64, dofs: usize, errors: Vec<f64>) {
        assert_eq!(errors.len(), self.col_names.len(), "column count mismatch");
        let rates = match self.rows.last() {
            Some(prev) => {
                let rp = prev.h_perp / h_perp;
                let rq = prev.h_par / h_par;
                let comparable = rp > 1.0 + 1e-12
                    && ((rq - 1.0).abs() < 1e-12 || (rq - rp).abs() < 1e-9 * rp);
                if comparable {
                    errors
                        .iter()
                        .zip(&prev.errors)
                        .map(|(e, pe)| Some((pe / e).ln() / rp.ln()))
                        .collect()
                } else {
                    vec![None; errors.len()]
                }
            }
            None => vec![None; errors.len()],
        };
        self.rows.push(RateRow {
            h_perp,
            h_par,
            dofs,
            errors,
            rates,
        });
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.title);
        s.push('\n');
        s.push_str(&format!("{:<8} {:<8} {:>9}", "h_perp", "h_par", "dofs"));
        for name in &self.col_names {
            s.push_str(&format!("  {:>11} {:>6}", name, "rate"));
        }
        s.push('\n');
        for row in &self.rows {
            s.push_str(&format!(
                "{:<8} {:<8} {:>9}",
                format_spacing(row.h_perp),
                format_spacing(row.h_par),
                row.dofs
            ));
            for (e, r) in row.errors.iter().zip(&row.rates) {
                match r {
                    Some(r) => s.push_str(&format!("  {:>11.3e} {:>6.2}", e, r)),
                    None => s.push_str(&format!("  {:>11.3e} {:>6}", e, "-")),
                }
            }
            s.push('\n');
        }
        s
    }

    /// Comma-separated export with full precision.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h_perp,h_par,dofs");
        for name in &self.col_names {
            s.push_str(&format!(",{name},{name}_rate"));
        }
        s.push('\n');
        for row in &self.rows {
            s.push_str(&format!("{:.6e},{:.6e},{}", row.h_perp, row.h_par, row.dofs));
            for (e, r) in row.errors.iter().zip(&row.rates) {
                match r {
                    Some(r) => s.push_str(&format!(",{e:.6e},{r:.4}")),
                    None => s.push_str(&format!(",{e:.6e},")),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Per-segment modelling indicators `M_i = |gamma_i| R_i ||G_i||_L2(mesh)`:
/// coupling strength times radius times the segment kernel's L2 norm.
pub fn modelling_indicators(
    net: &LineNetwork,
    mesh: &Mesh,
    quad: &QuadratureSpec,
    cfg: &KernelConfig,
    threads: usize,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(net.len());
    for i in 0..net.len() {
        let seg = net.segment(i);
        let total = sweep_cells(mesh, quad, threads, &|_, qpts| {
            let mut acc = 0.0;
            for &(x, w) in qpts {
                let g = green_segment(seg, x, cfg)?;
                acc += w * g * g;
            }
            Ok(acc)
        })?;
        out.push(net.gamma(i).abs() * net.radius(i) * total.max(0.0).sqrt());
    }
    Ok(out)
}

/// A named removal order: segment indices from most to least important.
#[derive(Clone, Debug)]
pub struct RankedOrdering {
    pub name: String,
    pub order: Vec<usize>,
}

fn order_desc_by_key(n: usize, key: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        key(b)
            .partial_cmp(&key(a))
            .expect("finite ranking key")
            .then(a.cmp(&b))
    });
    idx
}

/// The four ranking heuristics: by radius, by length, by `R sqrt(L)`, and by
/// the modelling indicator, each descending (most important first), ties
/// broken by segment index.
pub fn heuristic_orderings(net: &LineNetwork, indicators: &[f64]) -> Vec<RankedOrdering> {
    assert_eq!(indicators.len(), net.len(), "one indicator per segment");
    let n = net.len();
    vec![
        RankedOrdering {
            name: "radius".into(),
            order: order_desc_by_key(n, |i| net.radius(i)),
        },
        RankedOrdering {
            name: "length".into(),
            order: order_desc_by_key(n, |i| net.segment(i).length()),
        },
        RankedOrdering {
            name: "radius_sqrt_length".into(),
            order: order_desc_by_key(n, |i| net.radius(i) * net.segment(i).length().sqrt()),
        },
        RankedOrdering {
            name: "indicator".into(),
            order: order_desc_by_key(n, |i| indicators[i]),
        },
    ]
}

/// Error of one ranking heuristic as segments are dropped.
#[derive(Clone, Debug)]
pub struct RemovalCurve {
    pub name: String,
    pub fractions: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Everything the removal study needs about the full problem.  The physical
/// solution is assumed to satisfy the Dirichlet data `u_d` on the facets
/// tagged `dirichlet_tags` and a zero normal flux on those tagged
/// `neumann_tags`; the correction data for any segment subset follows from
/// both.
pub struct RemovalContext<'a> {
    pub mesh: &'a Mesh,
    pub net: &'a LineNetwork,
    pub dirichlet_tags: Vec<i32>,
    pub neumann_tags: Vec<i32>,
    pub u_d: &'a (dyn Fn(Point3) -> f64 + Sync),
    pub cfg: &'a KernelConfig,
    pub quad: QuadratureSpec,
    pub threads: usize,
}

/// The six boundary tags of a generated box mesh.
pub const BOX_TAGS: [i32; 6] = [0, 1, 2, 3, 4, 5];

fn solve_correction(
    ctx: &RemovalContext,
    a_orig: &CsrMatrix,
    a_elim: &CsrMatrix,
    keep: &[usize],
    cg: &CgOptions,
) -> Result<Vec<f64>> {
    let sub = ctx.net.subset(keep);
    let mut b = rhs_volume(
        ctx.mesh,
        &|x| {
            let mut acc = 0.0;
            for (seg, f) in sub.iter() {
                acc += correction_rhs_segment(seg, f, x, ctx.cfg)?;
            }
            Ok(acc)
        },
        &ctx.quad,
        ctx.threads,
    )?;
    if !ctx.neumann_tags.is_empty() {
        let bn = rhs_neumann(
            ctx.mesh,
            &ctx.neumann_tags,
            &|x, n| Ok(-FOUR_PI * grad_singular_part(&sub, x, ctx.cfg)?.dot(n)),
            &ctx.quad,
        )?;
        for (b, bn) in b.iter_mut().zip(&bn) {
            *b += bn;
        }
    }
    let bc = DirichletBc::from_function(ctx.mesh, &ctx.dirichlet_tags, &|p| {
        dirichlet_data_w(ctx.u_d, &sub, p, ctx.cfg)
    })?;
    eliminate_rhs(a_orig, &mut b, &bc);
    let (w, _) = cg_solve(a_elim, &b, cg)?;
    Ok(w)
}

/// Solves the full splitting problem once, then for every ordering and
/// removal fraction re-solves with the lowest-ranked `floor(q n)` segments
/// dropped and measures `||u_full - u_reduced||_L2` over the whole domain.
///
/// The fraction `0` is exact (no segments dropped, error identically zero)
/// and the fraction `1` solve is shared, so all orderings report the same
/// error there.
pub fn removal_study(
    ctx: &RemovalContext,
    orderings: &[RankedOrdering],
    fractions: &[f64],
    cg: &CgOptions,
) -> Result<Vec<RemovalCurve>> {
    let n = ctx.net.len();
    if n == 0 {
        return Err(Error::invalid("removal study needs a non-empty network"));
    }
    for &q in fractions {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!(
                "removal fraction must lie in [0, 1], got {q}"
            )));
        }
    }
    for o in orderings {
        let mut seen = o.order.clone();
        seen.sort_unstable();
        if seen != (0..n).collect::<Vec<_>>() {
            return Err(Error::invalid(format!(
                "ordering `{}` is not a permutation of the segments",
                o.name
            )));
        }
    }

    let zeros = DirichletBc::from_function(ctx.mesh, &ctx.dirichlet_tags, &|_| Ok(0.0))?;
    if zeros.is_empty() {
        return Err(Error::invalid(
            "removal study needs at least one Dirichlet-tagged facet",
        ));
    }
    let a_orig = assemble_stiffness(ctx.mesh, &|_| 1.0, &ctx.quad)?;
    let mut a_elim = a_orig.clone();
    {
        // The eliminated matrix depends only on which nodes are constrained,
        // so it is shared by every subset solve.
        let mut dummy = vec![0.0; a_orig.n()];
        apply_dirichlet(&mut a_elim, &mut dummy, &zeros);
    }

    let all: Vec<usize> = (0..n).collect();
    let w_full = solve_correction(ctx, &a_orig, &a_elim, &all, cg)?;
    let mut w_empty: Option<Vec<f64>> = None;

    let mut curves = Vec::with_capacity(orderings.len());
    for ordering in orderings {
        let mut errors = Vec::with_capacity(fractions.len());
        for &q in fractions {
            let k = ((q * n as f64).floor() as usize).min(n);
            if k == 0 {
                errors.push(0.0);
                continue;
            }
            let keep = &ordering.order[..n - k];
            let removed = &ordering.order[n - k..];
            let w_red = if k == n {
                if w_empty.is_none() {
                    w_empty = Some(solve_correction(ctx, &a_orig, &a_elim, &[], cg)?);
                }
                w_empty.clone().expect("just set")
            } else {
                solve_correction(ctx, &a_orig, &a_elim, keep, cg)?
            };
            // u_full - u_red = (1/4pi) [(w_full - w_red) + sum_removed E G]
            let diff: Vec<f64> = w_full
                .iter()
                .zip(&w_red)
                .map(|(f, r)| (f - r) / FOUR_PI)
                .collect();
            let diff_fe = FeFunction::from_values(ctx.mesh, diff)?;
            let removed_net = ctx.net.subset(removed);
            let value = |x: Point3| -> Result<f64> {
                Ok(-singular_part(&removed_net, x, ctx.cfg)?)
            };
            let err = error_norm(
                ctx.mesh,
                &diff_fe,
                &ExactField::value_only(&value),
                NormKind::L2,
                &SubdomainSpec::full(),
                &ctx.quad,
                ctx.threads,
            )?;
            errors.push(err);
        }
        curves.push(RemovalCurve {
            name: ordering.name.clone(),
            fractions: fractions.to_vec(),
            errors,
        });
    }
    Ok(curves)
}
