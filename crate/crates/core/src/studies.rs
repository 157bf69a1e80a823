//! End-to-end study drivers: manufactured solutions for the smooth
//! through-line and interior-segment cases, refinement sweeps comparing the
//! standard discretization against the splitting method, the mixed-boundary
//! network solve with reconstruction and removal analysis, and a seeded
//! synthetic network generator.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    error_norm_bundle, heuristic_orderings, modelling_indicators, removal_study, ExactField,
    ExclusionGeom, RankedOrdering, RateTable, RemovalContext, RemovalCurve, SubdomainSpec,
    BOX_TAGS,
};
use crate::assembly::{
    apply_dirichlet, assemble_stiffness, rhs_line, rhs_neumann, rhs_volume, surface_integral,
    DirichletBc, FeFunction,
};
use crate::geometry::{IntensityProfile, LineNetwork, Point3, Segment};
use crate::io::{atomic_write, write_vtk};
use crate::kernels::{
    correction_rhs_segment, grad_singular_part, singular_part, KernelConfig, FOUR_PI,
};
use crate::mesh::{BoxBounds, ElementKind, Mesh, MeshParams};
use crate::quadrature::QuadratureSpec;
use crate::solver::{cg_solve, CgOptions};
use crate::{Error, Result};

/// Default in-plane position of the source line on the unit cross-section.
/// The coordinates, and their difference, stay away from every lattice and
/// diagonal face plane of the generated meshes at the study resolutions, so
/// the line never lies inside a mesh face.
pub const DEFAULT_LINE_OFFSET: (f64, f64) = (13.0 / 24.0, 9.0 / 20.0);

/// Which discretization(s) a study should run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodSel {
    Standard,
    Ssb,
    Both,
}

impl MethodSel {
    pub fn runs_standard(self) -> bool {
        self != MethodSel::Ssb
    }

    pub fn runs_ssb(self) -> bool {
        self != MethodSel::Standard
    }
}

/// Settings for the manufactured-solution refinement studies.
#[derive(Clone, Debug)]
pub struct StudyOptions {
    /// In-plane line position.
    pub line_offset: (f64, f64),
    /// In-plane subdivisions per refinement level.
    pub n_perp: Vec<usize>,
    /// Axial subdivisions; the study runs the full cross product, grouped by
    /// this list.
    pub n_par: Vec<usize>,
    pub element: ElementKind,
    pub method: MethodSel,
    /// Tube radius for the reduced-domain norms.
    pub exclusion_radius: f64,
    /// Exponent of the weighted-norm diagnostic.
    pub alpha: f64,
    pub threads: usize,
    pub quad: QuadratureSpec,
    pub cg: CgOptions,
    /// When set, tables (text and CSV) and optional VTK snapshots land here.
    pub out_dir: Option<PathBuf>,
    pub vtk: bool,
}

impl StudyOptions {
    fn base(element: ElementKind, n_perp: Vec<usize>, n_par: Vec<usize>) -> StudyOptions {
        StudyOptions {
            line_offset: DEFAULT_LINE_OFFSET,
            n_perp,
            n_par,
            element,
            method: MethodSel::Both,
            exclusion_radius: 0.2,
            alpha: 0.5,
            threads: 1,
            quad: QuadratureSpec::default(),
            cg: CgOptions::default(),
            out_dir: None,
            vtk: false,
        }
    }

    /// Defaults of the smooth through-line study: prisms, axial spacings
    /// 1/16 and 1/64, in-plane spacings 1/8 .. 1/64.
    pub fn smooth_defaults() -> StudyOptions {
        StudyOptions::base(ElementKind::Prism6, vec![8, 16, 32, 64], vec![16, 64])
    }

    /// Defaults of the interior-segment study: tetrahedra, axial spacings
    /// 1/16 and 1/128, in-plane spacings 1/8 .. 1/64.
    pub fn segment_defaults() -> StudyOptions {
        StudyOptions::base(ElementKind::Tet4, vec![8, 16, 32, 64], vec![16, 128])
    }

    pub fn validate(&self) -> Result<()> {
        let (x0, y0) = self.line_offset;
        if !(x0 > 0.0 && x0 < 1.0 && y0 > 0.0 && y0 < 1.0) {
            return Err(Error::invalid(format!(
                "line offset must be interior to the unit cross-section, got ({x0}, {y0})"
            )));
        }
        if self.n_perp.is_empty() || self.n_par.is_empty() {
            return Err(Error::invalid("refinement lists must be nonempty"));
        }
        if !(self.exclusion_radius >= 0.0) {
            return Err(Error::invalid("exclusion radius must be nonnegative"));
        }
        Ok(())
    }
}

/// Rate tables and diagnostics of one refinement study.
#[derive(Clone, Debug)]
pub struct StudyResult {
    pub standard: Option<RateTable>,
    pub ssb: Option<RateTable>,
    /// Largest recomputed relative residual over all solves.
    pub max_rel_residual: f64,
    /// Clamped kernel evaluations over the whole study.
    pub clamp_events: u64,
}

type ScalarField = Box<dyn Fn(Point3) -> Result<f64> + Send + Sync>;
type VectorField = Box<dyn Fn(Point3) -> Result<Point3> + Send + Sync>;

/// A closed-form solution pair (u, w) of the line-source problem together
/// with the data both discretizations need: u with its singular line term,
/// the smooth correction w with `u = u_singular + w_scale * w`, the
/// correction right-hand side F solving `-lap w = F`, and the correction's
/// Dirichlet boundary data.
pub struct ManufacturedSolution {
    pub name: &'static str,
    pub net: LineNetwork,
    /// Factor turning w-errors into u-errors.
    pub w_scale: f64,
    pub cfg: Arc<KernelConfig>,
    pub u: ScalarField,
    pub grad_u: VectorField,
    pub w: ScalarField,
    pub grad_w: VectorField,
    pub correction_rhs: ScalarField,
    pub correction_dirichlet: ScalarField,
}

const MIN_R2: f64 = 1e-300;

fn finite(v: f64, x: Point3) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteEvaluation(x.x, x.y, x.z))
    }
}

fn finite_vec(v: Point3, x: Point3) -> Result<Point3> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteEvaluation(x.x, x.y, x.z))
    }
}

// Closed forms of the smooth through-line case at offset (x0, y0):
//   u = -(1/2pi) (z^3 ln r + w),   w = -1.5 z r^2 (ln r - 1),
// so that -lap u = z^3 delta_line and -lap w = 6 z ln r.
fn smooth_w(x0: f64, y0: f64, p: Point3) -> f64 {
    let (rx, ry) = (p.x - x0, p.y - y0);
    let r2 = (rx * rx + ry * ry).max(MIN_R2);
    let lr = 0.5 * r2.ln();
    -1.5 * p.z * r2 * (lr - 1.0)
}

fn smooth_grad_w(x0: f64, y0: f64, p: Point3) -> Point3 {
    let (rx, ry) = (p.x - x0, p.y - y0);
    let r2 = (rx * rx + ry * ry).max(MIN_R2);
    let lr = 0.5 * r2.ln();
    let c = -1.5 * p.z * (2.0 * lr - 1.0);
    Point3::new(c * rx, c * ry, -1.5 * r2 * (lr - 1.0))
}

impl ManufacturedSolution {
    /// Through-going vertical line with intensity f(z) = z^3; the splitting
    /// uses the infinite-line logarithm and the scaling -1/2pi.
    pub fn smooth_line(x0: f64, y0: f64) -> ManufacturedSolution {
        let seg = Segment::new(Point3::new(x0, y0, 0.0), Point3::new(x0, y0, 1.0))
            .expect("interior offsets give a valid segment");
        let profile = IntensityProfile::new(vec![0.0, 0.0, 0.0, 1.0]);
        let net = LineNetwork::single(seg, profile);
        let cfg = Arc::new(KernelConfig::default());
        let c = 1.0 / (2.0 * PI);
        ManufacturedSolution {
            name: "smooth",
            net,
            w_scale: -c,
            cfg,
            u: Box::new(move |p| {
                let (rx, ry) = (p.x - x0, p.y - y0);
                let r2 = (rx * rx + ry * ry).max(MIN_R2);
                let lr = 0.5 * r2.ln();
                finite(-c * (p.z.powi(3) * lr + smooth_w(x0, y0, p)), p)
            }),
            grad_u: Box::new(move |p| {
                let (rx, ry) = (p.x - x0, p.y - y0);
                let r2 = (rx * rx + ry * ry).max(MIN_R2);
                let lr = 0.5 * r2.ln();
                let gw = smooth_grad_w(x0, y0, p);
                let z3 = p.z.powi(3);
                let g = Point3::new(
                    -c * (z3 * rx / r2 + gw.x),
                    -c * (z3 * ry / r2 + gw.y),
                    -c * (3.0 * p.z * p.z * lr + gw.z),
                );
                finite_vec(g, p)
            }),
            w: Box::new(move |p| finite(smooth_w(x0, y0, p), p)),
            grad_w: Box::new(move |p| finite_vec(smooth_grad_w(x0, y0, p), p)),
            correction_rhs: Box::new(move |p| {
                let (rx, ry) = (p.x - x0, p.y - y0);
                let r2 = (rx * rx + ry * ry).max(MIN_R2);
                finite(6.0 * p.z * 0.5 * r2.ln(), p)
            }),
            correction_dirichlet: Box::new(move |p| finite(smooth_w(x0, y0, p), p)),
        }
    }

    /// Interior vertical segment z in (0.2, 0.8) with intensity f(t) = 0.2 + t
    /// (the z-coordinate along the segment); the correction is
    /// w = r_b - r_a and the scaling is 1/4pi.
    pub fn interior_segment(x0: f64, y0: f64) -> ManufacturedSolution {
        let a = Point3::new(x0, y0, 0.2);
        let b = Point3::new(x0, y0, 0.8);
        let seg = Segment::new(a, b).expect("distinct endpoints");
        let profile = IntensityProfile::new(vec![0.2, 1.0]);
        let net = LineNetwork::single(seg.clone(), profile.clone());
        let cfg = Arc::new(KernelConfig::default());
        let w_fn = move |p: Point3| (p - b).norm() - (p - a).norm();
        let grad_w_fn = move |p: Point3| -> Result<Point3> {
            let (ra, rb) = ((p - a).norm(), (p - b).norm());
            finite_vec((p - b) * (1.0 / rb) - (p - a) * (1.0 / ra), p)
        };
        let net_u = net.clone();
        let cfg_u = cfg.clone();
        let u_fn = move |p: Point3| -> Result<f64> {
            let s = singular_part(&net_u, p, &cfg_u)?;
            finite(s + w_fn(p) / FOUR_PI, p)
        };
        let net_g = net.clone();
        let cfg_g = cfg.clone();
        let net_d = net.clone();
        let cfg_d = cfg.clone();
        let u_for_bc = {
            let net = net.clone();
            let cfg = cfg.clone();
            move |p: Point3| -> Result<f64> {
                let s = singular_part(&net, p, &cfg)?;
                finite(s + w_fn(p) / FOUR_PI, p)
            }
        };
        let cfg_f = cfg.clone();
        ManufacturedSolution {
            name: "segment",
            net,
            w_scale: 1.0 / FOUR_PI,
            cfg,
            u: Box::new(u_fn),
            grad_u: Box::new(move |p| {
                let gs = grad_singular_part(&net_g, p, &cfg_g)?;
                Ok(gs + grad_w_fn(p)? * (1.0 / FOUR_PI))
            }),
            w: Box::new(move |p| finite(w_fn(p), p)),
            grad_w: Box::new(grad_w_fn),
            correction_rhs: Box::new(move |p| {
                correction_rhs_segment(&seg, &profile, p, &cfg_f)
            }),
            // The correction data follows the real pipeline: given boundary
            // values of u, subtract the singular part and rescale.
            correction_dirichlet: Box::new(move |p| {
                let u_val = u_for_bc(p)?;
                let s = singular_part(&net_d, p, &cfg_d)?;
                finite(FOUR_PI * (u_val - s), p)
            }),
        }
    }
}

/// Builds a structured box mesh of the requested element kind.
pub fn build_box(kind: ElementKind, params: &MeshParams) -> Result<Mesh> {
    match kind {
        ElementKind::Tet4 => Mesh::build_box_tet(params),
        ElementKind::Prism6 => Mesh::build_box_prism(params),
    }
}

fn tube_subdomain(net: &LineNetwork, radius: f64) -> SubdomainSpec {
    SubdomainSpec {
        exclusions: (0..net.len())
            .map(|i| ExclusionGeom::SegmentTube {
                seg: net.segment(i).clone(),
                radius,
            })
            .collect(),
    }
}

fn write_table(dir: &std::path::Path, stem: &str, table: &RateTable) -> Result<()> {
    atomic_write(&dir.join(format!("{stem}.txt")), table.to_text().as_bytes())?;
    atomic_write(&dir.join(format!("{stem}.csv")), table.to_csv().as_bytes())
}

fn run_manufactured_study(
    case: &ManufacturedSolution,
    opts: &StudyOptions,
) -> Result<StudyResult> {
    opts.validate()?;
    case.cfg.reset_clamp_count();
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let sub = tube_subdomain(&case.net, opts.exclusion_radius);
    let col_w = format!("wL2(a={})", opts.alpha);
    let mut table_std = RateTable::new(
        format!("{} study, standard method, error u - u_h", case.name),
        &["L2(om)", "L2(omR)", "H1(omR)", &col_w],
    );
    let mut table_ssb = RateTable::new(
        format!("{} study, splitting method, error w - w_h", case.name),
        &["L2(om)", "H1(om)", "L2(omR)", "H1(omR)", &col_w],
    );
    let mut max_res = 0.0f64;

    for &n_par in &opts.n_par {
        for &n_perp in &opts.n_perp {
            let mesh = build_box(opts.element, &MeshParams::unit(n_perp, n_par))?;
            let h_perp = 1.0 / n_perp as f64;
            let h_par = 1.0 / n_par as f64;
            let a0 = assemble_stiffness(&mesh, &|_| 1.0, &opts.quad)?;

            if opts.method.runs_standard() {
                let mut b = vec![0.0; mesh.n_nodes()];
                for (seg, f) in case.net.iter() {
                    let bl = rhs_line(&mesh, seg, f, &opts.quad)?;
                    for (b, bl) in b.iter_mut().zip(&bl) {
                        *b += bl;
                    }
                }
                let bc = DirichletBc::from_function(&mesh, &BOX_TAGS, &|p| (case.u)(p))?;
                let mut a = a0.clone();
                apply_dirichlet(&mut a, &mut b, &bc);
                let (sol, stats) = cg_solve(&a, &b, &opts.cg)?;
                max_res = max_res.max(stats.relative_residual);
                let u_h = FeFunction::from_values(&mesh, sol)?;
                let exact = ExactField::with_grad(&case.u, &case.grad_u);
                let n = error_norm_bundle(
                    &mesh,
                    &u_h,
                    &exact,
                    &sub,
                    &case.net,
                    opts.alpha,
                    &opts.quad,
                    opts.threads,
                )?;
                table_std.push_row(
                    h_perp,
                    h_par,
                    mesh.n_nodes(),
                    vec![
                        n.l2,
                        n.l2_sub,
                        f64::hypot(n.l2_sub, n.h1_semi_sub),
                        n.weighted_l2,
                    ],
                );
                if let (Some(dir), true) = (&opts.out_dir, opts.vtk) {
                    let exact_nodal = FeFunction::try_interpolate(&mesh, |p| (case.u)(p))?;
                    write_vtk(
                        &dir.join(format!(
                            "{}_standard_np{}_na{}.vtk",
                            case.name, n_perp, n_par
                        )),
                        &mesh,
                        &[("u_h", u_h.values()), ("u_exact", exact_nodal.values())],
                    )?;
                }
            }

            if opts.method.runs_ssb() {
                let mut b = rhs_volume(
                    &mesh,
                    &|p| (case.correction_rhs)(p),
                    &opts.quad,
                    opts.threads,
                )?;
                let bc =
                    DirichletBc::from_function(&mesh, &BOX_TAGS, &|p| (case.correction_dirichlet)(p))?;
                let mut a = a0.clone();
                apply_dirichlet(&mut a, &mut b, &bc);
                let (sol, stats) = cg_solve(&a, &b, &opts.cg)?;
                max_res = max_res.max(stats.relative_residual);
                let w_h = FeFunction::from_values(&mesh, sol)?;
                let exact = ExactField::with_grad(&case.w, &case.grad_w);
                let n = error_norm_bundle(
                    &mesh,
                    &w_h,
                    &exact,
                    &sub,
                    &case.net,
                    opts.alpha,
                    &opts.quad,
                    opts.threads,
                )?;
                table_ssb.push_row(
                    h_perp,
                    h_par,
                    mesh.n_nodes(),
                    vec![
                        n.l2,
                        f64::hypot(n.l2, n.h1_semi),
                        n.l2_sub,
                        f64::hypot(n.l2_sub, n.h1_semi_sub),
                        n.weighted_l2,
                    ],
                );
                if let (Some(dir), true) = (&opts.out_dir, opts.vtk) {
                    let exact_nodal = FeFunction::try_interpolate(&mesh, |p| (case.w)(p))?;
                    write_vtk(
                        &dir.join(format!("{}_ssb_np{}_na{}.vtk", case.name, n_perp, n_par)),
                        &mesh,
                        &[("w_h", w_h.values()), ("w_exact", exact_nodal.values())],
                    )?;
                }
            }
        }
    }

    let standard = opts.method.runs_standard().then_some(table_std);
    let ssb = opts.method.runs_ssb().then_some(table_ssb);
    if let Some(dir) = &opts.out_dir {
        if let Some(t) = &standard {
            write_table(dir, &format!("{}_standard", case.name), t)?;
        }
        if let Some(t) = &ssb {
            write_table(dir, &format!("{}_ssb", case.name), t)?;
        }
    }
    Ok(StudyResult {
        standard,
        ssb,
        max_rel_residual: max_res,
        clamp_events: case.cfg.clamp_count(),
    })
}

/// Runs the smooth through-line study (intensity z^3) on the options'
/// refinement grid.
pub fn run_smooth_study(opts: &StudyOptions) -> Result<StudyResult> {
    let case = ManufacturedSolution::smooth_line(opts.line_offset.0, opts.line_offset.1);
    run_manufactured_study(&case, opts)
}

/// Runs the interior-segment study (segment z in (0.2, 0.8), intensity equal
/// to z) on the options' refinement grid.
pub fn run_segment_study(opts: &StudyOptions) -> Result<StudyResult> {
    let case = ManufacturedSolution::interior_segment(opts.line_offset.0, opts.line_offset.1);
    run_manufactured_study(&case, opts)
}

/// A solved correction together with its reconstruction
/// `u = singular part + w_h / 4pi`.
pub struct Reconstruction<'a> {
    mesh: &'a Mesh,
    net: &'a LineNetwork,
    cfg: &'a KernelConfig,
    w_h: FeFunction,
    nodal: FeFunction,
}

impl Reconstruction<'_> {
    /// Nodal reconstruction; nodes on or next to the network were evaluated
    /// with the clamped kernel.
    pub fn nodal(&self) -> &FeFunction {
        &self.nodal
    }

    pub fn w_h(&self) -> &FeFunction {
        &self.w_h
    }

    /// Point evaluation: exact singular part plus interpolated correction.
    /// `None` outside the mesh.
    pub fn eval(&self, x: Point3) -> Result<Option<f64>> {
        match self.w_h.eval(self.mesh, x) {
            None => Ok(None),
            Some(w) => Ok(Some(singular_part(self.net, x, self.cfg)? + w / FOUR_PI)),
        }
    }

    /// Clamped kernel evaluations seen by this reconstruction's config.
    pub fn clamp_count(&self) -> u64 {
        self.cfg.clamp_count()
    }
}

/// Combines a solved correction with the exact singular part of the network.
pub fn reconstruct_u<'a>(
    mesh: &'a Mesh,
    net: &'a LineNetwork,
    cfg: &'a KernelConfig,
    w_h: FeFunction,
) -> Result<Reconstruction<'a>> {
    let mut nodal = vec![0.0; mesh.n_nodes()];
    for (i, &p) in mesh.nodes().iter().enumerate() {
        nodal[i] = singular_part(net, p, cfg)? + w_h.values()[i] / FOUR_PI;
    }
    Ok(Reconstruction {
        mesh,
        net,
        cfg,
        w_h,
        nodal: FeFunction::from_values(mesh, nodal)?,
    })
}

/// Boundary tag of the Dirichlet part (below the split height) after
/// [`run_network_study`] retags the mesh.
pub const NETWORK_DIRICHLET_TAG: i32 = 100;
/// Boundary tag of the zero-flux part (above the split height).
pub const NETWORK_NEUMANN_TAG: i32 = 200;

/// Settings for the network solve.
#[derive(Clone, Debug)]
pub struct NetworkStudyOptions {
    pub n_perp: usize,
    pub n_par: usize,
    pub element: ElementKind,
    /// Boundary below this height is Dirichlet, above is zero-flux Neumann;
    /// `None` puts the split a quarter up the box.
    pub split_height: Option<f64>,
    /// Dirichlet value of u on the lower boundary.
    pub dirichlet_value: f64,
    /// Removal fractions for the ordering study.
    pub fractions: Vec<f64>,
    pub run_removal: bool,
    pub threads: usize,
    pub quad: QuadratureSpec,
    pub cg: CgOptions,
    pub out_dir: Option<PathBuf>,
    pub vtk: bool,
}

impl Default for NetworkStudyOptions {
    fn default() -> NetworkStudyOptions {
        NetworkStudyOptions {
            n_perp: 16,
            n_par: 16,
            element: ElementKind::Tet4,
            split_height: None,
            dirichlet_value: 1.0,
            fractions: (0..=10).map(|k| k as f64 / 10.0).collect(),
            run_removal: true,
            threads: 1,
            quad: QuadratureSpec::default(),
            cg: CgOptions::default(),
            out_dir: None,
            vtk: false,
        }
    }
}

/// Outputs of the network solve.
pub struct NetworkStudyResult {
    pub mesh: Mesh,
    pub w_h: FeFunction,
    /// Nodal reconstruction of u.
    pub u: FeFunction,
    pub split_height: f64,
    pub indicators: Vec<f64>,
    pub orderings: Vec<RankedOrdering>,
    pub curves: Vec<RemovalCurve>,
    pub rel_residual: f64,
    pub clamp_events: u64,
    /// Total discrete flux of the reconstructed u through the Neumann part;
    /// consistency demands it tend to zero under refinement.
    pub neumann_flux: f64,
}

/// Removal-curve CSV: one row per fraction, one error column per ordering.
pub fn removal_curves_csv(curves: &[RemovalCurve]) -> String {
    let mut s = String::from("fraction");
    for c in curves {
        s.push_str(&format!(",{}", c.name));
    }
    s.push('\n');
    if let Some(first) = curves.first() {
        for (i, q) in first.fractions.iter().enumerate() {
            s.push_str(&format!("{q:.6e}"));
            for c in curves {
                s.push_str(&format!(",{:.6e}", c.errors[i]));
            }
            s.push('\n');
        }
    }
    s
}

/// Solves the mixed-boundary network problem: Laplace (or the correction
/// problem when intensities vary) for w with boundary data derived from
/// u = `dirichlet_value` on the lower boundary and zero flux above, then
/// reconstructs u and optionally runs the removal-ordering study.
pub fn run_network_study(
    net: &LineNetwork,
    opts: &NetworkStudyOptions,
) -> Result<NetworkStudyResult> {
    for &q in &opts.fractions {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!(
                "removal fraction must lie in [0, 1], got {q}"
            )));
        }
    }
    let mut mesh = build_box(opts.element, &MeshParams::unit(opts.n_perp, opts.n_par))?;
    let bounds = mesh.bounds();
    let split = opts
        .split_height
        .unwrap_or(bounds.min.z + 0.25 * bounds.extent().z);
    mesh.retag_facets(|centroid, _| {
        if centroid.z < split {
            NETWORK_DIRICHLET_TAG
        } else {
            NETWORK_NEUMANN_TAG
        }
    });
    let cfg = KernelConfig::for_domain(bounds.diameter());
    let u_d = opts.dirichlet_value;

    let mut a = assemble_stiffness(&mesh, &|_| 1.0, &opts.quad)?;
    let all_constant = (0..net.len()).all(|i| net.profile(i).is_constant());
    let mut b = if all_constant {
        // Constant intensities have a vanishing correction load.
        vec![0.0; mesh.n_nodes()]
    } else {
        rhs_volume(
            &mesh,
            &|x| {
                let mut acc = 0.0;
                for (seg, f) in net.iter() {
                    acc += correction_rhs_segment(seg, f, x, &cfg)?;
                }
                Ok(acc)
            },
            &opts.quad,
            opts.threads,
        )?
    };
    let bn = rhs_neumann(
        &mesh,
        &[NETWORK_NEUMANN_TAG],
        &|x, n| Ok(-FOUR_PI * grad_singular_part(net, x, &cfg)?.dot(n)),
        &opts.quad,
    )?;
    for (b, bn) in b.iter_mut().zip(&bn) {
        *b += bn;
    }
    let bc = DirichletBc::from_function(&mesh, &[NETWORK_DIRICHLET_TAG], &|p| {
        Ok(FOUR_PI * u_d - FOUR_PI * singular_part(net, p, &cfg)?)
    })?;
    apply_dirichlet(&mut a, &mut b, &bc);
    let (sol, stats) = cg_solve(&a, &b, &opts.cg)?;
    drop(a);
    let w_h = FeFunction::from_values(&mesh, sol)?;

    let rec = reconstruct_u(&mesh, net, &cfg, w_h.clone())?;
    let u = rec.nodal().clone();
    let neumann_flux = surface_integral(
        &mesh,
        &[NETWORK_NEUMANN_TAG],
        &|x, n, _| {
            let gs = grad_singular_part(net, x, &cfg)?;
            let gw = w_h
                .grad(&mesh, x)
                .ok_or(Error::NonFiniteEvaluation(x.x, x.y, x.z))?;
            Ok((gs + gw * (1.0 / FOUR_PI)).dot(n))
        },
        &opts.quad,
    )?;

    let indicators = modelling_indicators(net, &mesh, &opts.quad, &cfg, opts.threads)?;
    let orderings = if net.is_empty() {
        Vec::new()
    } else {
        heuristic_orderings(net, &indicators)
    };
    let curves = if opts.run_removal && !net.is_empty() {
        let ctx = RemovalContext {
            mesh: &mesh,
            net,
            dirichlet_tags: vec![NETWORK_DIRICHLET_TAG],
            neumann_tags: vec![NETWORK_NEUMANN_TAG],
            u_d: &|_| u_d,
            cfg: &cfg,
            quad: opts.quad,
            threads: opts.threads,
        };
        removal_study(&ctx, &orderings, &opts.fractions, &opts.cg)?
    } else {
        Vec::new()
    };

    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if !curves.is_empty() {
            atomic_write(
                &dir.join("removal_curves.csv"),
                removal_curves_csv(&curves).as_bytes(),
            )?;
        }
        if opts.vtk {
            write_vtk(
                &dir.join("network_solution.vtk"),
                &mesh,
                &[("u", u.values()), ("w_h", w_h.values())],
            )?;
        }
    }

    Ok(NetworkStudyResult {
        mesh,
        w_h,
        u,
        split_height: split,
        indicators,
        orderings,
        curves,
        rel_residual: stats.relative_residual,
        clamp_events: cfg.clamp_count(),
        neumann_flux,
    })
}

/// Generates a deterministic pseudo-random interior network: endpoints at
/// least 5% of the box extent away from the boundary, lengths 5-30% of the
/// smallest extent, log-uniform radii in [0.01, 0.1] of that extent, and
/// coupling gamma = 1.0 for roughly one segment in ten (arterial) against
/// -0.1 for the rest (venous).  Intensities are the constant gamma * radius.
pub fn gen_network(count: usize, bounds: &BoxBounds, seed: u64) -> Result<LineNetwork> {
    if count == 0 {
        return Err(Error::invalid("synthetic network needs count >= 1"));
    }
    let ext = bounds.extent();
    let size = ext.x.min(ext.y).min(ext.z);
    if !(size > 0.0) {
        return Err(Error::invalid("degenerate bounding box"));
    }
    let lo = bounds.min + ext * 0.05;
    let hi = bounds.max - ext * 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = LineNetwork::new();
    while net.len() < count {
        let a = Point3::new(
            rng.gen_range(lo.x..hi.x),
            rng.gen_range(lo.y..hi.y),
            rng.gen_range(lo.z..hi.z),
        );
        let cos_t = rng.gen_range(-1.0f64..1.0);
        let phi = rng.gen_range(0.0..2.0 * PI);
        let sin_t = (1.0 - cos_t * cos_t).sqrt();
        let dir = Point3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t);
        let len = rng.gen_range(0.05..0.3) * size;
        let radius = (rng.gen_range(0.01f64.ln()..0.1f64.ln())).exp() * size;
        let gamma = if rng.gen::<f64>() < 0.1 { 1.0 } else { -0.1 };
        let b = a + dir * len;
        let inside = b.x > lo.x && b.x < hi.x && b.y > lo.y && b.y < hi.y && b.z > lo.z
            && b.z < hi.z;
        if !inside {
            continue;
        }
        let seg = match Segment::new(a, b) {
            Ok(s) => s,
            Err(_) => continue,
        };
        net.push(seg, IntensityProfile::constant(gamma * radius), radius, gamma);
    }
    Ok(net)
}
