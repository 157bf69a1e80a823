//! Command-line entry point.  Exit codes: 0 on success, 1 on validation or
//! usage errors, 2 when the linear solver fails to converge.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{heuristic_orderings, modelling_indicators, RemovalCurve};
use crate::config::{self, RunConfig};
use crate::io::{atomic_write, network_text, read_network, write_network};
use crate::kernels::KernelConfig;
use crate::mesh::{BoxBounds, ElementKind, MeshParams};
use crate::quadrature::QuadratureSpec;
use crate::solver::CgOptions;
use crate::studies::{
    build_box, gen_network, run_network_study, run_segment_study, run_smooth_study, MethodSel,
    NetworkStudyOptions, StudyOptions, StudyResult,
};
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "linesource",
    version,
    about = "Finite-element solvers and convergence studies for 3D diffusion \
             problems driven by 1D line sources",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convergence study: through-going line with smooth intensity, comparing
    /// the standard and splitting discretizations.
    StudySmooth(CommonOpts),
    /// Convergence study: interior segment with linear intensity (reduced
    /// regularity at the endpoints).
    StudySegment(CommonOpts),
    /// Solve a network problem read from --network: Dirichlet data below the
    /// split height, zero flux above, reconstructed u written on request.
    /// Setting `fractions` in the config file also runs the removal study.
    SolveNetwork(CommonOpts),
    /// Rank the segments of a network by the modelling indicator and simpler
    /// heuristics.  CSV columns: id, radius, length, radius_sqrt_length,
    /// indicator, then rank_by_<ordering> giving each segment's position
    /// (0 = removed last) under the four orderings radius, length,
    /// radius_sqrt_length, indicator.
    RankSegments(CommonOpts),
    /// Print the sizes of the structured mesh the other commands would build.
    MeshInfo(CommonOpts),
    /// Generate a deterministic synthetic network; written to --out/network.txt
    /// or standard output.
    GenNetwork(CommonOpts),
}

/// One flag set shared by every subcommand; flags irrelevant to a subcommand
/// are accepted and ignored.  Values given here override the --config file.
#[derive(Args, Clone)]
struct CommonOpts {
    /// Mesh spacings perpendicular to the line axis, comma-separated
    /// fractions (e.g. 1/8,1/16).  Single-mesh commands use the first value.
    #[arg(long = "h-perp", value_name = "LIST", value_parser = spacing_list_arg)]
    h_perp: Option<SpacingList>,

    /// Axial mesh spacings, comma-separated fractions.
    #[arg(long = "h-par", value_name = "LIST", value_parser = spacing_list_arg)]
    h_par: Option<SpacingList>,

    /// Element kind: tet | prism.
    #[arg(long, value_name = "KIND", value_parser = element_arg)]
    element: Option<ElementKind>,

    /// Discretization(s) to run: standard | ssb | both.
    #[arg(long, value_name = "METHOD", value_parser = method_arg)]
    method: Option<MethodSel>,

    /// Radius of the tube around each segment excluded from the
    /// reduced-domain norms.
    #[arg(long = "exclusion-radius", value_name = "R")]
    exclusion_radius: Option<f64>,

    /// Configuration file (key = value sections); flags override its keys.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Network file (`seg ax ay az bx by bz radius gamma` lines).
    #[arg(long, value_name = "PATH")]
    network: Option<PathBuf>,

    /// Output directory for tables, CSV, and VTK files.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Write VTK snapshots of the computed fields (requires --out).
    #[arg(long)]
    vtk: bool,

    /// Worker threads for assembly and norm evaluation; 1 is the
    /// determinism reference.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    /// Seed for synthetic network generation.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Segment count for synthetic network generation.
    #[arg(long, value_name = "N")]
    count: Option<usize>,
}

#[derive(Clone, Debug)]
struct SpacingList(Vec<usize>);

fn spacing_list_arg(s: &str) -> std::result::Result<SpacingList, String> {
    config::parse_spacing_list(s)
        .map(SpacingList)
        .map_err(config::plain_msg)
}

fn element_arg(s: &str) -> std::result::Result<ElementKind, String> {
    config::parse_element(s).map_err(config::plain_msg)
}

fn method_arg(s: &str) -> std::result::Result<MethodSel, String> {
    config::parse_method(s).map_err(config::plain_msg)
}

/// Parses the process arguments, runs the requested command, and returns the
/// process exit code.
pub fn run_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NotConverged { .. } | Error::Breakdown { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::StudySmooth(c) => cmd_study(&c, true),
        Cmd::StudySegment(c) => cmd_study(&c, false),
        Cmd::SolveNetwork(c) => cmd_solve_network(&c),
        Cmd::RankSegments(c) => cmd_rank_segments(&c),
        Cmd::MeshInfo(c) => cmd_mesh_info(&c),
        Cmd::GenNetwork(c) => cmd_gen_network(&c),
    }
}

/// Flags folded into a [`RunConfig`], overlaid on the --config file if any.
fn effective_config(c: &CommonOpts) -> Result<RunConfig> {
    let from_flags = RunConfig {
        h_perp: c.h_perp.clone().map(|l| l.0),
        h_par: c.h_par.clone().map(|l| l.0),
        element: c.element,
        method: c.method,
        exclusion_radius: c.exclusion_radius,
        threads: c.threads,
        seed: c.seed,
        count: c.count,
        out_dir: c.out.clone(),
        vtk: c.vtk.then_some(true),
        ..RunConfig::default()
    };
    let base = match &c.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    let cfg = from_flags.overlaid(base);
    if cfg.vtk == Some(true) && cfg.out_dir.is_none() {
        return Err(Error::invalid("--vtk requires an output directory (--out)"));
    }
    if cfg.threads == Some(0) {
        return Err(Error::invalid("--threads must be at least 1"));
    }
    Ok(cfg)
}

fn quad_from(cfg: &RunConfig) -> QuadratureSpec {
    let mut q = QuadratureSpec::default();
    if let Some(d) = cfg.volume_degree {
        q.volume_degree = d;
    }
    if let Some(n) = cfg.line_points {
        q.line_points = n;
    }
    if let Some(d) = cfg.facet_degree {
        q.facet_degree = d;
    }
    q
}

fn cg_from(cfg: &RunConfig) -> CgOptions {
    CgOptions {
        rel_tol: cfg.rel_tol.unwrap_or(CgOptions::default().rel_tol),
        max_iter: cfg.max_iter,
    }
}

fn study_options(cfg: &RunConfig, mut o: StudyOptions) -> StudyOptions {
    if let Some(x0) = cfg.x0 {
        o.line_offset.0 = x0;
    }
    if let Some(y0) = cfg.y0 {
        o.line_offset.1 = y0;
    }
    if let Some(v) = &cfg.h_perp {
        o.n_perp = v.clone();
    }
    if let Some(v) = &cfg.h_par {
        o.n_par = v.clone();
    }
    if let Some(e) = cfg.element {
        o.element = e;
    }
    if let Some(m) = cfg.method {
        o.method = m;
    }
    if let Some(r) = cfg.exclusion_radius {
        o.exclusion_radius = r;
    }
    if let Some(a) = cfg.alpha {
        o.alpha = a;
    }
    if let Some(t) = cfg.threads {
        o.threads = t;
    }
    o.quad = quad_from(cfg);
    o.cg = cg_from(cfg);
    o.out_dir = cfg.out_dir.clone();
    o.vtk = cfg.vtk.unwrap_or(false);
    o
}

fn print_study_result(res: &StudyResult) {
    if let Some(t) = &res.standard {
        print!("{}", t.to_text());
        println!();
    }
    if let Some(t) = &res.ssb {
        print!("{}", t.to_text());
        println!();
    }
    println!("max relative residual: {:.3e}", res.max_rel_residual);
    println!("clamped kernel evaluations: {}", res.clamp_events);
}

fn cmd_study(c: &CommonOpts, smooth: bool) -> Result<()> {
    let cfg = effective_config(c)?;
    let defaults = if smooth {
        StudyOptions::smooth_defaults()
    } else {
        StudyOptions::segment_defaults()
    };
    let opts = study_options(&cfg, defaults);
    let res = if smooth {
        run_smooth_study(&opts)?
    } else {
        run_segment_study(&opts)?
    };
    print_study_result(&res);
    Ok(())
}

fn require_network(c: &CommonOpts) -> Result<PathBuf> {
    c.network
        .clone()
        .ok_or_else(|| Error::invalid("this command requires --network PATH"))
}

/// Single-mesh commands: first --h-perp/--h-par entry, else the [mesh]
/// section, else 16 subdivisions.
fn mesh_resolution(cfg: &RunConfig) -> (usize, usize, ElementKind) {
    let n_perp = cfg
        .h_perp
        .as_ref()
        .map(|v| v[0])
        .or(cfg.n_perp)
        .unwrap_or(16);
    let n_par = cfg
        .h_par
        .as_ref()
        .map(|v| v[0])
        .or(cfg.n_par)
        .unwrap_or(16);
    (n_perp, n_par, cfg.element.unwrap_or(ElementKind::Tet4))
}

fn element_name(kind: ElementKind) -> &'static str {
    match kind {
        ElementKind::Tet4 => "tet",
        ElementKind::Prism6 => "prism",
    }
}

fn removal_text(curves: &[RemovalCurve]) -> String {
    let mut s = String::from("removal-ordering study, L2(om) error of reconstructed u:\n");
    s.push_str(&format!("{:<10}", "fraction"));
    for c in curves {
        s.push_str(&format!(" {:>20}", c.name));
    }
    s.push('\n');
    if let Some(first) = curves.first() {
        for (i, q) in first.fractions.iter().enumerate() {
            s.push_str(&format!("{q:<10.3}"));
            for c in curves {
                s.push_str(&format!(" {:>20.6e}", c.errors[i]));
            }
            s.push('\n');
        }
    }
    s
}

fn cmd_solve_network(c: &CommonOpts) -> Result<()> {
    let cfg = effective_config(c)?;
    let path = require_network(c)?;
    let net = read_network(&path)?;
    let (n_perp, n_par, element) = mesh_resolution(&cfg);
    let mut opts = NetworkStudyOptions {
        n_perp,
        n_par,
        element,
        split_height: cfg.split_height,
        run_removal: cfg.fractions.is_some(),
        threads: cfg.threads.unwrap_or(1),
        quad: quad_from(&cfg),
        cg: cg_from(&cfg),
        out_dir: cfg.out_dir.clone(),
        vtk: cfg.vtk.unwrap_or(false),
        ..NetworkStudyOptions::default()
    };
    if let Some(v) = cfg.dirichlet_value {
        opts.dirichlet_value = v;
    }
    if let Some(f) = &cfg.fractions {
        opts.fractions = f.clone();
    }
    let res = run_network_study(&net, &opts)?;
    println!("network: {} ({} segments)", path.display(), net.len());
    println!(
        "mesh: {} n_perp={} n_par={} ({} nodes, {} cells)",
        element_name(element),
        n_perp,
        n_par,
        res.mesh.n_nodes(),
        res.mesh.n_cells()
    );
    println!(
        "boundary split at z = {}: tag 100 dirichlet (u = {}), tag 200 zero-flux",
        res.split_height, opts.dirichlet_value
    );
    println!("relative residual: {:.3e}", res.rel_residual);
    println!("reconstructed flux through zero-flux boundary: {:.3e}", res.neumann_flux);
    println!("clamped kernel evaluations: {}", res.clamp_events);
    if !res.curves.is_empty() {
        println!();
        print!("{}", removal_text(&res.curves));
    }
    if let Some(dir) = &cfg.out_dir {
        if !res.curves.is_empty() {
            println!("wrote {}", dir.join("removal_curves.csv").display());
        }
        if opts.vtk {
            println!("wrote {}", dir.join("network_solution.vtk").display());
        }
    }
    Ok(())
}

fn ranking_csv(
    net: &crate::geometry::LineNetwork,
    indicators: &[f64],
    orderings: &[crate::analysis::RankedOrdering],
) -> String {
    let mut s = String::from("id,radius,length,radius_sqrt_length,indicator");
    for o in orderings {
        s.push_str(&format!(",rank_by_{}", o.name));
    }
    s.push('\n');
    let n = net.len();
    let ranks: Vec<Vec<usize>> = orderings
        .iter()
        .map(|o| {
            let mut r = vec![0usize; n];
            for (pos, &i) in o.order.iter().enumerate() {
                r[i] = pos;
            }
            r
        })
        .collect();
    for i in 0..n {
        let radius = net.radius(i);
        let length = net.segment(i).length();
        s.push_str(&format!(
            "{i},{radius:.6e},{length:.6e},{:.6e},{:.6e}",
            radius * length.sqrt(),
            indicators[i]
        ));
        for r in &ranks {
            s.push_str(&format!(",{}", r[i]));
        }
        s.push('\n');
    }
    s
}

fn cmd_rank_segments(c: &CommonOpts) -> Result<()> {
    let cfg = effective_config(c)?;
    let path = require_network(c)?;
    let net = read_network(&path)?;
    let (n_perp, n_par, element) = mesh_resolution(&cfg);
    let mesh = build_box(element, &MeshParams::unit(n_perp, n_par))?;
    let kcfg = KernelConfig::for_domain(mesh.bounds().diameter());
    let quad = quad_from(&cfg);
    let indicators = modelling_indicators(&net, &mesh, &quad, &kcfg, cfg.threads.unwrap_or(1))?;
    let orderings = heuristic_orderings(&net, &indicators);
    let csv = ranking_csv(&net, &indicators, &orderings);
    match &cfg.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let target = dir.join("segment_ranking.csv");
            atomic_write(&target, csv.as_bytes())?;
            println!(
                "ranked {} segments on a {} n_perp={} n_par={} mesh",
                net.len(),
                element_name(element),
                n_perp,
                n_par
            );
            println!("wrote {}", target.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_mesh_info(c: &CommonOpts) -> Result<()> {
    let cfg = effective_config(c)?;
    let (n_perp, n_par, element) = mesh_resolution(&cfg);
    let mesh = build_box(element, &MeshParams::unit(n_perp, n_par))?;
    let b = mesh.bounds();
    let ext = b.extent();
    println!("element: {}", element_name(element));
    println!(
        "subdivisions: n_perp={} n_par={} (h_perp = {:.6e}, h_par = {:.6e})",
        n_perp,
        n_par,
        1.0 / n_perp as f64,
        1.0 / n_par as f64
    );
    println!("nodes: {}", mesh.n_nodes());
    println!("cells: {}", mesh.n_cells());
    let mut tags: Vec<i32> = mesh.facets().iter().map(|f| f.tag).collect();
    tags.sort_unstable();
    tags.dedup();
    let counts: Vec<String> = tags
        .iter()
        .map(|&t| {
            let n = mesh.facets().iter().filter(|f| f.tag == t).count();
            format!("tag {t}: {n}")
        })
        .collect();
    println!(
        "boundary facets: {} ({})",
        mesh.facets().len(),
        counts.join(", ")
    );
    println!(
        "bounds: [{}, {}] x [{}, {}] x [{}, {}]",
        b.min.x, b.max.x, b.min.y, b.max.y, b.min.z, b.max.z
    );
    println!("volume: {}", ext.x * ext.y * ext.z);
    Ok(())
}

fn cmd_gen_network(c: &CommonOpts) -> Result<()> {
    let cfg = effective_config(c)?;
    let count = cfg.count.unwrap_or(20);
    let seed = cfg.seed.unwrap_or(0);
    let net = gen_network(count, &BoxBounds::unit(), seed)?;
    match &cfg.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let target = dir.join("network.txt");
            write_network(&target, &net)?;
            println!("wrote {} ({} segments, seed {})", target.display(), count, seed);
        }
        None => print!("{}", network_text(&net)),
    }
    Ok(())
}
