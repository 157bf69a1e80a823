//! Plain-text run configuration: `key = value` lines grouped into
//! `[section]` headers, mirroring the study, mesh, solver, and quadrature
//! settings.  Unknown sections and keys are rejected with the offending line
//! number.  Command-line flags override file values; see [`RunConfig::overlaid`].
//!
//! Recognized layout:
//!
//! ```ini
//! [study]
//! study = smooth            # smooth | segment | network
//! x0 = 13/24                # in-plane line offset
//! y0 = 0.45
//! element = prism           # tet | prism
//! method = both             # standard | ssb | both
//! h_perp = 1/8,1/16         # mesh spacings, fractions or decimals
//! h_par = 1/16
//! exclusion_radius = 0.2
//! alpha = 0.5
//! split_height = 0.25       # network study: Dirichlet/Neumann split
//! dirichlet_value = 1.0
//! fractions = 0.1,0.5,0.9   # network study: removal fractions
//! threads = 1
//! seed = 42
//! count = 20                # synthetic network size
//!
//! [mesh]
//! n_perp = 16               # single resolution (network solves, mesh-info)
//! n_par = 16
//!
//! [solver]
//! rel_tol = 1e-10
//! max_iter = 5000
//!
//! [quadrature]
//! volume_degree = 4
//! line_points = 3
//! facet_degree = 2
//!
//! [output]
//! dir = out
//! vtk = false
//! ```
//!
//! Comment lines start with `#` or `;`.  A repeated key keeps its last value.

use std::path::{Path, PathBuf};

use crate::mesh::ElementKind;
use crate::studies::MethodSel;
use crate::{Error, Result};

/// Which driver a configuration refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyKind {
    Smooth,
    Segment,
    Network,
}

/// All settings a run can take from a file; every field is optional and
/// absent fields fall back to the drivers' defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub study: Option<StudyKind>,
    pub x0: Option<f64>,
    pub y0: Option<f64>,
    pub element: Option<ElementKind>,
    pub method: Option<MethodSel>,
    /// In-plane subdivision counts (parsed from spacings).
    pub h_perp: Option<Vec<usize>>,
    /// Axial subdivision counts.
    pub h_par: Option<Vec<usize>>,
    pub exclusion_radius: Option<f64>,
    pub alpha: Option<f64>,
    pub split_height: Option<f64>,
    pub dirichlet_value: Option<f64>,
    /// Removal fractions; setting this makes `solve-network` run the
    /// removal-ordering study.
    pub fractions: Option<Vec<f64>>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub n_perp: Option<usize>,
    pub n_par: Option<usize>,
    pub rel_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub volume_degree: Option<usize>,
    pub line_points: Option<usize>,
    pub facet_degree: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub vtk: Option<bool>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Study,
    Mesh,
    Solver,
    Quadrature,
    Output,
}

/// Parses `p/q` ratios (`1/16`) or plain decimals (`0.0625`) to a finite
/// number.
pub fn parse_fraction(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad numerator in `{s}`")))?;
        let q: f64 = q
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad denominator in `{s}`")))?;
        if !(q > 0.0) {
            return Err(Error::invalid(format!(
                "denominator must be positive in `{s}`"
            )));
        }
        p / q
    } else {
        s.parse()
            .map_err(|_| Error::invalid(format!("expected a number, got `{s}`")))?
    };
    if !v.is_finite() {
        return Err(Error::invalid(format!("`{s}` is not finite")));
    }
    Ok(v)
}

/// Converts a mesh spacing (`1/16`, `2/32`, `0.0625`) to its subdivision
/// count; the spacing must divide the unit interval.
pub fn parse_spacing(s: &str) -> Result<usize> {
    let h = parse_fraction(s)?;
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::invalid(format!(
            "mesh spacing must lie in (0, 1], got `{s}`"
        )));
    }
    let n = 1.0 / h;
    let r = n.round();
    if (n - r).abs() > 1e-6 * r {
        return Err(Error::invalid(format!(
            "mesh spacing `{s}` does not divide the unit interval; use a fraction like 1/16"
        )));
    }
    Ok(r as usize)
}

/// Parses a comma-separated list of spacings to subdivision counts.
pub fn parse_spacing_list(s: &str) -> Result<Vec<usize>> {
    split_list(s)?.iter().map(|t| parse_spacing(t)).collect()
}

/// Parses a comma-separated list of fractions or decimals.
pub fn parse_fraction_list(s: &str) -> Result<Vec<f64>> {
    split_list(s)?.iter().map(|t| parse_fraction(t)).collect()
}

fn split_list(s: &str) -> Result<Vec<&str>> {
    let items: Vec<&str> = s.split(',').map(str::trim).collect();
    if items.iter().any(|t| t.is_empty()) {
        return Err(Error::invalid(format!("empty item in list `{s}`")));
    }
    Ok(items)
}

pub fn parse_element(s: &str) -> Result<ElementKind> {
    match s.trim() {
        "tet" => Ok(ElementKind::Tet4),
        "prism" => Ok(ElementKind::Prism6),
        other => Err(Error::invalid(format!(
            "element must be `tet` or `prism`, got `{other}`"
        ))),
    }
}

pub fn parse_method(s: &str) -> Result<MethodSel> {
    match s.trim() {
        "standard" => Ok(MethodSel::Standard),
        "ssb" => Ok(MethodSel::Ssb),
        "both" => Ok(MethodSel::Both),
        other => Err(Error::invalid(format!(
            "method must be `standard`, `ssb`, or `both`, got `{other}`"
        ))),
    }
}

pub fn parse_study(s: &str) -> Result<StudyKind> {
    match s.trim() {
        "smooth" => Ok(StudyKind::Smooth),
        "segment" => Ok(StudyKind::Segment),
        "network" => Ok(StudyKind::Network),
        other => Err(Error::invalid(format!(
            "study must be `smooth`, `segment`, or `network`, got `{other}`"
        ))),
    }
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(Error::invalid(format!(
            "expected `true` or `false`, got `{other}`"
        ))),
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("expected a nonnegative integer, got `{s}`")))
}

fn parse_u64(s: &str) -> Result<u64> {
    s.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("expected a nonnegative integer, got `{s}`")))
}

pub(crate) fn plain_msg(e: Error) -> String {
    match e {
        Error::InvalidParams(m) => m,
        other => other.to_string(),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse_str(&text, path)
    }

    /// Parses configuration text; `origin` labels error messages.
    pub fn parse_str(text: &str, origin: &Path) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut section = Section::None;
        for (i, raw) in text.lines().enumerate() {
            let lno = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    Error::parse(origin, lno, "unterminated section header")
                })?;
                section = match name.trim() {
                    "study" => Section::Study,
                    "mesh" => Section::Mesh,
                    "solver" => Section::Solver,
                    "quadrature" => Section::Quadrature,
                    "output" => Section::Output,
                    other => {
                        return Err(Error::parse(
                            origin,
                            lno,
                            format!("unknown section [{other}]"),
                        ))
                    }
                };
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(origin, lno, format!("expected `key = value`, got `{line}`"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(Error::parse(origin, lno, format!("empty value for `{key}`")));
            }
            cfg.set(section, key, value)
                .map_err(|e| Error::parse(origin, lno, plain_msg(e)))?;
        }
        Ok(cfg)
    }

    fn set(&mut self, section: Section, key: &str, value: &str) -> Result<()> {
        match section {
            Section::None => {
                return Err(Error::invalid(format!(
                    "key `{key}` appears before any [section] header"
                )))
            }
            Section::Study => match key {
                "study" => self.study = Some(parse_study(value)?),
                "x0" => self.x0 = Some(parse_fraction(value)?),
                "y0" => self.y0 = Some(parse_fraction(value)?),
                "element" => self.element = Some(parse_element(value)?),
                "method" => self.method = Some(parse_method(value)?),
                "h_perp" => self.h_perp = Some(parse_spacing_list(value)?),
                "h_par" => self.h_par = Some(parse_spacing_list(value)?),
                "exclusion_radius" => self.exclusion_radius = Some(parse_fraction(value)?),
                "alpha" => self.alpha = Some(parse_fraction(value)?),
                "split_height" => self.split_height = Some(parse_fraction(value)?),
                "dirichlet_value" => self.dirichlet_value = Some(parse_fraction(value)?),
                "fractions" => self.fractions = Some(parse_fraction_list(value)?),
                "threads" => self.threads = Some(parse_usize(value)?),
                "seed" => self.seed = Some(parse_u64(value)?),
                "count" => self.count = Some(parse_usize(value)?),
                other => return Err(unknown_key(other, "study")),
            },
            Section::Mesh => match key {
                "n_perp" => self.n_perp = Some(parse_usize(value)?),
                "n_par" => self.n_par = Some(parse_usize(value)?),
                other => return Err(unknown_key(other, "mesh")),
            },
            Section::Solver => match key {
                "rel_tol" => self.rel_tol = Some(parse_fraction(value)?),
                "max_iter" => self.max_iter = Some(parse_usize(value)?),
                other => return Err(unknown_key(other, "solver")),
            },
            Section::Quadrature => match key {
                "volume_degree" => self.volume_degree = Some(parse_usize(value)?),
                "line_points" => self.line_points = Some(parse_usize(value)?),
                "facet_degree" => self.facet_degree = Some(parse_usize(value)?),
                other => return Err(unknown_key(other, "quadrature")),
            },
            Section::Output => match key {
                "dir" => self.out_dir = Some(PathBuf::from(value)),
                "vtk" => self.vtk = Some(parse_bool(value)?),
                other => return Err(unknown_key(other, "output")),
            },
        }
        Ok(())
    }

    /// Field-wise overlay: values present in `self` win over `base`.
    pub fn overlaid(self, base: RunConfig) -> RunConfig {
        RunConfig {
            study: self.study.or(base.study),
            x0: self.x0.or(base.x0),
            y0: self.y0.or(base.y0),
            element: self.element.or(base.element),
            method: self.method.or(base.method),
            h_perp: self.h_perp.or(base.h_perp),
            h_par: self.h_par.or(base.h_par),
            exclusion_radius: self.exclusion_radius.or(base.exclusion_radius),
            alpha: self.alpha.or(base.alpha),
            split_height: self.split_height.or(base.split_height),
            dirichlet_value: self.dirichlet_value.or(base.dirichlet_value),
            fractions: self.fractions.or(base.fractions),
            threads: self.threads.or(base.threads),
            seed: self.seed.or(base.seed),
            count: self.count.or(base.count),
            n_perp: self.n_perp.or(base.n_perp),
            n_par: self.n_par.or(base.n_par),
            rel_tol: self.rel_tol.or(base.rel_tol),
            max_iter: self.max_iter.or(base.max_iter),
            volume_degree: self.volume_degree.or(base.volume_degree),
            line_points: self.line_points.or(base.line_points),
            facet_degree: self.facet_degree.or(base.facet_degree),
            out_dir: self.out_dir.or(base.out_dir),
            vtk: self.vtk.or(base.vtk),
        }
    }
}

fn unknown_key(key: &str, section: &str) -> Error {
    Error::invalid(format!("unknown key `{key}` in [{section}]"))
}
