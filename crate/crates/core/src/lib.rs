//! A finite element toolkit for 3D elliptic problems driven by 1D line
//! sources (wells, vessels, fibers) embedded in the domain.
//!
//! The toolkit solves `-div(kappa grad u) = f dirac_line` two ways: directly,
//! with the line source as a measure-valued load, and by splitting off the
//! analytic segment-source singularity so that only a smooth correction is
//! computed numerically.  It ships structured tetrahedral and prismatic box
//! meshes, a CG solver, error norms with near-line subdomain control, and
//! convergence / model-reduction studies wired into a small CLI.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod mesh;
pub mod quadrature;
pub mod cli;
pub mod config;
pub mod solver;
pub mod studies;
pub mod util;

pub use error::{Error, Result};
