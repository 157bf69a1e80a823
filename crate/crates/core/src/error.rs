use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.  Every fallible operation returns this so that the
/// drivers and the CLI can report failures uniformly.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate segment: endpoints coincide (|b - a| = {0:.3e})")]
    DegenerateSegment(f64),

    #[error("non-finite kernel evaluation at ({0:.6}, {1:.6}, {2:.6}): point lies on a source segment and clamp distance is zero")]
    NonFiniteEvaluation(f64, f64, f64),

    #[error("coefficient kappa is not positive at ({0:.6}, {1:.6}, {2:.6})")]
    NonPositiveKappa(f64, f64, f64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{path}:{line}: parse error: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("cell {cell} is invalid: {msg}")]
    InvalidCell { cell: usize, msg: String },

    #[error("cell {cell} is degenerate (|det J| = {det:.3e})")]
    DegenerateCell { cell: usize, det: f64 },

    #[error("segment not covered by mesh: uncovered length fraction {gap:.3e}")]
    SegmentOutsideMesh { gap: f64 },

    #[error("non-finite evaluation while assembling cell {cell}")]
    NonFiniteInCell { cell: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is numerically singular at pivot {pivot} (|a| = {value:.3e})")]
    SingularMatrix { pivot: usize, value: f64 },

    #[error("conjugate gradient breakdown at iteration {iteration}: p'Ap = {curvature:.3e} <= 0")]
    Breakdown { iteration: usize, curvature: f64 },

    #[error("solver did not converge: {iterations} iterations, relative residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
