use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the geometry, registration and statistics layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Two points are (numerically) in each other's cut locus, so the shortest
    /// geodesic between them is not unique.
    #[error("points within {margin:e} of the cut locus (distance {distance}){}", fmt_index(*.index))]
    CutLocus {
        distance: f64,
        margin: f64,
        index: Option<usize>,
    },

    #[error("tangent vector is based at a different point than the one supplied")]
    BaseMismatch,

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid tangent vector: {0}")]
    InvalidTangent(String),

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("TSRVFs use different reference points")]
    MismatchedReference,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("manifold mismatch: expected {expected}, found {found}")]
    MismatchedManifold { expected: String, found: String },

    #[error("invalid warp: {0}")]
    InvalidWarp(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}:{line}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("track {0} has too few observations")]
    EmptyTrack(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn fmt_index(index: Option<usize>) -> String {
    match index {
        Some(i) => format!(" at sample {i}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn cut_locus(distance: f64) -> Self {
        Error::CutLocus {
            distance,
            margin: crate::manifold::CUT_LOCUS_MARGIN,
            index: None,
        }
    }

    /// Attaches a sample index to a cut-locus error; other errors pass through.
    pub fn at_index(self, i: usize) -> Self {
        match self {
            Error::CutLocus {
                distance, margin, ..
            } => Error::CutLocus {
                distance,
                margin,
                index: Some(i),
            },
            other => other,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
