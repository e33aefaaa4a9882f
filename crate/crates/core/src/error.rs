//! Error type shared by every module of the crate.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("unsupported Matrix Market header: {0}")]
    UnsupportedHeader(String),

    #[error("entry ({row}, {col}) out of bounds for dimension {n}")]
    IndexOutOfBounds { row: usize, col: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("basis is rank deficient: numerical rank {rank} of {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("factor is singular: {nzero} numerically zero pivots")]
    SingularFactor { nzero: usize },

    #[error("shift {sigma} is (numerically) an eigenvalue of the pencil")]
    SingularShift { sigma: f64 },

    #[error("the shift must be nonzero")]
    ShiftIsZero,

    #[error("interval endpoint {alpha} lies (numerically) on the pencil spectrum")]
    AlphaOnSpectrum { alpha: f64 },

    #[error("no nonsingular trailing block can be selected from the constraint basis")]
    PermutationFailure,

    #[error("matrix is not positive semi-definite: found eigenvalue {eigenvalue:e}")]
    NotPositiveSemiDefinite { eigenvalue: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("Lanczos breakdown at step {step}: beta = {beta:e}")]
    BreakdownBeta { step: usize, beta: f64 },

    #[error("inner product produced a negative square norm {value:e}; M is not positive definite")]
    NonpositiveNorm { value: f64 },

    #[error("projected block Z_N^T K_G Z_N is numerically singular")]
    SingularProjectedBlock,

    #[error("column {index} of K_G Z_N is numerically zero; it belongs to the common nullspace")]
    ZeroScalingColumn { index: usize },

    #[error("canonical form has coupling blocks (n0 = {n0} > 0)")]
    CouplingPresent { n0: usize },

    #[error("eigenvalue map is singular at {what}")]
    MapPole { what: String },

    #[error("iteration failed to converge: {0}")]
    NoConvergence(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
