use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pseudospin length j = {0}: 2j must be a positive integer")]
    InvalidSpin(String),

    #[error("invalid model parameter: {0}")]
    InvalidParams(String),

    #[error("basis has no explicit Fock cutoff (n_max = auto); resolve it first")]
    UnresolvedCutoff,

    #[error("unsupported observable `{0}` (expected number, jz or number+<shift>)")]
    UnsupportedObservable(String),

    #[error("eigensolver failed to converge on a {dim}x{dim} matrix ({context})")]
    EigensolverFailure { dim: usize, context: String },

    #[error(
        "Fock cutoff ceiling {ceiling} reached without convergence of the lowest {levels} levels \
         (last change {last_change:e}, tolerance {tolerance:e})"
    )]
    CutoffCeiling {
        ceiling: usize,
        levels: usize,
        last_change: f64,
        tolerance: f64,
    },

    #[error("level window {lo}..{hi} exceeds the {available} certified levels")]
    WindowOutOfRange {
        lo: usize,
        hi: usize,
        available: usize,
    },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("spacing must be non-negative, got {0}")]
    NegativeSpacing(f64),

    #[error("perturbative cluster formula holds at resonance only (omega = {omega}, omega0 = {omega0})")]
    OffResonance { omega: f64, omega0: f64 },

    #[error("thermal tail weight {tail:e} of Z exceeds 1e-8; increase the cutoff or the certified level count")]
    ThermalTail { tail: f64 },

    #[error("eigenvectors are required but were not computed")]
    MissingEigenvectors,

    #[error("operator and spectrum live on different bases: {0}")]
    BasisMismatch(String),

    #[error("F(0) vanishes; the OTOC deficit is undefined")]
    DegenerateOtoc,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint {path} was written by a different sweep configuration")]
    ResumeMismatch { path: PathBuf },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CutoffCeiling { .. } | Error::EigensolverFailure { .. } | Error::ThermalTail { .. } => 2,
            Error::ResumeMismatch { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
