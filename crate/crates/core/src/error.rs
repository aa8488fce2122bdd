use thiserror::Error;

use crate::learners::lasso::LassoModel;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Pauli label {label:?}: unexpected character {ch:?} at position {pos}")]
    PauliParse { label: String, pos: usize, ch: char },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("resource guard: {0}")]
    ResourceLimit(String),

    #[error("operator is not Hermitian (max |H_ij - conj(H_ji)| = {0:.3e})")]
    NotHermitian(f64),

    #[error("{what} did not converge: {detail}")]
    NoConvergence { what: &'static str, detail: String },

    #[error("ground state is degenerate (gap {gap:.3e})")]
    DegenerateGroundState { gap: f64 },

    #[error("catalog has no entry for x_S = {0}")]
    CatalogMiss(String),

    #[error("LASSO certificate not reached: duality gap {gap:.3e} after {iterations} iterations")]
    LassoNotConverged {
        gap: f64,
        iterations: usize,
        best: Box<LassoModel>,
    },

    #[error("insufficient probes: {have} samples with x1 = 0, need at least {need}")]
    InsufficientProbes { have: usize, need: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Wraps an error with the experiment phase it came from.
    pub fn in_phase(self, phase: &'static str) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::PauliParse { .. }
            | Error::DimensionMismatch { .. }
            | Error::Invalid(_)
            | Error::ResourceLimit(_)
            | Error::NotHermitian(_)
            | Error::CatalogMiss(_)
            | Error::InsufficientProbes { .. }
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_) => true,
            Error::Phase { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
