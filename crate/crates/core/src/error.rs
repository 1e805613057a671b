use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("orientation {0} deg is not one of 0, 90, 180, 270")]
    InvalidOrientation(f64),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("{context}: {message}")]
    Parse { context: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("benchmark generation failed: {0}")]
    Generator(String),
    #[error("field grid is empty")]
    EmptyGrid,
    #[error("field has zero variance")]
    DegenerateField,
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{solver} did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("fit diverged at iteration {iteration}; recent losses {trace:?}")]
    FitDiverged { iteration: usize, trace: Vec<f64> },
    #[error("legalization is infeasible: {0}")]
    InfeasibleLegalization(String),
    #[error("non-finite gradient at iteration {iteration}: {detail}")]
    NonFiniteGradient { iteration: usize, detail: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("sample {id}: {source}")]
    Sample {
        id: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Milp(#[from] atmplace_milp::MilpError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidOrientation(_)
                | Error::InvalidDesign(_)
                | Error::InvalidPlacement(_)
                | Error::Parse { .. }
                | Error::Generator(_)
                | Error::ShapeMismatch { .. }
                | Error::Precondition(_)
        )
    }
}
