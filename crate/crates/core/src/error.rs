use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or mismatched caller input.
    #[error("invalid input: {0}")]
    Input(String),

    /// The warp problem has no feasible point under the requested bounds.
    #[error("infeasible constraints: {0}")]
    Constraint(String),

    /// The active-set solver hit its iteration cap. The best iterate is kept
    /// so callers can inspect or fall back to it.
    #[error("warp solver did not converge after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        best_col_widths: Vec<f64>,
        best_row_heights: Vec<f64>,
    },

    /// Widening past the distortion threshold without permission to scale.
    #[error("expansion exceeds distortion budget: warp reaches width {reached:.2} of requested {requested}")]
    ExpansionBudget { reached: f64, requested: u32 },

    #[error("{context} failed at factor {factor}: {source}")]
    AtFactor {
        context: &'static str,
        factor: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the request itself (bad sizes, mismatched inputs, unreadable files).
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Input(_) | Error::Io { .. } | Error::Image(_) => true,
            Error::AtFactor { source, .. } => source.is_input_error(),
            _ => false,
        }
    }

    /// True for feasibility and distortion-budget failures.
    pub fn is_budget_error(&self) -> bool {
        match self {
            Error::Constraint(_) | Error::ExpansionBudget { .. } | Error::NotConverged { .. } => {
                true
            }
            Error::AtFactor { source, .. } => source.is_budget_error(),
            _ => false,
        }
    }
}
