use thiserror::Error;

use crate::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("eigendecomposition did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("singular linear system")]
    Singular,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("aggregated lower bound {lower} exceeds incumbent {best}")]
    LowerBoundViolation { lower: f64, best: f64 },

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("sphere solver did not certify optimality: gap {gap:e} after {cuts} cuts")]
    NotCertified {
        coefficients: Vec<f64>,
        objective: f64,
        gap: f64,
        cuts: usize,
    },

    #[error("column {0} has zero variance")]
    DegenerateColumn(usize),

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error("csv row {row}, column {col}: {message}")]
    Csv {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("csv: {0}")]
    CsvFormat(String),

    #[error("report does not match its schema: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn mismatch(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            op,
            left_rows: left.0,
            left_cols: left.1,
            right_rows: right.0,
            right_cols: right.1,
        }
    }

    /// True for errors caused by malformed or unusable input data.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::NonFinite { .. }
                | Error::InvalidShape(_)
                | Error::InvalidArgument(_)
                | Error::InvalidPartition(_)
                | Error::DegenerateColumn(_)
                | Error::Unsupported(_)
                | Error::Csv { .. }
                | Error::CsvFormat(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }

    /// True for errors that come from an enumeration or solver budget.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::TooLarge(_) | Error::NotCertified { .. } | Error::Lp(LpError::IterationLimit(_))
        )
    }
}
