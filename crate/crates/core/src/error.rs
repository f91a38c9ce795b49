use thiserror::Error;

use crate::moments::RegimeReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation order {c} out of range for a graph with {n} nodes")]
    TruncationOutOfRange { c: usize, n: usize },

    #[error("mismatched truncation orders: {0} vs {1}")]
    MismatchedTruncation(usize, usize),

    #[error("graphs of differing sizes in one corpus: {0} vs {1}")]
    MixedGraphSizes(usize, usize),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver did not converge: {0}")]
    EigenSolver(String),

    /// Some coordinate sits in the small-variance regime, so no law J can
    /// supply the observed variance.
    #[error("infeasible fit: small-variance regime on indices {indices:?}")]
    SmallRegime {
        indices: Vec<usize>,
        report: RegimeReport,
    },

    /// The scaled mean of J leaves [0, 1] for every admissible omega.
    #[error(
        "infeasible fit: mean density outside [0, 1] on indices {indices:?} (values {values:?})"
    )]
    GeometryInfeasible {
        indices: Vec<usize>,
        values: Vec<f64>,
    },

    #[error("beta inversion failed on coordinate {index}: variance too large for the range")]
    BetaVariance { index: usize },

    #[error("critical condition never violated up to N = {0}")]
    NeverViolated(usize),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Infeasibility errors are distinct from validation failures; the CLI
    /// maps them to their own exit code.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::SmallRegime { .. } | Error::GeometryInfeasible { .. }
        )
    }
}
