use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model spec: {0}")]
    Spec(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("design matrix has rank 0")]
    RankZeroDesign,

    #[error("stage {stage} is out of range 1..={num_stages}")]
    StageOutOfRange { stage: usize, num_stages: usize },

    #[error("patient `{patient}` is not present at stage {stage}")]
    PatientAbsent { patient: String, stage: usize },

    #[error("parameter layout does not match the model spec ({0})")]
    LayoutMismatch(String),

    /// Normal equations are (numerically) singular: the smallest singular value of the
    /// design fell below the relative threshold.
    #[error("singular normal equations: numerical rank {rank} of {columns} columns")]
    Singular { rank: usize, columns: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("inverse-variance weighting needs positive variances: {0}")]
    NonPositiveVariance(String),

    #[error("treatment value {value} of patient `{patient}` is not in the coding pair ({t1}, {t2})")]
    TreatmentNotInCoding { patient: String, value: f64, t1: f64, t2: f64 },
}

impl Error {
    /// Numerical failures (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Singular { .. } | Error::RankZeroDesign | Error::NonPositiveVariance(_))
    }
}
