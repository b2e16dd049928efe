use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input contains no observations")]
    EmptyInput,
    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("quantile level {0} outside (0, 1)")]
    QuantileOutOfRange(f64),
    #[error("squared distance {0} is negative")]
    NegativeDistance(f64),
    #[error("loss model has no density generator and cannot drive the EM E-step")]
    NoDensityGenerator,
    #[error("Huber normalization has a pole: c^2 - b*r = {0}")]
    PoleInNormalization(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("requested {l} clusters but only {n} observations")]
    TooManyClusters { l: usize, n: usize },
    #[error("cluster {cluster} degenerated during estimation")]
    DegenerateCluster { cluster: usize },
    #[error("FIM block is numerically singular (condition {condition:e})")]
    SingularBlock { condition: f64 },
    #[error("invalid candidate model: {0}")]
    InvalidModel(String),
    #[error("every candidate model was invalid")]
    AllCandidatesInvalid,
}
