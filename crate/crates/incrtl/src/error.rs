use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the estimators, generators and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A Gram matrix could not be factorized: the smallest pivot fell below
    /// `1e-10` times the largest one, or the matrix is not positive definite.
    #[error("rank deficient design: {0}")]
    RankDeficient(&'static str),

    /// Noise-variance estimation needs more rows than columns.
    #[error("degenerate degrees of freedom: n = {n} <= d = {d}, cannot estimate the noise variance (need n > d or explicit weights)")]
    DegenerateDof { n: usize, d: usize },

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("unknown sweep parameter `{0}` (expected one of n_T, c, mu_target)")]
    UnknownParam(String),

    #[error("cannot remove {requested} features, only {available} are available")]
    TooManyFeatures { requested: usize, available: usize },

    #[error("insufficient rows: need {needed} but only {available} available")]
    InsufficientRows { needed: usize, available: usize },

    /// The Wilcoxon test needs at least 5 non-zero paired differences.
    #[error("too few pairs for the signed-rank test: {pairs} non-zero differences, need at least 5")]
    TooFewPairs { pairs: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("label column `{0}` not found in the CSV header")]
    MissingLabelColumn(String),

    #[error("non-numeric cell at data row {row}, column `{column}`: {value:?}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("replicate {replicate} failed: {source}")]
    ReplicateFailed {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    /// More than 1% of the Monte Carlo replicates failed even after a retry.
    #[error("{failed} of {total} replicates failed, aborting the experiment")]
    TooManyReplicateFailures { failed: usize, total: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical core rather than of input validation.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient(_)
                | Error::ReplicateFailed { .. }
                | Error::TooManyReplicateFailures { .. }
        )
    }
}
