use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by data generation, model fitting, scoring and experiment runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("covariance not positive definite after {attempts} resamples (p={p}, rho_relevant={rho_relevant}, rho_irrelevant={rho_irrelevant}, cross_range=[{cross_lo}, {cross_hi}])")]
    NotPositiveDefinite {
        p: usize,
        rho_relevant: f64,
        rho_irrelevant: f64,
        cross_lo: f64,
        cross_hi: f64,
        attempts: usize,
    },

    #[error("Cholesky factorization failed: matrix is not positive definite")]
    Factorization,

    #[error("row {row} is constant across features; correlation distance undefined")]
    ConstantRow { row: usize },

    #[error("degenerate RDM: rank vector is constant")]
    DegenerateRdm,

    #[error("RDM size mismatch: {left} vs {right} items")]
    RdmMismatch { left: usize, right: usize },

    #[error("column {column} has zero variance")]
    ZeroVarianceColumn { column: usize },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("too few observations: n={n} with p={p} predictors")]
    TooFewObservations { n: usize, p: usize },

    #[error("unbalanced design: group sizes differ ({0})")]
    UnbalancedDesign(String),

    #[error("REML optimisation did not converge; final bracket on log(theta) = [{lo}, {hi}]")]
    NoConvergence { lo: f64, hi: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures that mark a single score as degenerate rather than aborting a run.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::DegenerateRdm | Error::ConstantRow { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
