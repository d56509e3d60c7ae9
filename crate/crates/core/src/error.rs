use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` is constant; a bandwidth cannot be derived from zero spread")]
    ConstantColumn(String),

    #[error(
        "row {row} has zero total kernel weight; use a larger bandwidth or the gaussian kernel"
    )]
    IsolatedPoint { row: usize },

    #[error("transform stage {stage} failed: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("column `{0}` is continuous but a discrete column was expected")]
    KindMismatch(String),

    #[error("selected columns mix continuous and discrete kinds ({0}); mixed data is not supported")]
    MixedKinds(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient sample: n = {n}, at least {min} rows required")]
    InsufficientSample { n: usize, min: usize },

    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("work estimate {work:.3e} exceeds the configured budget {ceiling:.3e}")]
    Budget { work: f64, ceiling: f64 },

    #[error("input contains no data rows")]
    EmptyData,

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("independence test of {x} and {y} given {{{cond}}} failed: {source}")]
    Oracle {
        x: String,
        y: String,
        cond: String,
        #[source]
        source: Box<Error>,
    },

    #[error("node sets differ: {0}")]
    NodeMismatch(String),

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_stage(self, stage: usize) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strip `Stage`/`Oracle` wrappers to reach the underlying cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Oracle { source, .. } => source.root(),
            other => other,
        }
    }
}
