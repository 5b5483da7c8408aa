use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: cannot read {value:?} as {expected}")]
    Parse {
        row: usize,
        column: String,
        value: String,
        expected: &'static str,
    },

    #[error("recipe error: {0}")]
    Recipe(String),

    #[error("recipe does not cover value {value:?} in column `{column}` (row {row})")]
    RecipeCoverage {
        row: usize,
        column: String,
        value: String,
    },

    #[error("dataset is empty after preprocessing")]
    EmptyDataset,

    #[error("split error: {0}")]
    Split(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid plan: {0}")]
    Plan(String),

    #[error("self-consistency is undefined for {0} predictions (need at least 2)")]
    UndefinedSc(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("self-consistency value {value} is not on the grid for B = {replicates}")]
    OffGrid { value: f64, replicates: usize },

    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("super ensemble outer bag {outer}, inner model {inner}: {source}")]
    Bag {
        outer: usize,
        inner: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("split {split}, stage `{stage}`: {source}")]
    Stage {
        split: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_stage(self, split: usize, stage: &'static str) -> Self {
        Error::Stage {
            split,
            stage,
            source: Box::new(self),
        }
    }
}
