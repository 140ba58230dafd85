use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid parent set for variable {child}: {reason}")]
    InvalidParentSet { child: usize, reason: String },

    /// Some vertex has no finite way to attach to the forest.
    #[error("no feasible forest: vertex {vertex} has no finite root or in-edge weight")]
    Infeasible { vertex: usize },

    #[error("brute-force enumeration limited to {max} vertices, got {n}")]
    TooLarge { n: usize, max: usize },

    /// Laplacian elimination hit a pivot below the singularity threshold.
    #[error("weight matrix numerically singular: pivot {pivot:e} at column {column} (threshold {threshold:e})")]
    Singular {
        column: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
