use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unsupported constraint relation: {0}")]
    UnsupportedRelation(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("instance too large for exhaustive search: {0} variables (limit {1})")]
    TooLarge(usize, usize),

    #[error("no feasible assignment found")]
    Infeasible,

    #[error("approximation ratio undefined for a zero optimum")]
    UndefinedRatio,

    #[error("refusing to write into non-empty directory {0} (pass --force)")]
    DirectoryNotEmpty(PathBuf),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
