use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: row {row}, column `{column}`: {message}")]
    Ingest {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: schema mismatch: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("insufficient history: {available} steps available, at least {required} required")]
    InsufficientHistory { available: usize, required: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate clustering: {0}")]
    DegenerateClusters(String),

    #[error("controller `{controller}` fault at step {step}: {message}")]
    ControllerFault {
        controller: String,
        step: usize,
        message: String,
    },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("artifact format: {0}")]
    Artifact(String),

    #[error("validation: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Ingest { .. } => "ingest",
            Error::Schema { .. } => "schema",
            Error::InsufficientHistory { .. } => "insufficient_history",
            Error::InsufficientData(_) => "insufficient_data",
            Error::DegenerateClusters(_) => "degenerate_clusters",
            Error::ControllerFault { .. } => "controller_fault",
            Error::Solver(_) => "solver",
            Error::MissingArtifact(_) => "missing_artifact",
            Error::Artifact(_) => "artifact",
            Error::Validation(_) => "validation",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Toml(_) => "toml",
        }
    }
}
