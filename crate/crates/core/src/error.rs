//! Engine error type.

use thiserror::Error;

/// All failure modes of the detection engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Schema fitting failed (empty input, inconsistent field sets,
    /// duplicate or empty feature names).
    #[error("schema error: {0}")]
    Schema(String),

    /// A record could not be encoded under the active schema.
    #[error("encode error: feature `{feature}`: {reason}")]
    Encode { feature: String, reason: String },

    /// Incompatible representations passed to an affinity measure.
    #[error("affinity error: {0}")]
    Affinity(String),

    /// Vector dimensionality mismatch.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Detector generation exhausted its attempt budget without admitting
    /// a single detector: self fills the space at this radius.
    #[error("coverage failure: no detector admitted after {attempts} candidates")]
    Coverage { attempts: u64 },

    /// Artifact was produced under a different feature schema.
    #[error("schema fingerprint mismatch: detector set carries {expected}, active schema is {got}")]
    SchemaMismatch { expected: String, got: String },

    /// A labeled validation set is missing one of its classes.
    #[error("validation error: {0}")]
    Validation(String),

    /// Illegal state transition (e.g. stepping a migrated dendritic cell).
    #[error("lifecycle error: {0}")]
    Lifecycle(String),

    /// Malformed or inadmissible input (bad parameters, empty streams,
    /// non-monotonic timestamps, unparseable rows).
    #[error("input error: {0}")]
    Input(String),

    /// Archiving a detector that never matched anything.
    #[error("policy error: {0}")]
    Policy(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}
