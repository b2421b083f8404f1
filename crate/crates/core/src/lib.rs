//! Artificial-immune-system detection engine.
//!
//! The engine is organized as a two-stage pipeline. Stage one turns raw
//! feature records into antigens: [`representation`] fits a schema over a
//! training set, min-max normalizes continuous features, one-hot expands
//! categoricals, and provides affinity measures over both real-valued and
//! bit-string encodings. Stage two models the immune response over that
//! space: [`negsel`] generates hypersphere detectors censored against self,
//! [`clonal`] matures a detector population by selection, cloning and
//! inverse-fitness hypermutation, [`dca`] fuses PAMP/danger/safe signal
//! streams through a dendritic-cell pool and scores antigens by mature
//! presentations, and [`lifecycle`] ages, prunes and re-seeds detectors as
//! the self region drifts.
//!
//! [`synth`] builds deterministic benchmark scenarios, [`dataset`] handles
//! CSV ingestion, [`config`] carries the engine configuration, and
//! [`report`] computes evaluation metrics. All randomized operations are
//! driven by seeded ChaCha streams and are reproducible bit-for-bit.

pub mod clonal;
pub mod config;
pub mod dataset;
pub mod dca;
pub mod error;
pub mod index;
pub mod lifecycle;
pub mod negsel;
pub mod report;
pub mod representation;
pub mod synth;

pub use error::Error;

/// Convenience result alias used throughout the engine.
pub type Result<T> = std::result::Result<T, Error>;
