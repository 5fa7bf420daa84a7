//! Batch orchestration: configuration, manifests, caching and the
//! end-to-end run.

mod cache;
mod config;
pub mod io;
mod manifest;
mod run;
mod stages;

pub use cache::{FeatureCache, CACHE_ENV};
pub use config::{Config, EvaluationConfig, GradingConfig, SegmentationConfig};
pub use manifest::{Manifest, ManifestEntry, MANIFEST_HEADER};
pub use run::{
    entry_features, evaluation_report, extract_all, predictions_csv, rater_agreement, read_predictions_csv, run,
    EntryFailure, RunOutcome, MAX_FAILURE_RATE,
};
pub use stages::{analyze, segment, SegmentSummary, SepAnalysis};
