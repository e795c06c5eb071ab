//! End-to-end experiments: repeated stratified splits over a model grid,
//! partition characterization, score-difference trees and report files.

pub mod characterize;
pub mod experiment;
pub mod report;
pub mod splits;

use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::hybrid::HybridError;
use crate::learners::LearnError;
use crate::metrics::MetricsError;
use crate::partition::PartitionError;
use crate::scoring::ScoringError;

pub use characterize::{
    characterize_partition, importance_csv, score_difference_trees, score_importance, CaseStats, Characterization,
    CharacterizeParams,
};
pub use experiment::{
    hybrid_input, run_experiment, scorer_metrics, ExperimentConfig, Population, ResultRow, ResultTable,
};
pub use report::{artifact_files, emit_report, load_report, summary_markdown, PartitionReport, Report};
pub use splits::{make_splits, stratified_split, Split};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("too few rows to split: {0} (need at least 5)")]
    TooFewRows(usize),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed file {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl HarnessError {
    pub fn is_io(&self) -> bool {
        match self {
            HarnessError::Io { .. } => true,
            HarnessError::Json(e) => e.is_io(),
            HarnessError::Dataset(e) => e.is_io(),
            _ => false,
        }
    }
}
