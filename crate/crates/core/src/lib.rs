//! Human and machine risk-score fusion: score aggregation, agreement
//! partitions, interpretable learners, hybrid models and the experiment
//! harness that evaluates them.

pub mod dataset;
pub mod harness;
pub mod hybrid;
pub mod learners;
pub mod metrics;
pub mod partition;
pub mod scoring;
pub mod seed;

pub use dataset::{generate_synthetic, load_dataset, load_dir, write_dataset, Dataset, SynthConfig};
pub use harness::{run_experiment, ExperimentConfig, ResultTable};
pub use hybrid::{FittedHybrid, HybridKind, HybridSpec};
pub use metrics::MetricSet;
pub use partition::{assign_case, CaseLabel};
pub use scoring::{RiskScore, Scorer};
