//! Interpretable and ensemble learners: CART trees, a bagged random forest,
//! a stump-boosted additive model and flat-kernel mean shift.

pub mod additive;
pub mod forest;
pub mod matrix;
pub mod mean_shift;
pub mod tree;

use thiserror::Error;

pub use additive::{fit_additive, AdditiveModel, AdditiveParams};
pub use forest::{fit_forest, ForestModel, ForestParams};
pub use matrix::{Column, ColumnData, DenseMatrix, FeatureMatrix, OneHotEncoder, OTHER_CATEGORY};
pub use mean_shift::{mean_shift, Bandwidth, ClusterResult};
pub use tree::{fit_tree, DecisionTree, Task, TreeNode, TreeParams, TreeTarget};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("{rows} feature rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("column `{column}` has {found} rows, expected {expected}")]
    RaggedColumns {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("column `{0}` is not numeric")]
    NonNumeric(String),
    #[error("non-finite value in input")]
    NonFinite,
}
