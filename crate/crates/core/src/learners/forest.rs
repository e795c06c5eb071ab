//! Bagged CART ensemble with per-split feature subsampling.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::matrix::{DenseMatrix, FeatureMatrix, OneHotEncoder};
use super::tree::{grow, validate, TargetRef, Task, TreeNode, TreeParams, TreeTarget};
use super::LearnError;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// `None` means `ceil(sqrt(d))` over the encoded columns.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub params: ForestParams,
    /// Seed of each tree's generator; it drives both the bootstrap draw and
    /// the feature subsets.
    pub tree_seeds: Vec<u64>,
    pub task: Task,
    pub n_classes: usize,
    encoder: OneHotEncoder,
}

pub fn fit_forest(x: &FeatureMatrix, y: &TreeTarget, params: &ForestParams) -> Result<ForestModel, LearnError> {
    let encoder = OneHotEncoder::fit(x);
    let dense = encoder.transform(x)?;
    fit_forest_dense(&dense, y, params, encoder)
}

fn fit_forest_dense(
    x: &DenseMatrix,
    y: &TreeTarget,
    params: &ForestParams,
    encoder: OneHotEncoder,
) -> Result<ForestModel, LearnError> {
    if params.n_trees == 0 {
        return Err(LearnError::InvalidParams("n_trees must be >= 1".into()));
    }
    if params.features_per_split == Some(0) {
        return Err(LearnError::InvalidParams("features_per_split must be >= 1".into()));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        task: y.task(),
    };
    validate(x, y, &tree_params)?;

    let d = x.n_cols();
    let k = params
        .features_per_split
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d.max(1));
    let n = x.n_rows();
    let target = TargetRef::new(y);

    let mut trees = Vec::with_capacity(params.n_trees);
    let mut tree_seeds = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let tree_seed = seed::combine(params.seed, t as u64);
        let mut rng = seed::rng(tree_seed);
        let indices: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut choose = |d: usize| -> Vec<usize> {
            if k >= d {
                (0..d).collect()
            } else {
                let mut s = sample(&mut rng, d, k).into_vec();
                s.sort_unstable();
                s
            }
        };
        trees.push(grow(x, target, indices, 0, &tree_params, &mut choose));
        tree_seeds.push(tree_seed);
    }
    Ok(ForestModel {
        trees,
        params: params.clone(),
        tree_seeds,
        task: y.task(),
        n_classes: y.n_classes(),
        encoder,
    })
}

impl ForestModel {
    pub fn feature_names(&self) -> Vec<String> {
        self.encoder.output_names()
    }

    /// Classification: mean over trees of the leaf's class-1 fraction
    /// (with pure leaves this is the fraction of trees voting 1).
    /// Regression: mean of the trees' leaf means.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>, LearnError> {
        let dense = self.encoder.transform(x)?;
        Ok(self.predict_dense(&dense))
    }

    pub fn predict_dense(&self, x: &DenseMatrix) -> Vec<f64> {
        let m = self.trees.len() as f64;
        x.rows()
            .map(|row| {
                self.trees
                    .iter()
                    .map(|t| {
                        let leaf = t.leaf_for(row);
                        match self.task {
                            Task::Classification => leaf.class_probability(1),
                            Task::Regression => leaf.value,
                        }
                    })
                    .sum::<f64>()
                    / m
            })
            .collect()
    }

    /// Averaged class distribution per row (classification only).
    pub fn predict_class_probabilities(&self, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>, LearnError> {
        let dense = self.encoder.transform(x)?;
        let m = self.trees.len() as f64;
        Ok(dense
            .rows()
            .map(|row| {
                let mut acc = vec![0.0; self.n_classes];
                for t in &self.trees {
                    let leaf = t.leaf_for(row);
                    for (k, a) in acc.iter_mut().enumerate() {
                        *a += leaf.class_probability(k) / m;
                    }
                }
                acc
            })
            .collect())
    }
}
