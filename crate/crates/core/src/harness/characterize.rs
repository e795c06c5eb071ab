//! Interpretable views of the partition: the eight-case tree, per-case
//! clusters and feature means, score-difference trees and additive-model
//! importances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dataset::{defendant_features, Dataset, DEFAULT_CHARGE_TOP_K};
use crate::learners::{
    fit_additive, fit_tree, mean_shift, AdditiveModel, AdditiveParams, Bandwidth, ClusterResult, DecisionTree,
    OneHotEncoder, TreeParams, TreeTarget,
};
use crate::partition::partition_rows;
use crate::scoring::{scores_for, Scorer};

pub const EIGHT_CASE_DEPTH: usize = 5;
pub const DIFFERENCE_DEPTH: usize = 3;
/// File stems of the score-difference trees, in output order.
pub const DIFFERENCE_TREES: [(&str, Scorer, Scorer); 3] = [
    ("hwr-hnr", Scorer::Hwr, Scorer::Hnr),
    ("c-hnr", Scorer::Compas, Scorer::Hnr),
    ("c-hwr", Scorer::Compas, Scorer::Hwr),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizeParams {
    pub max_depth: usize,
    /// `None` estimates the bandwidth per case.
    pub bandwidth: Option<f64>,
    pub seed: u64,
    pub charge_top_k: usize,
    /// Mean shift is quadratic in the case size; it can be skipped.
    pub cluster: bool,
}

impl Default for CharacterizeParams {
    fn default() -> Self {
        Self {
            max_depth: EIGHT_CASE_DEPTH,
            bandwidth: None,
            seed: 0,
            charge_top_k: DEFAULT_CHARGE_TOP_K,
            cluster: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseStats {
    pub n: usize,
    pub mean_priors: Option<f64>,
    pub mean_age: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Characterization {
    /// Multiclass tree whose class `k` is case `k + 1`.
    pub eight_case_tree: DecisionTree,
    pub tree_train_accuracy: f64,
    pub per_case_clusters: BTreeMap<u8, ClusterResult>,
    pub case_stats: BTreeMap<u8, CaseStats>,
    pub notes: Vec<String>,
}

impl Characterization {
    /// Tree export prefixed with the class-to-case mapping.
    pub fn tree_text(&self) -> String {
        format!("# class k is case k+1\n{}", self.eight_case_tree.to_text())
    }

    pub fn case_stats_csv(&self) -> String {
        let mut out = String::from("case_id,n,mean_priors_count,mean_age\n");
        let cell = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
        for (c, s) in &self.case_stats {
            out.push_str(&format!("{c},{},{},{}\n", s.n, cell(s.mean_priors), cell(s.mean_age)));
        }
        out
    }

    pub fn clusters_csv(&self) -> String {
        let mut out = String::from("case_id,n_modes,bandwidth,cluster_sizes\n");
        for (c, r) in &self.per_case_clusters {
            let sizes: Vec<String> = r.cluster_sizes().iter().map(usize::to_string).collect();
            out.push_str(&format!("{c},{},{:.4},{}\n", r.n_modes(), r.bandwidth, sizes.join(";")));
        }
        out
    }
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn characterize_partition(
    dataset: &Dataset,
    pair: (&Scorer, &Scorer),
    params: &CharacterizeParams,
) -> Result<Characterization, HarnessError> {
    let rows = partition_rows(dataset, &scores_for(dataset, pair.0)?, &scores_for(dataset, pair.1)?)?;
    let x = defendant_features(dataset, params.charge_top_k);
    let classes: Vec<usize> = rows.iter().map(|r| r.case.id() as usize - 1).collect();
    let target = TreeTarget::Classes(classes.clone());
    let tree = fit_tree(&x, &target, &TreeParams::classification(Some(params.max_depth)))?;
    let predicted = tree.predict(&x)?;
    let correct = predicted
        .iter()
        .zip(&classes)
        .filter(|(p, c)| **p as usize == **c)
        .count();

    let mut per_case_clusters = BTreeMap::new();
    let mut case_stats = BTreeMap::new();
    let mut notes = Vec::new();
    for case in 1..=8u8 {
        let members: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].case.id() == case).collect();
        let ds = dataset.defendants();
        case_stats.insert(
            case,
            CaseStats {
                n: members.len(),
                mean_priors: mean(members.iter().map(|&i| ds[i].priors_count as f64)),
                mean_age: mean(members.iter().map(|&i| ds[i].age as f64)),
            },
        );
        if members.is_empty() {
            notes.push(format!("case {case}: no rows, clustering skipped"));
            continue;
        }
        if !params.cluster {
            continue;
        }
        // Numeric columns only: one-hot indicators fragment the modes.
        let numeric: Vec<&str> = x
            .columns()
            .iter()
            .filter(|c| c.data.is_numeric())
            .map(|c| c.name.as_str())
            .collect();
        let sub = x.select(&numeric).take_rows(&members);
        let dense = OneHotEncoder::fit(&sub).transform(&sub)?.standardized();
        let bw = match params.bandwidth {
            Some(b) => Bandwidth::Fixed(b),
            None => Bandwidth::Auto { seed: params.seed },
        };
        per_case_clusters.insert(case, mean_shift(&dense, bw)?);
    }
    Ok(Characterization {
        eight_case_tree: tree,
        tree_train_accuracy: correct as f64 / rows.len() as f64,
        per_case_clusters,
        case_stats,
        notes,
    })
}

/// Regression trees on the defendant features for HWR - HNR, C - HNR and
/// C - HWR, keyed by file stem.
pub fn score_difference_trees(
    dataset: &Dataset,
    max_depth: usize,
    charge_top_k: usize,
) -> Result<Vec<(String, DecisionTree)>, HarnessError> {
    let x = defendant_features(dataset, charge_top_k);
    let mut out = Vec::new();
    for (stem, a, b) in &DIFFERENCE_TREES {
        let sa = scores_for(dataset, a)?;
        let sb = scores_for(dataset, b)?;
        let diff: Vec<f64> = sa.iter().zip(&sb).map(|(p, q)| p.value - q.value).collect();
        let tree = fit_tree(&x, &TreeTarget::Values(diff), &TreeParams::regression(Some(max_depth)))?;
        out.push((stem.to_string(), tree));
    }
    Ok(out)
}

/// Additive model of each scorer's 0..=10 value on the defendant features.
pub fn score_importance(
    dataset: &Dataset,
    params: &AdditiveParams,
    charge_top_k: usize,
) -> Result<Vec<(Scorer, AdditiveModel)>, HarnessError> {
    let x = defendant_features(dataset, charge_top_k);
    Scorer::HUMAN_AND_MACHINE
        .into_iter()
        .map(|s| {
            let y: Vec<f64> = scores_for(dataset, &s)?.iter().map(|r| r.value).collect();
            Ok((s, fit_additive(&x, &y, params)?))
        })
        .collect()
}

pub fn importance_csv(models: &[(Scorer, AdditiveModel)]) -> String {
    let mut out = String::from("scorer,rank,feature,importance\n");
    for (s, m) in models {
        for (rank, f) in m.ranking().iter().enumerate() {
            let imp = m.importance_of(f).unwrap_or(0.0);
            out.push_str(&format!("{s},{},{f},{imp:.4}\n", rank + 1));
        }
    }
    out
}
