//! Greedy CART induction on dense matrices.
//!
//! Classification splits minimize weighted Gini impurity, regression splits
//! minimize the summed squared error. Candidate thresholds are midpoints
//! between consecutive distinct values; a row goes left when its value is
//! `<= threshold`. Ties resolve to the lowest feature index, then the lowest
//! threshold. Leaves predict the majority class (smaller id on ties) or the
//! mean.

use serde::{Deserialize, Serialize};

use super::matrix::{DenseMatrix, FeatureMatrix, OneHotEncoder};
use super::LearnError;

/// Relative slack when comparing impurities so that float noise cannot
/// override the tie-breaking order.
const IMPURITY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub task: Task,
}

impl TreeParams {
    pub fn classification(max_depth: Option<usize>) -> Self {
        Self {
            max_depth,
            min_samples_leaf: 1,
            task: Task::Classification,
        }
    }

    pub fn regression(max_depth: Option<usize>) -> Self {
        Self {
            max_depth,
            min_samples_leaf: 1,
            task: Task::Regression,
        }
    }
}

/// Training target: class ids `0..n_classes` or real values.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeTarget {
    Classes(Vec<usize>),
    Values(Vec<f64>),
}

impl TreeTarget {
    pub fn len(&self) -> usize {
        match self {
            TreeTarget::Classes(v) => v.len(),
            TreeTarget::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn binary(labels: &[bool]) -> Self {
        TreeTarget::Classes(labels.iter().map(|&y| y as usize).collect())
    }

    pub fn task(&self) -> Task {
        match self {
            TreeTarget::Classes(_) => Task::Classification,
            TreeTarget::Values(_) => Task::Regression,
        }
    }

    /// At least two classes so that binary probabilities are always defined.
    pub(crate) fn n_classes(&self) -> usize {
        match self {
            TreeTarget::Classes(v) => v.iter().max().map_or(2, |&m| (m + 1).max(2)),
            TreeTarget::Values(_) => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub n_samples: usize,
    /// Empty for regression nodes.
    pub class_counts: Vec<usize>,
    /// Majority class id (as `f64`) for classification, mean for regression.
    pub value: f64,
}

impl NodeStats {
    /// Fraction of the node's samples in `class`.
    pub fn class_probability(&self, class: usize) -> f64 {
        if self.n_samples == 0 {
            return 0.0;
        }
        self.class_counts.get(class).copied().unwrap_or(0) as f64 / self.n_samples as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        stats: NodeStats,
    },
    Split {
        feature: usize,
        threshold: f64,
        stats: NodeStats,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

/// Borrowed view of a training target restricted to nothing in particular;
/// rows are addressed through index lists.
#[derive(Clone, Copy)]
pub(crate) enum TargetRef<'a> {
    Classes { labels: &'a [usize], n_classes: usize },
    Values(&'a [f64]),
}

impl<'a> TargetRef<'a> {
    pub(crate) fn new(target: &'a TreeTarget) -> Self {
        match target {
            TreeTarget::Classes(labels) => TargetRef::Classes {
                labels,
                n_classes: target.n_classes(),
            },
            TreeTarget::Values(v) => TargetRef::Values(v),
        }
    }
}

impl TreeNode {
    pub fn stats(&self) -> &NodeStats {
        match self {
            TreeNode::Leaf { stats } | TreeNode::Split { stats, .. } => stats,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn leaf_for(&self, row: &[f64]) -> &NodeStats {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { stats } => return stats,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.leaf_for(row).value
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Fits a tree on the rows `indices` of `x`, considering all features at
    /// every split.
    pub fn fit_dense(x: &DenseMatrix, target: &TreeTarget, params: &TreeParams) -> Result<TreeNode, LearnError> {
        validate(x, target, params)?;
        let all: Vec<usize> = (0..x.n_cols()).collect();
        let indices: Vec<usize> = (0..x.n_rows()).collect();
        Ok(grow(x, TargetRef::new(target), indices, 0, params, &mut |_| {
            all.clone()
        }))
    }

    /// Indented text rendering, one node per line:
    /// `feature <= threshold | samples=n | counts=[...] | pred=c`.
    /// The left (condition true) child is printed first.
    pub fn to_text(&self, feature_names: &[String]) -> String {
        let mut out = String::new();
        self.render(feature_names, 0, &mut out);
        out
    }

    fn render(&self, names: &[String], depth: usize, out: &mut String) {
        let indent = "  ".repeat(depth);
        let stats = self.stats();
        let head = match self {
            TreeNode::Leaf { .. } => "leaf".to_string(),
            TreeNode::Split { feature, threshold, .. } => {
                let name = names.get(*feature).cloned().unwrap_or_else(|| format!("x{feature}"));
                format!("{name} <= {threshold}")
            }
        };
        let tail = if stats.class_counts.is_empty() {
            format!("value={:.4}", stats.value)
        } else {
            let counts: Vec<String> = stats.class_counts.iter().map(|c| c.to_string()).collect();
            format!("counts=[{}] | pred={}", counts.join(","), stats.value as usize)
        };
        out.push_str(&format!("{indent}{head} | samples={} | {tail}\n", stats.n_samples));
        if let TreeNode::Split { left, right, .. } = self {
            left.render(names, depth + 1, out);
            right.render(names, depth + 1, out);
        }
    }
}

pub(crate) fn validate(x: &DenseMatrix, target: &TreeTarget, params: &TreeParams) -> Result<(), LearnError> {
    if x.n_rows() != target.len() {
        return Err(LearnError::LengthMismatch {
            rows: x.n_rows(),
            targets: target.len(),
        });
    }
    if target.is_empty() {
        return Err(LearnError::EmptyInput);
    }
    if params.min_samples_leaf == 0 {
        return Err(LearnError::InvalidParams("min_samples_leaf must be >= 1".into()));
    }
    if params.task != target.task() {
        return Err(LearnError::InvalidParams(format!(
            "task {:?} does not match the target kind",
            params.task
        )));
    }
    if x.rows().flatten().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFinite);
    }
    if let TreeTarget::Values(v) = target {
        if v.iter().any(|y| !y.is_finite()) {
            return Err(LearnError::NonFinite);
        }
    }
    Ok(())
}

fn node_stats(target: TargetRef<'_>, indices: &[usize]) -> NodeStats {
    match target {
        TargetRef::Classes { labels, n_classes } => {
            let mut counts = vec![0usize; n_classes];
            for &i in indices {
                counts[labels[i]] += 1;
            }
            // first maximum wins: smaller class id on ties
            let majority = counts
                .iter()
                .enumerate()
                .fold(0, |best, (k, &c)| if c > counts[best] { k } else { best });
            NodeStats {
                n_samples: indices.len(),
                class_counts: counts,
                value: majority as f64,
            }
        }
        TargetRef::Values(values) => {
            let mean = indices.iter().map(|&i| values[i]).sum::<f64>() / indices.len() as f64;
            NodeStats {
                n_samples: indices.len(),
                class_counts: Vec::new(),
                value: mean,
            }
        }
    }
}

fn is_pure(target: TargetRef<'_>, indices: &[usize]) -> bool {
    match target {
        TargetRef::Classes { labels, .. } => indices.iter().all(|&i| labels[i] == labels[indices[0]]),
        TargetRef::Values(values) => indices.iter().all(|&i| values[i] == values[indices[0]]),
    }
}

pub(crate) fn grow(
    x: &DenseMatrix,
    target: TargetRef<'_>,
    indices: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    features_for_split: &mut dyn FnMut(usize) -> Vec<usize>,
) -> TreeNode {
    let stats = node_stats(target, &indices);
    let depth_exhausted = params.max_depth.is_some_and(|d| depth >= d);
    if depth_exhausted || indices.len() < 2 * params.min_samples_leaf || is_pure(target, &indices) {
        return TreeNode::Leaf { stats };
    }
    let features = features_for_split(x.n_cols());
    let Some(best) = best_split(x, target, &indices, &features, params.min_samples_leaf) else {
        return TreeNode::Leaf { stats };
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        indices.iter().partition(|&&i| x.get(i, best.feature) <= best.threshold);
    let left = grow(x, target, left_idx, depth + 1, params, features_for_split);
    let right = grow(x, target, right_idx, depth + 1, params, features_for_split);
    TreeNode::Split {
        feature: best.feature,
        threshold: best.threshold,
        stats,
        left: Box::new(left),
        right: Box::new(right),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted impurity of the two children, normalized by the node size.
    pub impurity: f64,
}

/// Best split over `features` (scanned in the given order) for the rows in
/// `indices`, or `None` when no threshold leaves `min_leaf` rows per side.
pub fn best_split_for(
    x: &DenseMatrix,
    target: &TreeTarget,
    indices: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    best_split(x, TargetRef::new(target), indices, features, min_leaf)
}

fn best_split(
    x: &DenseMatrix,
    target: TargetRef<'_>,
    indices: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitCandidate> {
    let n = indices.len();
    let mut best: Option<SplitCandidate> = None;
    let mut order = indices.to_vec();

    let offer = |best: &mut Option<SplitCandidate>, cand: SplitCandidate| {
        let better = match best {
            None => true,
            Some(b) => cand.impurity < b.impurity - IMPURITY_EPS * b.impurity.abs().max(1.0),
        };
        if better {
            *best = Some(cand);
        }
    };

    for &f in features {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
        match target {
            TargetRef::Classes { labels, n_classes } => {
                let mut left = vec![0u64; n_classes];
                let mut right = vec![0u64; n_classes];
                for &i in &order {
                    right[labels[i]] += 1;
                }
                let mut sq_left: u64 = 0;
                let mut sq_right: u64 = right.iter().map(|c| c * c).sum();
                for p in 0..n - 1 {
                    let k = labels[order[p]];
                    sq_left += 2 * left[k] + 1;
                    sq_right -= 2 * right[k] - 1;
                    left[k] += 1;
                    right[k] -= 1;
                    let n_left = p + 1;
                    let n_right = n - n_left;
                    let (v, w) = (x.get(order[p], f), x.get(order[p + 1], f));
                    if v == w || n_left < min_leaf || n_right < min_leaf {
                        continue;
                    }
                    let impurity = (n_left as f64 - sq_left as f64 / n_left as f64 + n_right as f64
                        - sq_right as f64 / n_right as f64)
                        / n as f64;
                    offer(
                        &mut best,
                        SplitCandidate {
                            feature: f,
                            threshold: 0.5 * (v + w),
                            impurity,
                        },
                    );
                }
            }
            TargetRef::Values(values) => {
                let mean = indices.iter().map(|&i| values[i]).sum::<f64>() / n as f64;
                let (mut sum_l, mut sq_l) = (0.0, 0.0);
                let (mut sum_r, mut sq_r) = order.iter().fold((0.0, 0.0), |(s, q), &i| {
                    let d = values[i] - mean;
                    (s + d, q + d * d)
                });
                for p in 0..n - 1 {
                    let d = values[order[p]] - mean;
                    sum_l += d;
                    sq_l += d * d;
                    sum_r -= d;
                    sq_r -= d * d;
                    let n_left = p + 1;
                    let n_right = n - n_left;
                    let (v, w) = (x.get(order[p], f), x.get(order[p + 1], f));
                    if v == w || n_left < min_leaf || n_right < min_leaf {
                        continue;
                    }
                    let sse_l = (sq_l - sum_l * sum_l / n_left as f64).max(0.0);
                    let sse_r = (sq_r - sum_r * sum_r / n_right as f64).max(0.0);
                    offer(
                        &mut best,
                        SplitCandidate {
                            feature: f,
                            threshold: 0.5 * (v + w),
                            impurity: (sse_l + sse_r) / n as f64,
                        },
                    );
                }
            }
        }
    }
    best
}

/// A CART tree together with the encoding of its training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub task: Task,
    pub n_classes: usize,
    encoder: OneHotEncoder,
}

pub fn fit_tree(x: &FeatureMatrix, y: &TreeTarget, params: &TreeParams) -> Result<DecisionTree, LearnError> {
    let encoder = OneHotEncoder::fit(x);
    let dense = encoder.transform(x)?;
    let root = TreeNode::fit_dense(&dense, y, params)?;
    Ok(DecisionTree {
        root,
        task: params.task,
        n_classes: y.n_classes(),
        encoder,
    })
}

impl DecisionTree {
    pub fn feature_names(&self) -> Vec<String> {
        self.encoder.output_names()
    }

    pub fn encoder(&self) -> &OneHotEncoder {
        &self.encoder
    }

    /// Majority class (classification) or mean (regression) per row.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, LearnError> {
        let dense = self.encoder.transform(x)?;
        Ok(dense.rows().map(|r| self.root.predict_row(r)).collect())
    }

    /// Leaf fraction of class 1 per row.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>, LearnError> {
        let dense = self.encoder.transform(x)?;
        Ok(dense
            .rows()
            .map(|r| self.root.leaf_for(r).class_probability(1))
            .collect())
    }

    pub fn to_text(&self) -> String {
        self.root.to_text(&self.feature_names())
    }

    /// Name of the encoded feature used at the root, if the root splits.
    pub fn root_feature(&self) -> Option<String> {
        match &self.root {
            TreeNode::Split { feature, .. } => self.feature_names().get(*feature).cloned(),
            TreeNode::Leaf { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    fn accuracy(tree: &TreeNode, x: &DenseMatrix, y: &[usize]) -> f64 {
        let correct = x
            .rows()
            .zip(y)
            .filter(|(r, &c)| tree.predict_row(r) as usize == c)
            .count();
        correct as f64 / y.len() as f64
    }

    #[test]
    fn single_class_gives_single_leaf() {
        let x = dense(&[&[1.0], &[2.0], &[3.0]]);
        let t = TreeNode::fit_dense(
            &x,
            &TreeTarget::Classes(vec![1, 1, 1]),
            &TreeParams::classification(None),
        )
        .unwrap();
        assert!(t.is_leaf());
        assert_eq!(t.stats().value, 1.0);
    }

    #[test]
    fn one_dimensional_stump() {
        // Enumerating the three candidate thresholds 1.5, 2.5, 3.5 by hand:
        // weighted Gini = 1/3, 0, 1/3. The unique optimum is 2.5.
        let x = dense(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let y = vec![0, 0, 1, 1];
        let t = TreeNode::fit_dense(
            &x,
            &TreeTarget::Classes(y.clone()),
            &TreeParams::classification(Some(1)),
        )
        .unwrap();
        match &t {
            TreeNode::Split { threshold, .. } => assert!((2.0..3.0).contains(threshold)),
            _ => panic!("expected a split"),
        }
        assert_eq!(accuracy(&t, &x, &y), 1.0);
    }

    #[test]
    fn xor_needs_depth_two() {
        let x = dense(&[&[0.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]]);
        let y = vec![0, 1, 1, 0];
        let target = TreeTarget::Classes(y.clone());
        let t2 = TreeNode::fit_dense(&x, &target, &TreeParams::classification(Some(2))).unwrap();
        assert_eq!(accuracy(&t2, &x, &y), 1.0);
        let t1 = TreeNode::fit_dense(&x, &target, &TreeParams::classification(Some(1))).unwrap();
        assert_eq!(accuracy(&t1, &x, &y), 0.5);
    }

    #[test]
    fn majority_tie_goes_to_smaller_class() {
        let x = dense(&[&[1.0], &[1.0]]);
        let t = TreeNode::fit_dense(&x, &TreeTarget::Classes(vec![1, 0]), &TreeParams::classification(None)).unwrap();
        assert!(t.is_leaf());
        assert_eq!(t.stats().value, 0.0);
    }

    #[test]
    fn regression_constant_target_is_leaf() {
        let x = dense(&[&[1.0], &[2.0], &[3.0]]);
        let t = TreeNode::fit_dense(&x, &TreeTarget::Values(vec![0.0; 3]), &TreeParams::regression(Some(3))).unwrap();
        assert!(t.is_leaf());
        assert_eq!(t.stats().value, 0.0);
    }

    #[test]
    fn regression_step_function() {
        let x = dense(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let t = TreeNode::fit_dense(
            &x,
            &TreeTarget::Values(vec![-1.0, -1.0, 2.0, 2.0]),
            &TreeParams::regression(Some(1)),
        )
        .unwrap();
        assert_eq!(t.predict_row(&[1.5]), -1.0);
        assert_eq!(t.predict_row(&[3.5]), 2.0);
    }

    #[test]
    fn min_samples_leaf_respected() {
        let x = dense(&[&[1.0], &[2.0], &[3.0], &[4.0], &[5.0]]);
        let params = TreeParams {
            max_depth: None,
            min_samples_leaf: 2,
            task: Task::Classification,
        };
        let t = TreeNode::fit_dense(&x, &TreeTarget::Classes(vec![0, 1, 0, 1, 0]), &params).unwrap();
        fn check(n: &TreeNode) {
            assert!(n.stats().n_samples >= 2);
            if let TreeNode::Split { left, right, .. } = n {
                check(left);
                check(right);
            }
        }
        check(&t);
    }

    #[test]
    fn errors() {
        let x = dense(&[&[1.0]]);
        assert!(matches!(
            TreeNode::fit_dense(&x, &TreeTarget::Classes(vec![0, 1]), &TreeParams::classification(None)),
            Err(LearnError::LengthMismatch { .. })
        ));
        assert!(matches!(
            TreeNode::fit_dense(&x, &TreeTarget::Values(vec![1.0]), &TreeParams::classification(None)),
            Err(LearnError::InvalidParams(_))
        ));
        let nan = dense(&[&[f64::NAN]]);
        assert!(matches!(
            TreeNode::fit_dense(&nan, &TreeTarget::Classes(vec![0]), &TreeParams::classification(None)),
            Err(LearnError::NonFinite)
        ));
    }

    #[test]
    fn text_export_annotates_nodes() {
        let x = dense(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let t = TreeNode::fit_dense(
            &x,
            &TreeTarget::Classes(vec![0, 0, 1, 1]),
            &TreeParams::classification(Some(1)),
        )
        .unwrap();
        let text = t.to_text(&["priors_count".to_string()]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "priors_count <= 2.5 | samples=4 | counts=[2,2] | pred=0");
        assert_eq!(lines[1], "  leaf | samples=2 | counts=[2,0] | pred=0");
        assert_eq!(lines[2], "  leaf | samples=2 | counts=[0,2] | pred=1");
    }
}
