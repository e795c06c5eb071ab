//! Additive model built from cyclically boosted depth-1 regression stumps.
//!
//! Each round visits the features in column order, fits one stump on that
//! feature's bins against the current residuals and adds the stump, scaled
//! by the learning rate, into the feature's piecewise-constant shape. After
//! fitting every shape is centered to mean zero over the training rows and
//! the shift is absorbed into the intercept, so predictions are unchanged.
//!
//! Numeric features are binned at row quantiles (at most `n_bins` bins);
//! categorical features get one bin per category, and their stumps split the
//! categories after ordering them by mean residual.

use serde::{Deserialize, Serialize};

use super::matrix::{ColumnData, FeatureMatrix};
use super::LearnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdditiveParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub n_bins: usize,
}

impl Default for AdditiveParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            n_bins: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ShapeBins {
    /// Bin `b` holds values in `(cuts[b-1], cuts[b]]`; the outer bins extend
    /// to infinity. `low`/`high` are the training range, used for export.
    Numeric {
        cuts: Vec<f64>,
        low: f64,
        high: f64,
    },
    Categorical {
        categories: Vec<String>,
    },
}

impl ShapeBins {
    fn n_bins(&self) -> usize {
        match self {
            ShapeBins::Numeric { cuts, .. } => cuts.len() + 1,
            ShapeBins::Categorical { categories } => categories.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub feature: String,
    pub bins: ShapeBins,
    pub values: Vec<f64>,
}

impl Shape {
    /// Importance is the range of the shape function.
    pub fn importance(&self) -> f64 {
        let max = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        if self.values.is_empty() {
            0.0
        } else {
            max - min
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveModel {
    pub intercept: f64,
    pub shapes: Vec<Shape>,
    pub feature_importance: Vec<f64>,
}

fn numeric_cuts(values: &[f64], n_bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut unique = sorted.clone();
    unique.dedup();
    if unique.len() <= n_bins {
        return unique.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let n = sorted.len();
    let mut cuts: Vec<f64> = Vec::with_capacity(n_bins);
    for b in 1..n_bins {
        let t = sorted[b * n / n_bins];
        let pos = unique.partition_point(|&u| u < t);
        if pos > 0 {
            let cut = 0.5 * (unique[pos - 1] + unique[pos]);
            if cuts.last() != Some(&cut) {
                cuts.push(cut);
            }
        }
    }
    cuts
}

fn bin_index(bins: &ShapeBins, data: &ColumnData, row: usize) -> Option<usize> {
    match (bins, data) {
        (ShapeBins::Numeric { cuts, .. }, ColumnData::Numeric(v)) => Some(cuts.partition_point(|&c| c < v[row])),
        (ShapeBins::Categorical { categories }, ColumnData::Categorical(v)) => {
            categories.iter().position(|c| *c == v[row])
        }
        _ => None,
    }
}

pub fn fit_additive(x: &FeatureMatrix, y: &[f64], params: &AdditiveParams) -> Result<AdditiveModel, LearnError> {
    if x.n_rows() != y.len() {
        return Err(LearnError::LengthMismatch {
            rows: x.n_rows(),
            targets: y.len(),
        });
    }
    if y.is_empty() {
        return Err(LearnError::EmptyInput);
    }
    if params.n_bins < 2 || !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(LearnError::InvalidParams(
            "n_bins must be >= 2 and learning_rate in (0, 1]".into(),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFinite);
    }

    let n = y.len();
    let mut shapes = Vec::with_capacity(x.n_cols());
    let mut row_bins: Vec<Vec<usize>> = Vec::with_capacity(x.n_cols());
    for col in x.columns() {
        let bins = match &col.data {
            ColumnData::Numeric(v) => {
                if v.iter().any(|a| !a.is_finite()) {
                    return Err(LearnError::NonFinite);
                }
                ShapeBins::Numeric {
                    cuts: numeric_cuts(v, params.n_bins),
                    low: v.iter().copied().fold(f64::INFINITY, f64::min),
                    high: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }
            }
            ColumnData::Categorical(v) => {
                let mut categories: Vec<String> = Vec::new();
                for c in v {
                    if !categories.contains(c) {
                        categories.push(c.clone());
                    }
                }
                ShapeBins::Categorical { categories }
            }
        };
        let idx: Vec<usize> = (0..n)
            .map(|i| bin_index(&bins, &col.data, i).expect("training value has a bin"))
            .collect();
        shapes.push(Shape {
            feature: col.name.clone(),
            values: vec![0.0; bins.n_bins()],
            bins,
        });
        row_bins.push(idx);
    }

    let mut intercept = y.iter().sum::<f64>() / n as f64;
    let mut residual: Vec<f64> = y.iter().map(|v| v - intercept).collect();

    for _ in 0..params.n_rounds {
        for (shape, bins_of_row) in shapes.iter_mut().zip(&row_bins) {
            let nb = shape.values.len();
            if nb < 2 {
                continue;
            }
            let mut sum = vec![0.0; nb];
            let mut cnt = vec![0usize; nb];
            for (i, &b) in bins_of_row.iter().enumerate() {
                sum[b] += residual[i];
                cnt[b] += 1;
            }
            let mut order: Vec<usize> = (0..nb).filter(|&b| cnt[b] > 0).collect();
            if matches!(shape.bins, ShapeBins::Categorical { .. }) {
                order.sort_by(|&a, &b| {
                    (sum[a] / cnt[a] as f64)
                        .total_cmp(&(sum[b] / cnt[b] as f64))
                        .then(a.cmp(&b))
                });
            }
            let (total_s, total_n) = order.iter().fold((0.0, 0usize), |(s, c), &b| (s + sum[b], c + cnt[b]));
            let (mut sl, mut nl) = (0.0, 0usize);
            let mut best: Option<(usize, f64)> = None;
            for (p, &b) in order.iter().enumerate().take(order.len() - 1) {
                sl += sum[b];
                nl += cnt[b];
                let (sr, nr) = (total_s - sl, total_n - nl);
                let gain = sl * sl / nl as f64 + sr * sr / nr as f64;
                if best.is_none_or(|(_, g)| gain > g) {
                    best = Some((p, gain));
                }
            }
            let Some((split, _)) = best else { continue };
            let (sl, nl) = order[..=split]
                .iter()
                .fold((0.0, 0usize), |(s, c), &b| (s + sum[b], c + cnt[b]));
            let left = params.learning_rate * sl / nl as f64;
            let right = params.learning_rate * (total_s - sl) / (total_n - nl) as f64;
            let mut step = vec![right; nb];
            for &b in &order[..=split] {
                step[b] = left;
            }
            for (v, s) in shape.values.iter_mut().zip(&step) {
                *v += s;
            }
            for (r, &b) in residual.iter_mut().zip(bins_of_row) {
                *r -= step[b];
            }
        }
    }

    for (shape, bins_of_row) in shapes.iter_mut().zip(&row_bins) {
        let mean = bins_of_row.iter().map(|&b| shape.values[b]).sum::<f64>() / n as f64;
        for v in shape.values.iter_mut() {
            *v -= mean;
        }
        intercept += mean;
    }
    let feature_importance = shapes.iter().map(Shape::importance).collect();
    Ok(AdditiveModel {
        intercept,
        shapes,
        feature_importance,
    })
}

impl AdditiveModel {
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, LearnError> {
        if x.n_cols() != self.shapes.len() || x.columns().iter().zip(&self.shapes).any(|(c, s)| c.name != s.feature) {
            return Err(LearnError::SchemaMismatch(
                "columns differ from the training features".into(),
            ));
        }
        let mut out = vec![self.intercept; x.n_rows()];
        for (col, shape) in x.columns().iter().zip(&self.shapes) {
            for (i, o) in out.iter_mut().enumerate() {
                match bin_index(&shape.bins, &col.data, i) {
                    Some(b) => *o += shape.values[b],
                    None if col.data.is_numeric() != matches!(shape.bins, ShapeBins::Numeric { .. }) => {
                        return Err(LearnError::SchemaMismatch(format!(
                            "column `{}` changed kind",
                            col.name
                        )))
                    }
                    None => {}
                }
            }
        }
        Ok(out)
    }

    /// Feature names sorted by decreasing importance.
    pub fn ranking(&self) -> Vec<String> {
        let mut idx: Vec<usize> = (0..self.shapes.len()).collect();
        idx.sort_by(|&a, &b| {
            self.feature_importance[b]
                .total_cmp(&self.feature_importance[a])
                .then(a.cmp(&b))
        });
        idx.into_iter().map(|i| self.shapes[i].feature.clone()).collect()
    }

    pub fn importance_of(&self, feature: &str) -> Option<f64> {
        self.shapes
            .iter()
            .position(|s| s.feature == feature)
            .map(|i| self.feature_importance[i])
    }

    /// CSV with header `feature,bin_low,bin_high,value`.
    pub fn shapes_csv(&self) -> String {
        let mut out = String::from("feature,bin_low,bin_high,value\n");
        for s in &self.shapes {
            match &s.bins {
                ShapeBins::Numeric { cuts, low, high } => {
                    for (b, v) in s.values.iter().enumerate() {
                        let lo = if b == 0 { *low } else { cuts[b - 1] };
                        let hi = if b == cuts.len() { *high } else { cuts[b] };
                        out.push_str(&format!("{},{lo},{hi},{v:.6}\n", s.feature));
                    }
                }
                ShapeBins::Categorical { categories } => {
                    for (c, v) in categories.iter().zip(&s.values) {
                        out.push_str(&format!("{},{c},{c},{v:.6}\n", s.feature));
                    }
                }
            }
        }
        out
    }
}
