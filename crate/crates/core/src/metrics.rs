//! Evaluation quantities for binary risk predictions.
//!
//! Every rate carries its own denominator. A zero denominator yields `None`
//! (rendered as an empty cell in reports), never NaN. AUC is the
//! Mann-Whitney statistic with half credit for tied scores, computed from
//! rank sums.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot evaluate an empty input")]
    EmptyInput,
}

/// Label used for the aggregate over all rows in grouped evaluations.
pub const ALL: &str = "All";
pub const SLICE_RECIDIVATED: &str = "recidivated";
pub const SLICE_NOT_RECIDIVATED: &str = "not_recidivated";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn n(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            tp: self.tp + rhs.tp,
            fp: self.fp + rhs.fp,
            tn: self.tn + rhs.tn,
            fn_: self.fn_ + rhs.fn_,
        }
    }
}

/// Names of the reported quantities, in CSV column order.
pub const METRIC_NAMES: [&str; 7] = ["auc", "bal_acc", "accuracy", "fpr", "fnr", "fdr", "for"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub auc: Option<f64>,
    pub bal_acc: Option<f64>,
    pub accuracy: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub fdr: Option<f64>,
    pub for_: Option<f64>,
    pub counts: ConfusionCounts,
    pub n: u64,
}

impl MetricSet {
    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 7] {
        [
            self.auc,
            self.bal_acc,
            self.accuracy,
            self.fpr,
            self.fnr,
            self.fdr,
            self.for_,
        ]
    }

    pub fn with_auc(mut self, auc: Option<f64>) -> Self {
        self.auc = auc;
        self
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn confusion(predictions: &[bool], labels: &[bool]) -> Result<ConfusionCounts, MetricsError> {
    check_lengths(predictions.len(), labels.len())?;
    if labels.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut c = ConfusionCounts::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Rates derived from confusion counts. `auc` is left undefined; attach
/// one with [`MetricSet::with_auc`].
pub fn metric_set(counts: ConfusionCounts) -> MetricSet {
    let ConfusionCounts { tp, fp, tn, fn_ } = counts;
    let n = counts.n();
    let tpr = ratio(tp, tp + fn_);
    let tnr = ratio(tn, tn + fp);
    MetricSet {
        auc: None,
        bal_acc: tpr.zip(tnr).map(|(a, b)| 0.5 * (a + b)),
        accuracy: ratio(tp + tn, n),
        fpr: ratio(fp, fp + tn),
        fnr: ratio(fn_, fn_ + tp),
        fdr: ratio(fp, fp + tp),
        for_: ratio(fn_, fn_ + tn),
        counts,
        n,
    }
}

/// Area under the ROC curve via the rank-sum form of the Mann-Whitney U
/// statistic. Tied scores receive their average rank, which is the same as
/// giving half credit to every tied positive/negative pair.
///
/// Returns `Ok(None)` when the labels contain a single class.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>, MetricsError> {
    check_lengths(scores.len(), labels.len())?;
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Ranks are 1-based; a tie block spanning positions i..j (exclusive)
    // shares the rank (i + 1 + j) / 2. Doubled to stay in integers.
    let mut doubled_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let doubled_rank = (i + 1 + j) as u64;
        let positives = order[i..j].iter().filter(|&&k| labels[k]).count() as u64;
        doubled_rank_sum += doubled_rank * positives;
        i = j;
    }
    let n_pos = n_pos as u64;
    let doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
    Ok(Some(doubled_u as f64 / (2 * n_pos * n_neg as u64) as f64))
}

/// Confusion counts, rates and (when scores are given) AUC for one set of
/// rows.
pub fn evaluate(scores: Option<&[f64]>, predictions: &[bool], labels: &[bool]) -> Result<MetricSet, MetricsError> {
    let counts = confusion(predictions, labels)?;
    let auc = match scores {
        Some(s) => auc(s, labels)?,
        None => None,
    };
    Ok(metric_set(counts).with_auc(auc))
}

/// One [`MetricSet`] per distinct group value, plus [`ALL`].
pub fn evaluate_by_group(
    scores: Option<&[f64]>,
    predictions: &[bool],
    labels: &[bool],
    groups: &[String],
) -> Result<BTreeMap<String, MetricSet>, MetricsError> {
    check_lengths(predictions.len(), labels.len())?;
    check_lengths(groups.len(), labels.len())?;
    if let Some(s) = scores {
        check_lengths(s.len(), labels.len())?;
    }

    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g.as_str()).or_default().push(i);
    }

    let mut out = BTreeMap::new();
    out.insert(ALL.to_string(), evaluate(scores, predictions, labels)?);
    for (group, rows) in members {
        let sub_scores: Option<Vec<f64>> = scores.map(|s| rows.iter().map(|&i| s[i]).collect());
        let sub_preds: Vec<bool> = rows.iter().map(|&i| predictions[i]).collect();
        let sub_labels: Vec<bool> = rows.iter().map(|&i| labels[i]).collect();
        out.insert(
            group.to_string(),
            evaluate(sub_scores.as_deref(), &sub_preds, &sub_labels)?,
        );
    }
    Ok(out)
}

/// Grouped evaluation refined by recidivism status. Keys are
/// `(group, slice)` with slice one of [`ALL`], [`SLICE_RECIDIVATED`],
/// [`SLICE_NOT_RECIDIVATED`]. Empty slices are omitted. Within a
/// single-label slice AUC is undefined by construction.
pub fn evaluate_by_group_and_slice(
    scores: Option<&[f64]>,
    predictions: &[bool],
    labels: &[bool],
    groups: &[String],
) -> Result<BTreeMap<(String, String), MetricSet>, MetricsError> {
    let mut out = BTreeMap::new();
    for (group, m) in evaluate_by_group(scores, predictions, labels, groups)? {
        out.insert((group, ALL.to_string()), m);
    }
    for (slice, wanted) in [(SLICE_RECIDIVATED, true), (SLICE_NOT_RECIDIVATED, false)] {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == wanted).collect();
        if rows.is_empty() {
            continue;
        }
        let sub_scores: Option<Vec<f64>> = scores.map(|s| rows.iter().map(|&i| s[i]).collect());
        let sub_preds: Vec<bool> = rows.iter().map(|&i| predictions[i]).collect();
        let sub_labels: Vec<bool> = rows.iter().map(|&i| labels[i]).collect();
        let sub_groups: Vec<String> = rows.iter().map(|&i| groups[i].clone()).collect();
        for (group, m) in evaluate_by_group(sub_scores.as_deref(), &sub_preds, &sub_labels, &sub_groups)? {
            out.insert((group, slice.to_string()), m);
        }
    }
    Ok(out)
}

fn check_lengths(left: usize, right: usize) -> Result<(), MetricsError> {
    if left != right {
        return Err(MetricsError::LengthMismatch { left, right });
    }
    Ok(())
}

/// Two-decimal rendering used by every metrics CSV; undefined is blank.
pub fn format_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.2}"),
        None => String::new(),
    }
}

pub const METRICS_CSV_HEADER: &str = "model,group,slice,n,auc,bal_acc,accuracy,fpr,fnr,fdr,for";

/// One row of the metrics CSV schema.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub model: String,
    pub group: String,
    pub slice: String,
    pub n: u64,
    pub values: [Option<f64>; 7],
}

impl MetricRow {
    pub fn from_set(model: &str, group: &str, slice: &str, m: &MetricSet) -> Self {
        Self {
            model: model.to_string(),
            group: group.to_string(),
            slice: slice.to_string(),
            n: m.n,
            values: m.values(),
        }
    }

    pub fn to_csv_line(&self) -> String {
        let mut cells = vec![
            self.model.clone(),
            self.group.clone(),
            self.slice.clone(),
            self.n.to_string(),
        ];
        cells.extend(self.values.iter().map(|v| format_cell(*v)));
        cells.join(",")
    }

    /// Parses a line written by [`MetricRow::to_csv_line`]. Values keep the
    /// two-decimal precision of the file.
    pub fn parse_csv_line(line: &str) -> Option<Self> {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 11 {
            return None;
        }
        let mut values = [None; 7];
        for (slot, cell) in values.iter_mut().zip(&cells[4..]) {
            *slot = if cell.is_empty() {
                None
            } else {
                Some(cell.parse().ok()?)
            };
        }
        Some(Self {
            model: cells[0].to_string(),
            group: cells[1].to_string(),
            slice: cells[2].to_string(),
            n: cells[3].parse().ok()?,
            values,
        })
    }
}
