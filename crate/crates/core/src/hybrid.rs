//! Fusion strategies over two or three risk scores: weighted average,
//! direct and indirect forests, single-score baselines, random picks and
//! the benevolent/adversarial oracle bounds.
//!
//! Prediction never takes ground truth. The oracles need labels by
//! definition and are therefore free functions outside [`FittedHybrid`].

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::{fit_forest, FeatureMatrix, ForestModel, ForestParams, LearnError, TreeTarget};
use crate::metrics::{self, MetricsError};
use crate::scoring::{Scorer, DEFAULT_CUTOFF};
use crate::seed;

/// Weight resolution of the two-scorer grid (step 0.01).
pub const GRID_STEPS_2: u32 = 100;
/// Weight resolution of the three-scorer simplex grid (step 0.05).
pub const GRID_STEPS_3: u32 = 20;
pub const FOREST_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum HybridError {
    #[error("invalid hybrid spec: {0}")]
    InvalidSpec(String),
    #[error("{left} rows vs {right} rows")]
    LengthMismatch { left: usize, right: usize },
    #[error("no scores for scorer {0}")]
    MissingScorer(Scorer),
    #[error("no training rows where the two scorers disagree")]
    NoDisagreementRows,
    #[error("{0} needs ground truth; use the oracle function")]
    RequiresLabels(&'static str),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridKind {
    WeightedAverage,
    Direct,
    Indirect,
    ComposedIndirect,
    Single,
    RandomPick,
    OracleBenevolent,
    OracleAdversarial,
}

impl HybridKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            HybridKind::WeightedAverage => "weighted_average",
            HybridKind::Direct => "direct",
            HybridKind::Indirect => "indirect",
            HybridKind::ComposedIndirect => "composed_indirect",
            HybridKind::Single => "single",
            HybridKind::RandomPick => "random_pick",
            HybridKind::OracleBenevolent => "oracle_benevolent",
            HybridKind::OracleAdversarial => "oracle_adversarial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    Benevolent,
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridSpec {
    pub kind: HybridKind,
    pub scorers: Vec<Scorer>,
    /// Adds defendant features (and worker aggregates for the human
    /// scorers involved) to forest inputs. For `single` it turns the raw
    /// score into a forest over features and that score.
    #[serde(default)]
    pub use_features: bool,
    /// `single` only: report the binarized score, which has no AUC.
    #[serde(default)]
    pub binarized: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub forest: ForestParams,
    /// Overrides the generated display name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl HybridSpec {
    pub fn new(kind: HybridKind, scorers: &[Scorer]) -> Self {
        Self {
            kind,
            scorers: scorers.to_vec(),
            use_features: matches!(
                kind,
                HybridKind::Direct | HybridKind::Indirect | HybridKind::ComposedIndirect
            ),
            binarized: false,
            seed: 0,
            forest: ForestParams::default(),
            name: None,
        }
    }

    pub fn with_features(mut self, on: bool) -> Self {
        self.use_features = on;
        self
    }

    pub fn binarized(mut self) -> Self {
        self.binarized = true;
        self
    }

    pub fn validate(&self) -> Result<(), HybridError> {
        let k = self.scorers.len();
        let ok = match self.kind {
            HybridKind::WeightedAverage => (2..=3).contains(&k),
            HybridKind::RandomPick => k >= 2,
            HybridKind::Single => k == 1 && !(self.binarized && self.use_features),
            HybridKind::Direct => k >= 1 || self.use_features,
            HybridKind::Indirect
            | HybridKind::ComposedIndirect
            | HybridKind::OracleBenevolent
            | HybridKind::OracleAdversarial => k == 2,
        };
        if !ok {
            return Err(HybridError::InvalidSpec(format!(
                "{} with {k} scorer(s){}",
                self.kind.as_str(),
                if self.binarized { ", binarized" } else { "" }
            )));
        }
        let mut seen = self.scorers.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != k {
            return Err(HybridError::InvalidSpec("repeated scorer".into()));
        }
        Ok(())
    }

    fn joined(&self) -> String {
        self.scorers.iter().map(Scorer::label).collect::<Vec<_>>().join(" ")
    }

    pub fn display_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let s = self.joined();
        match self.kind {
            HybridKind::WeightedAverage => format!("Weighted average of {s}"),
            HybridKind::Direct if self.scorers.is_empty() => "Predict GT from features".into(),
            HybridKind::Direct if !self.use_features => format!("Direct {s} (scores only)"),
            HybridKind::Direct => format!("Direct {s}"),
            HybridKind::Indirect => format!("Indirect {s}"),
            HybridKind::ComposedIndirect => format!("Composed indirect {s}"),
            HybridKind::Single if self.use_features => format!("Predict GT from features and {s}"),
            HybridKind::Single if self.binarized => format!("{s} (binarized >=5)"),
            HybridKind::Single => format!("{s} (1-10 scale)"),
            HybridKind::RandomPick => format!("Randomly pick between {s}"),
            HybridKind::OracleBenevolent => "Benevolent oracle".into(),
            HybridKind::OracleAdversarial => "Adversarial oracle".into(),
        }
    }

    /// Table grouping of the model: Oracle, Hybrid, Single, None or Random.
    pub fn model_type(&self) -> &'static str {
        match self.kind {
            HybridKind::OracleBenevolent | HybridKind::OracleAdversarial => "Oracle",
            HybridKind::RandomPick => "Random",
            HybridKind::Single => "Single",
            HybridKind::Direct if self.scorers.is_empty() => "None",
            _ => "Hybrid",
        }
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self.kind, HybridKind::OracleBenevolent | HybridKind::OracleAdversarial)
    }
}

/// The reference model grid for the machine scorer `C` and
/// the human scorers `HNR` and `HWR`.
pub fn default_grid() -> Vec<HybridSpec> {
    use HybridKind::*;
    let (c, hnr, hwr) = (Scorer::Compas, Scorer::Hnr, Scorer::Hwr);
    let pairs = [vec![c.clone(), hnr.clone()], vec![c.clone(), hwr.clone()]];
    let triple = vec![c.clone(), hwr.clone(), hnr.clone()];
    let mut grid = vec![
        HybridSpec::new(OracleBenevolent, &pairs[0]),
        HybridSpec::new(OracleAdversarial, &pairs[0]),
    ];
    for scorers in pairs.iter().chain([&triple]) {
        grid.push(HybridSpec::new(WeightedAverage, scorers));
        grid.push(HybridSpec::new(Direct, scorers));
    }
    for scorers in &pairs {
        grid.push(HybridSpec::new(Indirect, scorers));
        grid.push(HybridSpec::new(ComposedIndirect, scorers));
    }
    for s in [&c, &hnr, &hwr] {
        let one = [s.clone()];
        grid.push(HybridSpec::new(Single, &one).with_features(true));
        grid.push(HybridSpec::new(Single, &one));
        grid.push(HybridSpec::new(Single, &one).binarized());
    }
    grid.push(HybridSpec::new(Direct, &[]));
    for scorers in pairs.iter().chain([&triple]) {
        grid.push(HybridSpec::new(RandomPick, scorers));
    }
    grid
}

/// Row-aligned model inputs: defendant features, worker aggregates and the
/// 0..=10 score of each scorer.
#[derive(Debug, Clone)]
pub struct HybridInput {
    pub features: FeatureMatrix,
    /// Columns prefixed `hnr_` / `hwr_`; only those matching the human
    /// scorers of a model are used.
    pub worker_features: FeatureMatrix,
    pub scores: BTreeMap<Scorer, Vec<f64>>,
}

impl HybridInput {
    pub fn new(
        features: FeatureMatrix,
        worker_features: FeatureMatrix,
        scores: BTreeMap<Scorer, Vec<f64>>,
    ) -> Result<Self, HybridError> {
        let n = features.n_rows();
        let mismatch = |m: usize| HybridError::LengthMismatch { left: n, right: m };
        if worker_features.n_rows() != n {
            return Err(mismatch(worker_features.n_rows()));
        }
        if let Some(v) = scores.values().find(|v| v.len() != n) {
            return Err(mismatch(v.len()));
        }
        Ok(Self {
            features,
            worker_features,
            scores,
        })
    }

    /// Scores only, no features.
    pub fn from_scores(scores: BTreeMap<Scorer, Vec<f64>>) -> Result<Self, HybridError> {
        let n = scores.values().next().map_or(0, Vec::len);
        Self::new(FeatureMatrix::empty(n), FeatureMatrix::empty(n), scores)
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn score(&self, scorer: &Scorer) -> Result<&[f64], HybridError> {
        self.scores
            .get(scorer)
            .map(Vec::as_slice)
            .ok_or_else(|| HybridError::MissingScorer(scorer.clone()))
    }

    pub fn take_rows(&self, rows: &[usize]) -> HybridInput {
        HybridInput {
            features: self.features.take_rows(rows),
            worker_features: self.worker_features.take_rows(rows),
            scores: self
                .scores
                .iter()
                .map(|(s, v)| (s.clone(), rows.iter().map(|&i| v[i]).collect()))
                .collect(),
        }
    }

    /// Forest input: features and matching worker aggregates when
    /// `use_features`, then one `score_<scorer>` column per scorer.
    pub fn model_matrix(&self, scorers: &[Scorer], use_features: bool) -> Result<FeatureMatrix, HybridError> {
        let mut m = FeatureMatrix::empty(self.n_rows());
        if use_features {
            m = m.hconcat(&self.features)?;
            for s in scorers {
                if s.condition().is_some() {
                    let prefix = format!("{}_", s.label().to_ascii_lowercase());
                    let names: Vec<&str> = self
                        .worker_features
                        .columns()
                        .iter()
                        .map(|c| c.name.as_str())
                        .filter(|n| n.starts_with(&prefix))
                        .collect();
                    m = m.hconcat(&self.worker_features.select(&names))?;
                }
            }
        }
        for s in scorers {
            m.push_numeric(
                &format!("score_{}", s.label().to_ascii_lowercase()),
                self.score(s)?.to_vec(),
            )?;
        }
        Ok(m)
    }
}

/// Continuous hybrid score (absent when only a binary output exists) and
/// binary prediction per row.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridOutput {
    pub scores: Option<Vec<f64>>,
    pub predictions: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HybridState {
    WeightedAverage { weights: Vec<f64> },
    Forest(Box<ForestModel>),
    Picker(Box<ForestModel>),
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedHybrid {
    pub spec: HybridSpec,
    pub state: HybridState,
    /// Binarization threshold on the hybrid score.
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridSummary {
    pub name: String,
    pub kind: HybridKind,
    pub scorers: Vec<Scorer>,
    pub use_features: bool,
    pub weights: Option<Vec<f64>>,
    pub tau: f64,
    pub forest: Option<ForestParams>,
    pub seed: u64,
}

fn check_len(left: usize, right: usize) -> Result<(), HybridError> {
    if left != right {
        return Err(HybridError::LengthMismatch { left, right });
    }
    Ok(())
}

/// Every convex weight vector of the grid for `k` scorers, in
/// lexicographic order, as integer numerators over the returned
/// denominator.
pub fn weight_grid(k: usize) -> (Vec<Vec<u32>>, u32) {
    match k {
        2 => (
            (0..=GRID_STEPS_2).map(|i| vec![i, GRID_STEPS_2 - i]).collect(),
            GRID_STEPS_2,
        ),
        3 => {
            let s = GRID_STEPS_3;
            let mut g = Vec::new();
            for i in 0..=s {
                for j in 0..=s - i {
                    g.push(vec![i, j, s - i - j]);
                }
            }
            (g, s)
        }
        _ => (Vec::new(), 1),
    }
}

/// `Σ w_k s_k` with integer weights over `denom`.
pub fn combine_scores(scores: &[&[f64]], weights: &[u32], denom: u32) -> Vec<f64> {
    let n = scores.first().map_or(0, |s| s.len());
    (0..n)
        .map(|i| scores.iter().zip(weights).map(|(s, &w)| w as f64 * s[i]).sum::<f64>() / denom as f64)
        .collect()
}

/// Threshold maximizing training accuracy of `score >= tau` over the
/// distinct score values; ties go to the lowest threshold.
pub fn best_threshold(scores: &[f64], labels: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Threshold at the i-th distinct value: rows below are negative.
    let total_pos = labels.iter().filter(|&&y| y).count();
    let mut below_neg = 0usize;
    let mut below_pos = 0usize;
    let mut best = (usize::MIN, f64::INFINITY);
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        let correct = below_neg + (total_pos - below_pos);
        if correct > best.0 || best.1.is_infinite() {
            best = (correct, v);
        }
        while i < order.len() && scores[order[i]] == v {
            if labels[order[i]] {
                below_pos += 1;
            } else {
                below_neg += 1;
            }
            i += 1;
        }
    }
    best.1
}

fn fit_weighted(scores: &[&[f64]], labels: &[bool]) -> Result<(Vec<f64>, f64), HybridError> {
    for s in scores {
        check_len(s.len(), labels.len())?;
    }
    let (grid, denom) = weight_grid(scores.len());
    if grid.is_empty() {
        return Err(HybridError::InvalidSpec("weighted average needs 2 or 3 scorers".into()));
    }
    let mut best: Option<(f64, &Vec<u32>)> = None;
    for w in &grid {
        let auc = metrics::auc(&combine_scores(scores, w, denom), labels)?.unwrap_or(0.5);
        if best.is_none_or(|(b, _)| auc > b) {
            best = Some((auc, w));
        }
    }
    let (_, w) = best.expect("grid is nonempty");
    let tau = best_threshold(&combine_scores(scores, w, denom), labels);
    Ok((w.iter().map(|&x| x as f64 / denom as f64).collect(), tau))
}

/// Convex weights maximizing training AUC (first grid point on ties) and
/// the accuracy-maximizing threshold on the combined score.
pub fn fit_weighted_average(
    scorers: &[Scorer],
    scores: &[&[f64]],
    labels: &[bool],
) -> Result<FittedHybrid, HybridError> {
    let spec = HybridSpec::new(HybridKind::WeightedAverage, scorers);
    spec.validate()?;
    check_len(scorers.len(), scores.len())?;
    let (weights, tau) = fit_weighted(scores, labels)?;
    Ok(FittedHybrid {
        spec,
        state: HybridState::WeightedAverage { weights },
        tau,
    })
}

fn forest_params(spec: &HybridSpec) -> ForestParams {
    ForestParams {
        seed: spec.seed,
        ..spec.forest.clone()
    }
}

fn binary(values: &[f64]) -> Vec<bool> {
    values.iter().map(|&v| v >= DEFAULT_CUTOFF).collect()
}

/// Forest on features, worker aggregates and raw scores predicting ground
/// truth; the class-1 probability is the hybrid score.
pub fn fit_direct(spec: &HybridSpec, input: &HybridInput, labels: &[bool]) -> Result<FittedHybrid, HybridError> {
    spec.validate()?;
    check_len(input.n_rows(), labels.len())?;
    let x = input.model_matrix(&spec.scorers, spec.use_features)?;
    if x.n_cols() == 0 {
        return Err(HybridError::InvalidSpec("direct model without inputs".into()));
    }
    let model = fit_forest(&x, &TreeTarget::binary(labels), &forest_params(spec))?;
    Ok(FittedHybrid {
        spec: spec.clone(),
        state: HybridState::Forest(Box::new(model)),
        tau: FOREST_THRESHOLD,
    })
}

/// Picker forest trained only on rows where the two binarized scores
/// disagree; its target is whether the second scorer is correct.
pub fn fit_indirect(spec: &HybridSpec, input: &HybridInput, labels: &[bool]) -> Result<FittedHybrid, HybridError> {
    spec.validate()?;
    check_len(input.n_rows(), labels.len())?;
    let a = binary(input.score(&spec.scorers[0])?);
    let b = binary(input.score(&spec.scorers[1])?);
    let rows: Vec<usize> = (0..labels.len()).filter(|&i| a[i] != b[i]).collect();
    if rows.is_empty() {
        return Err(HybridError::NoDisagreementRows);
    }
    let x = input.take_rows(&rows).model_matrix(&spec.scorers, spec.use_features)?;
    let target: Vec<bool> = rows.iter().map(|&i| b[i] == labels[i]).collect();
    let model = fit_forest(&x, &TreeTarget::binary(&target), &forest_params(spec))?;
    Ok(FittedHybrid {
        spec: spec.clone(),
        state: HybridState::Picker(Box::new(model)),
        tau: DEFAULT_CUTOFF / 10.0,
    })
}

/// Same picker as [`fit_indirect`]; at prediction time agreement rows
/// bypass it.
pub fn fit_composed_indirect(
    spec: &HybridSpec,
    input: &HybridInput,
    labels: &[bool],
) -> Result<FittedHybrid, HybridError> {
    let mut fitted = fit_indirect(
        &HybridSpec {
            kind: HybridKind::Indirect,
            ..spec.clone()
        },
        input,
        labels,
    )?;
    fitted.spec = spec.clone();
    Ok(fitted)
}

/// Fits any non-oracle spec.
pub fn fit(spec: &HybridSpec, input: &HybridInput, labels: &[bool]) -> Result<FittedHybrid, HybridError> {
    spec.validate()?;
    check_len(input.n_rows(), labels.len())?;
    match spec.kind {
        HybridKind::WeightedAverage => {
            let scores: Vec<&[f64]> = spec.scorers.iter().map(|s| input.score(s)).collect::<Result<_, _>>()?;
            let (weights, tau) = fit_weighted(&scores, labels)?;
            Ok(FittedHybrid {
                spec: spec.clone(),
                state: HybridState::WeightedAverage { weights },
                tau,
            })
        }
        HybridKind::Direct => fit_direct(spec, input, labels),
        HybridKind::Single if spec.use_features => fit_direct(spec, input, labels),
        HybridKind::Indirect => fit_indirect(spec, input, labels),
        HybridKind::ComposedIndirect => fit_composed_indirect(spec, input, labels),
        HybridKind::Single | HybridKind::RandomPick => {
            input.score(&spec.scorers[0])?;
            Ok(FittedHybrid {
                spec: spec.clone(),
                state: HybridState::Raw,
                tau: DEFAULT_CUTOFF,
            })
        }
        HybridKind::OracleBenevolent | HybridKind::OracleAdversarial => {
            Err(HybridError::RequiresLabels(spec.kind.as_str()))
        }
    }
}

impl FittedHybrid {
    pub fn predict(&self, input: &HybridInput) -> Result<HybridOutput, HybridError> {
        let spec = &self.spec;
        let scores = |i: usize| input.score(&spec.scorers[i]);
        match (&self.state, spec.kind) {
            (HybridState::WeightedAverage { weights }, _) => {
                let s: Vec<&[f64]> = spec.scorers.iter().map(|s| input.score(s)).collect::<Result<_, _>>()?;
                let (_, denom) = weight_grid(s.len());
                let w: Vec<u32> = weights.iter().map(|w| (w * denom as f64).round() as u32).collect();
                let combined = combine_scores(&s, &w, denom);
                let predictions = combined.iter().map(|&v| v >= self.tau).collect();
                Ok(HybridOutput {
                    scores: Some(combined),
                    predictions,
                })
            }
            (HybridState::Forest(model), _) => {
                let p = model.predict_proba(&input.model_matrix(&spec.scorers, spec.use_features)?)?;
                let predictions = p.iter().map(|&v| v >= self.tau).collect();
                Ok(HybridOutput {
                    scores: Some(p),
                    predictions,
                })
            }
            (HybridState::Picker(model), kind) => {
                let (a, b) = (scores(0)?, scores(1)?);
                let picks = model.predict_proba(&input.model_matrix(&spec.scorers, spec.use_features)?)?;
                let composed = kind == HybridKind::ComposedIndirect;
                let mut out = Vec::with_capacity(a.len());
                let mut predictions = Vec::with_capacity(a.len());
                for i in 0..a.len() {
                    let (ba, bb) = (a[i] >= DEFAULT_CUTOFF, b[i] >= DEFAULT_CUTOFF);
                    if composed && ba == bb {
                        out.push((a[i] + b[i]) / 20.0);
                        predictions.push(ba);
                    } else if picks[i] >= FOREST_THRESHOLD {
                        out.push(b[i] / 10.0);
                        predictions.push(bb);
                    } else {
                        out.push(a[i] / 10.0);
                        predictions.push(ba);
                    }
                }
                Ok(HybridOutput {
                    scores: Some(out),
                    predictions,
                })
            }
            (HybridState::Raw, HybridKind::RandomPick) => {
                let s: Vec<&[f64]> = spec.scorers.iter().map(|s| input.score(s)).collect::<Result<_, _>>()?;
                random_pick(&s, spec.seed)
            }
            (HybridState::Raw, _) => {
                let s = scores(0)?;
                Ok(HybridOutput {
                    scores: (!spec.binarized).then(|| s.to_vec()),
                    predictions: binary(s),
                })
            }
        }
    }

    pub fn summary(&self) -> HybridSummary {
        HybridSummary {
            name: self.spec.display_name(),
            kind: self.spec.kind,
            scorers: self.spec.scorers.clone(),
            use_features: self.spec.use_features,
            weights: match &self.state {
                HybridState::WeightedAverage { weights } => Some(weights.clone()),
                _ => None,
            },
            tau: self.tau,
            forest: match &self.state {
                HybridState::Forest(m) | HybridState::Picker(m) => Some(m.params.clone()),
                _ => None,
            },
            seed: self.spec.seed,
        }
    }
}

/// Per row: the agreed prediction when both scorers agree, otherwise the
/// correct one (benevolent) or the incorrect one (adversarial). The score
/// is the chosen scorer's value, the first scorer's on agreement.
pub fn oracle(a: &[f64], b: &[f64], labels: &[bool], mode: OracleMode) -> Result<HybridOutput, HybridError> {
    check_len(a.len(), labels.len())?;
    check_len(b.len(), labels.len())?;
    let mut scores = Vec::with_capacity(a.len());
    let mut predictions = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        let (ba, bb) = (a[i] >= DEFAULT_CUTOFF, b[i] >= DEFAULT_CUTOFF);
        let take_b = ba != bb
            && match mode {
                OracleMode::Benevolent => bb == labels[i],
                OracleMode::Adversarial => bb != labels[i],
            };
        let (v, p) = if take_b { (b[i], bb) } else { (a[i], ba) };
        scores.push(v);
        predictions.push(p);
    }
    Ok(HybridOutput {
        scores: Some(scores),
        predictions,
    })
}

/// Uniform seeded pick of one scorer per row.
pub fn random_pick(scores: &[&[f64]], seed: u64) -> Result<HybridOutput, HybridError> {
    if scores.len() < 2 {
        return Err(HybridError::InvalidSpec("random pick needs >= 2 scorers".into()));
    }
    let n = scores[0].len();
    for s in scores {
        check_len(s.len(), n)?;
    }
    let mut rng = seed::rng(seed);
    let values: Vec<f64> = (0..n).map(|i| scores[rng.gen_range(0..scores.len())][i]).collect();
    Ok(HybridOutput {
        predictions: binary(&values),
        scores: Some(values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(pairs: &[(Scorer, Vec<f64>)]) -> HybridInput {
        HybridInput::from_scores(pairs.iter().cloned().collect()).unwrap()
    }

    #[test]
    fn specs_validate() {
        assert!(HybridSpec::new(HybridKind::WeightedAverage, &[Scorer::Compas])
            .validate()
            .is_err());
        assert!(HybridSpec::new(HybridKind::Single, &[Scorer::Compas, Scorer::Hnr])
            .validate()
            .is_err());
        assert!(HybridSpec::new(HybridKind::OracleBenevolent, &[Scorer::Compas])
            .validate()
            .is_err());
        assert!(HybridSpec::new(HybridKind::RandomPick, &[Scorer::Hnr, Scorer::Hnr])
            .validate()
            .is_err());
        for s in default_grid() {
            s.validate().unwrap();
        }
    }

    #[test]
    fn names_follow_tables() {
        let g = default_grid();
        let names: Vec<String> = g.iter().map(HybridSpec::display_name).collect();
        for expected in [
            "Benevolent oracle",
            "Weighted average of C HNR",
            "Direct C HWR HNR",
            "Composed indirect C HWR",
            "Predict GT from features and HNR",
            "C (1-10 scale)",
            "HWR (binarized >=5)",
            "Predict GT from features",
            "Randomly pick between C HWR HNR",
        ] {
            assert!(names.iter().any(|n| n == expected), "{expected}");
        }
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len());
    }

    #[test]
    fn weighted_dominance_and_degenerate_tie() {
        let labels = [false, false, true, true, false, true];
        let a = [1.0, 2.0, 8.0, 9.0, 3.0, 7.0];
        let b = [9.0, 1.0, 2.0, 8.0, 7.0, 3.0];
        // A perfect scorer whose class margin (0.02) is small next to the
        // spread of B keeps every mixed weight strictly below AUC 1.
        let narrow: Vec<f64> = labels.iter().map(|&y| if y { 5.01 } else { 4.99 }).collect();
        let f = fit_weighted_average(&[Scorer::Compas, Scorer::Hnr], &[&narrow, &b], &labels).unwrap();
        match &f.state {
            HybridState::WeightedAverage { weights } => assert_eq!(weights, &vec![1.0, 0.0]),
            s => panic!("{s:?}"),
        }
        let same = fit_weighted_average(&[Scorer::Compas, Scorer::Hnr], &[&a, &a], &labels).unwrap();
        match &same.state {
            HybridState::WeightedAverage { weights } => assert_eq!(weights, &vec![0.0, 1.0]),
            s => panic!("{s:?}"),
        }
        let out = same
            .predict(&input(&[(Scorer::Compas, a.to_vec()), (Scorer::Hnr, a.to_vec())]))
            .unwrap();
        assert_eq!(out.scores.unwrap(), a.to_vec());
    }

    #[test]
    fn threshold_prefers_lowest() {
        assert_eq!(best_threshold(&[1.0, 2.0, 3.0, 4.0], &[false, false, true, true]), 3.0);
        // All positive: every threshold up to the minimum is perfect.
        assert_eq!(best_threshold(&[2.0, 5.0], &[true, true]), 2.0);
        assert_eq!(best_threshold(&[2.0, 5.0], &[false, false]), 5.0);
    }

    #[test]
    fn three_scorer_grid() {
        let (g, d) = weight_grid(3);
        assert_eq!(d, 20);
        assert_eq!(g.len(), 231);
        assert_eq!(g[0], vec![0, 0, 20]);
        assert!(g.iter().all(|w| w.iter().sum::<u32>() == 20));
    }

    #[test]
    fn oracle_modes() {
        let labels = [true, false, true, false];
        let a = [7.0, 2.0, 3.0, 8.0];
        let b = [6.0, 1.0, 9.0, 2.0];
        let good = oracle(&a, &b, &labels, OracleMode::Benevolent).unwrap();
        let bad = oracle(&a, &b, &labels, OracleMode::Adversarial).unwrap();
        assert_eq!(good.predictions, vec![true, false, true, false]);
        assert_eq!(bad.predictions, vec![true, false, false, true]);
        assert_eq!(good.scores.unwrap(), vec![7.0, 2.0, 9.0, 2.0]);
    }

    #[test]
    fn random_pick_identical_scorers() {
        let a = [1.0, 6.0, 9.0];
        let out = random_pick(&[&a, &a], 5).unwrap();
        assert_eq!(out.scores.unwrap(), a.to_vec());
        assert_eq!(
            random_pick(&[&a, &[2.0, 2.0, 2.0]], 5).unwrap(),
            random_pick(&[&a, &[2.0, 2.0, 2.0]], 5).unwrap()
        );
        assert!(random_pick(&[&a], 1).is_err());
    }

    #[test]
    fn single_binarized_has_no_auc() {
        let spec = HybridSpec::new(HybridKind::Single, &[Scorer::Hnr]).binarized();
        let inp = input(&[(Scorer::Hnr, vec![4.0, 5.0])]);
        let f = fit(&spec, &inp, &[false, true]).unwrap();
        let out = f.predict(&inp).unwrap();
        assert_eq!(out.scores, None);
        assert_eq!(out.predictions, vec![false, true]);
    }

    #[test]
    fn indirect_learns_constant_pick() {
        // Scorer A is right on every disagreement.
        let labels: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let a: Vec<f64> = labels.iter().map(|&y| if y { 8.0 } else { 2.0 }).collect();
        let b: Vec<f64> = (0..40).map(|i| if i % 4 < 2 { 8.0 } else { 2.0 }).collect();
        let inp = input(&[(Scorer::Compas, a.clone()), (Scorer::Hnr, b)]);
        let spec = HybridSpec::new(HybridKind::Indirect, &[Scorer::Compas, Scorer::Hnr]);
        let f = fit(&spec, &inp, &labels).unwrap();
        let out = f.predict(&inp).unwrap();
        assert_eq!(out.predictions, labels);
        assert_eq!(out.scores.unwrap(), a.iter().map(|v| v / 10.0).collect::<Vec<_>>());
        assert!(oracle(&[1.0], &[1.0], &[true], OracleMode::Benevolent).is_ok());
    }

    #[test]
    fn indirect_without_disagreement_fails() {
        let inp = input(&[(Scorer::Compas, vec![7.0, 2.0]), (Scorer::Hnr, vec![6.0, 1.0])]);
        let spec = HybridSpec::new(HybridKind::Indirect, &[Scorer::Compas, Scorer::Hnr]);
        assert!(matches!(
            fit(&spec, &inp, &[true, false]),
            Err(HybridError::NoDisagreementRows)
        ));
    }

    #[test]
    fn composed_passes_agreement_through() {
        let labels = vec![true, false, true, false, true, false];
        let a = vec![8.0, 2.0, 8.0, 2.0, 9.0, 1.0];
        let b = vec![2.0, 8.0, 2.0, 8.0, 9.0, 1.0];
        let inp = input(&[(Scorer::Compas, a), (Scorer::Hnr, b)]);
        let spec = HybridSpec::new(HybridKind::ComposedIndirect, &[Scorer::Compas, Scorer::Hnr]);
        let out = fit(&spec, &inp, &labels).unwrap().predict(&inp).unwrap();
        assert_eq!(out.predictions, labels);
        assert_eq!(out.scores.unwrap()[4..], [0.9, 0.1]);
    }

    #[test]
    fn oracles_refuse_prediction_interface() {
        let spec = HybridSpec::new(HybridKind::OracleAdversarial, &[Scorer::Compas, Scorer::Hnr]);
        let inp = input(&[(Scorer::Compas, vec![1.0]), (Scorer::Hnr, vec![9.0])]);
        assert!(matches!(fit(&spec, &inp, &[true]), Err(HybridError::RequiresLabels(_))));
    }

    #[test]
    fn summary_json() {
        let labels = [false, true, true];
        let f = fit_weighted_average(
            &[Scorer::Compas, Scorer::Hnr],
            &[&[1.0, 5.0, 9.0], &[2.0, 3.0, 4.0]],
            &labels,
        )
        .unwrap();
        let json = serde_json::to_value(f.summary()).unwrap();
        assert_eq!(json["kind"], "weighted_average");
        assert_eq!(json["scorers"][1], "HNR");
        assert_eq!(json["weights"][0], 0.0);
        assert_eq!(json["tau"], 3.0);
    }
}
