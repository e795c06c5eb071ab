//! Human risk scores aggregated from worker votes, binarization and the
//! cutoff sweep.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Condition, Dataset, WorkerPrediction};
use crate::metrics::{self, MetricsError};

/// Values at or above the cutoff are high risk.
pub const DEFAULT_CUTOFF: f64 = 5.0;
pub const CALIBRATION_CSV_HEADER: &str = "scorer,cutoff,accuracy,fpr,fnr";

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("empty prediction group{}", .0.map(|id| format!(" for defendant {id}")).unwrap_or_default())]
    EmptyGroup(Option<u64>),
    #[error("predictions mix conditions or defendants")]
    MixedConditions,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("unknown scorer `{0}`")]
    UnknownScorer(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Scorer {
    Compas,
    Hnr,
    Hwr,
    Named(String),
}

impl Scorer {
    pub const HUMAN_AND_MACHINE: [Scorer; 3] = [Scorer::Compas, Scorer::Hnr, Scorer::Hwr];

    pub fn label(&self) -> &str {
        match self {
            Scorer::Compas => "C",
            Scorer::Hnr => "HNR",
            Scorer::Hwr => "HWR",
            Scorer::Named(n) => n,
        }
    }

    pub fn condition(&self) -> Option<Condition> {
        match self {
            Scorer::Hnr => Some(Condition::NoRace),
            Scorer::Hwr => Some(Condition::WithRace),
            _ => None,
        }
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scorer {
    type Err = ScoringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t.to_ascii_uppercase().as_str() {
            "C" | "COMPAS" => Ok(Scorer::Compas),
            "HNR" => Ok(Scorer::Hnr),
            "HWR" => Ok(Scorer::Hwr),
            _ if !t.is_empty() && !t.contains(',') => Ok(Scorer::Named(t.to_string())),
            _ => Err(ScoringError::UnknownScorer(t.to_string())),
        }
    }
}

impl From<Scorer> for String {
    fn from(s: Scorer) -> String {
        s.label().to_string()
    }
}

impl TryFrom<String> for Scorer {
    type Error = ScoringError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Parses a `first,second` scorer pair such as `C,HNR`.
pub fn parse_pair(s: &str) -> Result<(Scorer, Scorer), ScoringError> {
    match s.split(',').collect::<Vec<_>>().as_slice() {
        [a, b] => Ok((a.parse()?, b.parse()?)),
        _ => Err(ScoringError::UnknownScorer(s.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskScore {
    pub defendant_id: u64,
    pub scorer: Scorer,
    /// On the 0..=10 scale.
    pub value: f64,
    /// `value >= cutoff`.
    pub binarized: bool,
    pub cutoff: f64,
}

impl RiskScore {
    pub fn new(defendant_id: u64, scorer: Scorer, value: f64) -> Self {
        Self {
            defendant_id,
            scorer,
            value,
            binarized: value >= DEFAULT_CUTOFF,
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

pub fn binarize(score: &RiskScore, cutoff: f64) -> RiskScore {
    RiskScore {
        binarized: score.value >= cutoff,
        cutoff,
        ..score.clone()
    }
}

/// Positive votes scaled to 0..=10: exactly `k / 2` for 20 workers,
/// `k * 10 / n` otherwise.
pub fn human_score_value(positive: usize, n: usize) -> f64 {
    if n == 20 {
        positive as f64 / 2.0
    } else {
        positive as f64 * 10.0 / n as f64
    }
}

/// Human score for one (defendant, condition) group of worker predictions.
pub fn aggregate_human_score<'a, I>(predictions: I) -> Result<RiskScore, ScoringError>
where
    I: IntoIterator<Item = &'a WorkerPrediction>,
{
    let mut it = predictions.into_iter();
    let first = it.next().ok_or(ScoringError::EmptyGroup(None))?;
    let (mut n, mut k) = (1usize, first.prediction as usize);
    for p in it {
        if p.condition != first.condition || p.defendant_id != first.defendant_id {
            return Err(ScoringError::MixedConditions);
        }
        n += 1;
        k += p.prediction as usize;
    }
    let scorer = match first.condition {
        Condition::NoRace => Scorer::Hnr,
        Condition::WithRace => Scorer::Hwr,
    };
    Ok(RiskScore::new(first.defendant_id, scorer, human_score_value(k, n)))
}

/// Scores of one scorer for every defendant, in dataset order.
pub fn scores_for(dataset: &Dataset, scorer: &Scorer) -> Result<Vec<RiskScore>, ScoringError> {
    match scorer {
        Scorer::Compas => Ok(dataset
            .defendants()
            .iter()
            .map(|d| RiskScore::new(d.id, Scorer::Compas, dataset.compas_scores()[&d.id] as f64))
            .collect()),
        Scorer::Hnr | Scorer::Hwr => {
            let condition = scorer.condition().expect("human scorer");
            dataset
                .predictions_by_defendant(condition)
                .into_iter()
                .zip(dataset.defendants())
                .map(|(group, d)| {
                    if group.is_empty() {
                        return Err(ScoringError::EmptyGroup(Some(d.id)));
                    }
                    aggregate_human_score(group)
                })
                .collect()
        }
        Scorer::Named(n) => Err(ScoringError::UnknownScorer(n.clone())),
    }
}

/// Mean over (defendant, condition) groups of the majority share
/// `max(k, n - k) / n`.
pub fn worker_agreement_rate(predictions: &[WorkerPrediction]) -> Result<f64, ScoringError> {
    let mut groups: BTreeMap<(u64, Condition), (usize, usize)> = BTreeMap::new();
    for p in predictions {
        let g = groups.entry((p.defendant_id, p.condition)).or_default();
        g.0 += 1;
        g.1 += p.prediction as usize;
    }
    if groups.is_empty() {
        return Err(ScoringError::EmptyGroup(None));
    }
    let total: f64 = groups.values().map(|&(n, k)| k.max(n - k) as f64 / n as f64).sum();
    Ok(total / groups.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub cutoff: u8,
    pub accuracy: f64,
    /// Undefined when there are no negatives.
    pub fpr: Option<f64>,
    /// Undefined when there are no positives.
    pub fnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub scorer: Scorer,
    pub points: Vec<CalibrationPoint>,
}

impl CalibrationCurve {
    pub fn csv_lines(&self) -> impl Iterator<Item = String> + '_ {
        self.points.iter().map(move |p| {
            format!(
                "{},{},{},{},{}",
                self.scorer,
                p.cutoff,
                metrics::format_cell(Some(p.accuracy)),
                metrics::format_cell(p.fpr),
                metrics::format_cell(p.fnr)
            )
        })
    }
}

/// Accuracy, FPR and FNR of the binarization at every integer cutoff 1..=10.
pub fn calibration_sweep(scores: &[RiskScore], labels: &[bool]) -> Result<CalibrationCurve, ScoringError> {
    if scores.len() != labels.len() {
        return Err(ScoringError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let scorer = scores.first().ok_or(MetricsError::EmptyInput)?.scorer.clone();
    let points = (1..=10u8)
        .map(|cutoff| {
            let preds: Vec<bool> = scores.iter().map(|s| s.value >= cutoff as f64).collect();
            let m = metrics::metric_set(metrics::confusion(&preds, labels)?);
            Ok(CalibrationPoint {
                cutoff,
                accuracy: m.accuracy.expect("n > 0"),
                fpr: m.fpr,
                fnr: m.fnr,
            })
        })
        .collect::<Result<_, MetricsError>>()?;
    Ok(CalibrationCurve { scorer, points })
}

pub fn calibration_csv(curves: &[CalibrationCurve]) -> String {
    let mut out = String::from(CALIBRATION_CSV_HEADER);
    out.push('\n');
    for c in curves {
        for line in c.csv_lines() {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

/// Reads back a calibration CSV; blank rates are undefined.
pub fn parse_calibration_csv(text: &str) -> Option<Vec<CalibrationCurve>> {
    let mut curves: Vec<CalibrationCurve> = Vec::new();
    let cell = |s: &str| -> Option<Option<f64>> {
        if s.is_empty() {
            Some(None)
        } else {
            s.parse().ok().map(Some)
        }
    };
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return None;
        }
        let scorer: Scorer = f[0].parse().ok()?;
        let point = CalibrationPoint {
            cutoff: f[1].parse().ok()?,
            accuracy: cell(f[2])??,
            fpr: cell(f[3])?,
            fnr: cell(f[4])?,
        };
        match curves.last_mut() {
            Some(c) if c.scorer == scorer => c.points.push(point),
            _ => curves.push(CalibrationCurve {
                scorer,
                points: vec![point],
            }),
        }
    }
    Some(curves)
}
