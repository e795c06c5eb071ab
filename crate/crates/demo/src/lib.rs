//! Browser demo: three operations on a synthetic population, each returning
//! JSON. The `*_json` functions are plain Rust so they test natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use std::collections::BTreeMap;

use hybridj::dataset::{generate_synthetic, Dataset, SynthConfig};
use hybridj::hybrid::{fit, oracle, random_pick, HybridInput, HybridKind, HybridSpec, HybridState, OracleMode};
use hybridj::metrics::{auc, confusion, metric_set};
use hybridj::partition::{partition_rows, summarize_partition, CaseGroup, CaseLabel};
use hybridj::scoring::{calibration_sweep, human_score_value, scores_for, Scorer};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Upper bound on the synthetic population; keeps the page responsive.
pub const MAX_DEFENDANTS: usize = 20_000;

fn population(n: usize, seed: u64, noise: f64) -> Result<Dataset, String> {
    if n == 0 || n > MAX_DEFENDANTS {
        return Err(format!("n must lie in 1..={MAX_DEFENDANTS}"));
    }
    generate_synthetic(&SynthConfig {
        n_defendants: n,
        seed,
        feature_noise: noise,
        ..Default::default()
    })
    .map_err(|e| e.to_string())
}

fn values(ds: &Dataset, s: &Scorer) -> Result<Vec<f64>, String> {
    Ok(scores_for(ds, s)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|r| r.value)
        .collect())
}

#[derive(Serialize)]
struct CaseRow {
    case: u8,
    machine_high: bool,
    human_high: bool,
    recidivated: bool,
    count: u64,
    share: f64,
}

#[derive(Serialize)]
struct PartitionView {
    n: u64,
    cases: Vec<CaseRow>,
    groups: BTreeMap<&'static str, f64>,
    disagreement: u64,
}

/// Eight-case partition of C against the chosen human scorer.
pub fn partition_json(n: usize, seed: u64, human: &str) -> Result<String, String> {
    let ds = population(n, seed, 0.2)?;
    let human: Scorer = human
        .parse()
        .map_err(|e: hybridj::scoring::ScoringError| e.to_string())?;
    let rows = partition_rows(
        &ds,
        &scores_for(&ds, &Scorer::Compas).map_err(|e| e.to_string())?,
        &scores_for(&ds, &human).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let cases: Vec<CaseLabel> = rows.iter().map(|r| r.case).collect();
    let s = summarize_partition(&cases).map_err(|e| e.to_string())?;
    let view = PartitionView {
        n: s.n,
        cases: CaseLabel::all()
            .map(|c| {
                let (m, h, r) = c.outcome();
                CaseRow {
                    case: c.id(),
                    machine_high: m,
                    human_high: h,
                    recidivated: r,
                    count: s.counts.get(&c.id()).copied().unwrap_or(0),
                    share: s.case_share(c.id()),
                }
            })
            .collect(),
        groups: CaseGroup::ALL.iter().map(|g| (g.as_str(), s.share(*g))).collect(),
        disagreement: s.disagreement_count(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

/// Accuracy, FPR and FNR of a scorer at cutoffs 1..=10.
pub fn calibration_json(n: usize, seed: u64, scorer: &str) -> Result<String, String> {
    let ds = population(n, seed, 0.2)?;
    let scorer: Scorer = scorer
        .parse()
        .map_err(|e: hybridj::scoring::ScoringError| e.to_string())?;
    let scores = scores_for(&ds, &scorer).map_err(|e| e.to_string())?;
    let curve = calibration_sweep(&scores, &ds.labels()).map_err(|e| e.to_string())?;
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct FusionRow {
    model: String,
    auc: Option<f64>,
    accuracy: Option<f64>,
}

#[derive(Serialize)]
struct FusionView {
    weights: Vec<f64>,
    tau: f64,
    rows: Vec<FusionRow>,
}

/// In-sample comparison of C, HNR, their weighted average, a random pick
/// and the two oracles.
pub fn fusion_json(n: usize, seed: u64) -> Result<String, String> {
    let ds = population(n, seed, 0.2)?;
    let labels = ds.labels();
    let c = values(&ds, &Scorer::Compas)?;
    let h = values(&ds, &Scorer::Hnr)?;
    let row = |model: &str, scores: &[f64], preds: &[bool]| -> Result<FusionRow, String> {
        let m = metric_set(confusion(preds, &labels).map_err(|e| e.to_string())?);
        Ok(FusionRow {
            model: model.into(),
            auc: auc(scores, &labels).map_err(|e| e.to_string())?,
            accuracy: m.accuracy,
        })
    };
    let binary = |s: &[f64]| s.iter().map(|&v| v >= 5.0).collect::<Vec<_>>();

    let pair = [Scorer::Compas, Scorer::Hnr];
    let input = HybridInput::from_scores(BTreeMap::from([(Scorer::Compas, c.clone()), (Scorer::Hnr, h.clone())]))
        .map_err(|e| e.to_string())?;
    let fitted =
        fit(&HybridSpec::new(HybridKind::WeightedAverage, &pair), &input, &labels).map_err(|e| e.to_string())?;
    let HybridState::WeightedAverage { weights } = &fitted.state else {
        return Err("unexpected hybrid state".into());
    };
    let combined = fitted.predict(&input).map_err(|e| e.to_string())?;
    let pick = random_pick(&[&c, &h], seed).map_err(|e| e.to_string())?;
    let good = oracle(&c, &h, &labels, OracleMode::Benevolent).map_err(|e| e.to_string())?;
    let bad = oracle(&c, &h, &labels, OracleMode::Adversarial).map_err(|e| e.to_string())?;
    let scores_of = |o: &hybridj::hybrid::HybridOutput| o.scores.clone().unwrap_or_default();

    let view = FusionView {
        weights: weights.clone(),
        tau: fitted.tau,
        rows: vec![
            row("C", &c, &binary(&c))?,
            row("HNR", &h, &binary(&h))?,
            row("Weighted average", &scores_of(&combined), &combined.predictions)?,
            row("Random pick", &scores_of(&pick), &pick.predictions)?,
            row("Benevolent oracle", &scores_of(&good), &good.predictions)?,
            row("Adversarial oracle", &scores_of(&bad), &bad.predictions)?,
        ],
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn partition(n: usize, seed: u32, human: &str) -> Result<String, JsError> {
    partition_json(n, seed as u64, human).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn calibration(n: usize, seed: u32, scorer: &str) -> Result<String, JsError> {
    calibration_json(n, seed as u64, scorer).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn fusion(n: usize, seed: u32) -> Result<String, JsError> {
    fusion_json(n, seed as u64).map_err(|e| JsError::new(&e))
}

/// Human score of `k` positive votes out of `n`.
#[wasm_bindgen]
pub fn human_score(k: usize, n: usize) -> f64 {
    human_score_value(k, n)
}
