//! Hybrid-model properties checked against independent re-computation.

use std::collections::BTreeMap;

use hybridj::hybrid::{fit, oracle, random_pick, HybridInput, HybridKind, HybridSpec, HybridState, OracleMode};
use hybridj::learners::FeatureMatrix;
use hybridj::scoring::Scorer;
use hybridj::seed;
use rand::Rng;

fn pair_count_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                den += 1.0;
                num += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn accuracy(pred: &[bool], labels: &[bool]) -> f64 {
    pred.iter().zip(labels).filter(|(p, y)| p == y).count() as f64 / labels.len() as f64
}

/// Scores on 1..=10 loosely tied to the labels.
fn draw(rng: &mut seed::Rng, n: usize) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.45)).collect();
    let mut score = |y: bool| {
        let base = if y { 6.0 } else { 4.0 };
        (base + rng.gen_range(-4.0..4.0_f64)).round().clamp(1.0, 10.0)
    };
    let a = labels.iter().map(|&y| score(y)).collect();
    let b = labels.iter().map(|&y| score(y)).collect();
    (a, b, labels)
}

#[test]
fn weighted_average_is_grid_optimal() {
    let mut rng = seed::rng(5);
    for _ in 0..10 {
        let (a, b, y) = draw(&mut rng, 80);
        let input =
            HybridInput::from_scores(BTreeMap::from([(Scorer::Compas, a.clone()), (Scorer::Hnr, b.clone())])).unwrap();
        let fitted = fit(
            &HybridSpec::new(HybridKind::WeightedAverage, &[Scorer::Compas, Scorer::Hnr]),
            &input,
            &y,
        )
        .unwrap();
        let HybridState::WeightedAverage { weights } = &fitted.state else {
            panic!("state")
        };
        let aucs: Vec<f64> = (0..=100)
            .map(|i| {
                let combined: Vec<f64> = (0..y.len())
                    .map(|r| (i as f64 * a[r] + (100 - i) as f64 * b[r]) / 100.0)
                    .collect();
                pair_count_auc(&combined, &y)
            })
            .collect();
        let best = aucs.iter().cloned().fold(f64::MIN, f64::max);
        let first = aucs.iter().position(|&v| (v - best).abs() < 1e-12).unwrap();
        assert!(
            (weights[0] - first as f64 / 100.0).abs() < 1e-12,
            "{weights:?} vs {first}"
        );
        assert!((weights[0] + weights[1] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn oracles_bound_single_scorers() {
    let mut rng = seed::rng(17);
    for _ in 0..100 {
        let n = rng.gen_range(5..200);
        let (a, b, y) = draw(&mut rng, n);
        let acc_a = accuracy(&a.iter().map(|&v| v >= 5.0).collect::<Vec<_>>(), &y);
        let acc_b = accuracy(&b.iter().map(|&v| v >= 5.0).collect::<Vec<_>>(), &y);
        let good = accuracy(&oracle(&a, &b, &y, OracleMode::Benevolent).unwrap().predictions, &y);
        let bad = accuracy(&oracle(&a, &b, &y, OracleMode::Adversarial).unwrap().predictions, &y);
        assert!(good >= acc_a.max(acc_b));
        assert!(bad <= acc_a.min(acc_b));
        let pick = accuracy(&random_pick(&[&a, &b], rng.gen()).unwrap().predictions, &y);
        assert!(bad <= pick && pick <= good);
    }
}

#[test]
fn composed_matches_indirect_on_disagreement() {
    let mut rng = seed::rng(23);
    for s in 0..10 {
        let n = 60;
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        // Every row disagrees: one score high, the other low.
        let mut a = Vec::new();
        let mut b = Vec::new();
        for _ in 0..n {
            let (hi, lo) = (rng.gen_range(5..=10) as f64, rng.gen_range(1..=4) as f64);
            if rng.gen_bool(0.5) {
                a.push(hi);
                b.push(lo);
            } else {
                a.push(lo);
                b.push(hi);
            }
        }
        let feature: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0..5) as f64]).collect();
        let input = HybridInput::new(
            FeatureMatrix::from_rows(&["f"], &feature).unwrap(),
            FeatureMatrix::empty(n),
            BTreeMap::from([(Scorer::Compas, a), (Scorer::Hnr, b)]),
        )
        .unwrap();
        let pair = [Scorer::Compas, Scorer::Hnr];
        let mut ind = HybridSpec::new(HybridKind::Indirect, &pair);
        let mut comp = HybridSpec::new(HybridKind::ComposedIndirect, &pair);
        ind.seed = s;
        comp.seed = s;
        ind.forest.n_trees = 15;
        comp.forest.n_trees = 15;
        let p = fit(&ind, &input, &labels).unwrap().predict(&input).unwrap();
        let q = fit(&comp, &input, &labels).unwrap().predict(&input).unwrap();
        assert_eq!(p, q, "seed {s}");
    }
}
