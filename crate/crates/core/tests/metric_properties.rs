//! Metric properties checked against brute-force oracles.

use hybridj::metrics::{auc, confusion, evaluate_by_group, metric_set, ConfusionCounts, ALL};
use proptest::prelude::*;

/// O(n^2) pair count: 1 per correctly ordered (pos, neg) pair, 1/2 per tie.
fn pair_count_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

fn scored_labels(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (1..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..=10).prop_map(f64::from), n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

fn distinct_scored_labels(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2..=max_n).prop_flat_map(|n| {
        (
            Just((0..n).map(|i| i as f64 * 0.37 - 3.0).collect::<Vec<f64>>()).prop_shuffle(),
            prop::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn rank_sum_matches_pair_count((s, y) in scored_labels(200)) {
        let fast = auc(&s, &y).unwrap();
        let slow = pair_count_auc(&s, &y);
        match (fast, slow) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}"),
            (a, b) => prop_assert_eq!(a, b),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn negated_scores_complement((s, y) in distinct_scored_labels(120)) {
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        if let (Some(a), Some(b)) = (auc(&s, &y).unwrap(), auc(&neg, &y).unwrap()) {
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_transform_invariant((s, y) in scored_labels(150)) {
        let t: Vec<f64> = s.iter().map(|v| (v * 0.5).exp() + 3.0).collect();
        prop_assert_eq!(auc(&s, &y).unwrap(), auc(&t, &y).unwrap());
    }

    #[test]
    fn flipped_labels_complement((s, y) in scored_labels(150)) {
        let flipped: Vec<bool> = y.iter().map(|v| !v).collect();
        if let (Some(a), Some(b)) = (auc(&s, &y).unwrap(), auc(&s, &flipped).unwrap()) {
            prop_assert!((a - (1.0 - b)).abs() < 1e-12);
        }
    }

    #[test]
    fn rate_identities(tp in 0u64..50, fp in 0u64..50, tn in 0u64..50, fn_ in 0u64..50) {
        prop_assume!(tp + fp + tn + fn_ > 0);
        let c = ConfusionCounts { tp, fp, tn, fn_ };
        let m = metric_set(c);
        if let Some(fpr) = m.fpr {
            prop_assert!((fpr + tn as f64 / (fp + tn) as f64 - 1.0).abs() < 1e-12);
        }
        if let Some(fnr) = m.fnr {
            prop_assert!((fnr + tp as f64 / (tp + fn_) as f64 - 1.0).abs() < 1e-12);
        }
        if let (Some(b), Some(fpr), Some(fnr)) = (m.bal_acc, m.fpr, m.fnr) {
            prop_assert!((b - (1.0 - 0.5 * (fpr + fnr))).abs() < 1e-12);
        }
        let acc = m.accuracy.unwrap();
        prop_assert!((acc - (tp + tn) as f64 / m.n as f64).abs() < 1e-12);
    }

    #[test]
    fn constant_predictor_is_chance(y in prop::collection::vec(any::<bool>(), 2..100), p in any::<bool>()) {
        prop_assume!(y.iter().any(|&v| v) && y.iter().any(|&v| !v));
        let m = metric_set(confusion(&vec![p; y.len()], &y).unwrap());
        prop_assert_eq!(m.bal_acc, Some(0.5));
    }

    #[test]
    fn group_counts_sum_to_all(
        rows in prop::collection::vec((any::<bool>(), any::<bool>(), 0usize..4), 1..120)
    ) {
        let preds: Vec<bool> = rows.iter().map(|r| r.0).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let groups: Vec<String> = rows.iter().map(|r| format!("g{}", r.2)).collect();
        let out = evaluate_by_group(None, &preds, &labels, &groups).unwrap();
        let sum = out
            .iter()
            .filter(|(k, _)| k.as_str() != ALL)
            .fold(ConfusionCounts::default(), |acc, (_, m)| acc + m.counts);
        prop_assert_eq!(sum, out[ALL].counts);
    }
}
