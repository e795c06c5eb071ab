//! Case-table bijection and cutoff-sweep monotonicity.

use std::collections::BTreeSet;

use hybridj::partition::{assign_case, CaseLabel};
use hybridj::scoring::{calibration_sweep, RiskScore, Scorer};
use proptest::prelude::*;

/// The eight-case table written out independently: (machine, human, truth).
const TABLE: [(bool, bool, bool, u8); 8] = [
    (true, true, true, 1),
    (false, false, false, 2),
    (true, false, true, 3),
    (false, true, false, 4),
    (false, true, true, 5),
    (true, false, false, 6),
    (true, true, false, 7),
    (false, false, true, 8),
];

#[test]
fn assign_case_is_a_bijection() {
    let mut seen = BTreeSet::new();
    for (m, h, r, id) in TABLE {
        let c = assign_case(m, h, r);
        assert_eq!(c.id(), id);
        assert_eq!(c.outcome(), (m, h, r));
        seen.insert(c.id());
    }
    assert_eq!(seen, (1..=8).collect());
    assert_eq!(CaseLabel::all().count(), 8);
}

#[test]
fn disagreement_is_cases_three_to_six() {
    for (m, h, r, id) in TABLE {
        assert_eq!(assign_case(m, h, r).is_disagreement(), (3..=6).contains(&id));
        assert_eq!(m != h, (3..=6).contains(&id));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn error_rates_monotone_in_cutoff(
        rows in prop::collection::vec((1u8..=10, any::<bool>()), 2..300)
    ) {
        let scores: Vec<RiskScore> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| RiskScore::new(i as u64, Scorer::Compas, r.0 as f64))
            .collect();
        let labels: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let curve = calibration_sweep(&scores, &labels).unwrap();
        prop_assert_eq!(curve.points.len(), 10);
        for w in curve.points.windows(2) {
            if let (Some(a), Some(b)) = (w[0].fpr, w[1].fpr) {
                prop_assert!(b <= a);
            }
            if let (Some(a), Some(b)) = (w[0].fnr, w[1].fnr) {
                prop_assert!(b >= a);
            }
        }
    }
}
