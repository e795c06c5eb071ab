//! Flat-kernel mean shift.
//!
//! Every row seeds a trajectory that moves to the mean of the rows within
//! `bandwidth` (inclusive) until the step is below `1e-4` or 300 iterations
//! pass. Endpoints are merged greedily, densest first, whenever they lie
//! within `bandwidth / 2` of an already accepted mode. Rows are assigned to
//! the nearest mode.
//!
//! Rows are processed in a canonical (lexicographic) order, so the result
//! does not depend on the input row order.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::matrix::{DenseMatrix, FeatureMatrix};
use super::LearnError;
use crate::seed;

pub const MAX_ITER: usize = 300;
pub const TOLERANCE: f64 = 1e-4;
/// Trajectories that must converge to a mode for it to be kept.
pub const MIN_SUPPORT: usize = 2;
/// Rows sampled when estimating the bandwidth automatically.
pub const AUTO_SAMPLE: usize = 500;
pub const AUTO_QUANTILE_SCALE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    /// Median pairwise distance times 0.3 on a seeded subsample.
    Auto {
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub modes: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub bandwidth: f64,
}

impl ClusterResult {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.modes.len()];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

pub fn estimate_bandwidth(x: &DenseMatrix, seed: u64) -> f64 {
    let n = x.n_rows();
    if n < 2 {
        return 1.0;
    }
    let mut rows: Vec<usize> = if n > AUTO_SAMPLE {
        sample(&mut seed::rng(seed), n, AUTO_SAMPLE).into_vec()
    } else {
        (0..n).collect()
    };
    rows.sort_unstable();
    let mut d: Vec<f64> = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for (k, &i) in rows.iter().enumerate() {
        for &j in &rows[k + 1..] {
            d.push(dist2(x.row(i), x.row(j)).sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    let bw = median * AUTO_QUANTILE_SCALE;
    if bw > 0.0 {
        return bw;
    }
    // Heavy duplication: fall back to the spread of the sample.
    let max = d.last().copied().unwrap_or(0.0) * AUTO_QUANTILE_SCALE;
    if max > 0.0 {
        max
    } else {
        1.0
    }
}

pub fn mean_shift(x: &DenseMatrix, bandwidth: Bandwidth) -> Result<ClusterResult, LearnError> {
    let n = x.n_rows();
    if n == 0 {
        return Err(LearnError::EmptyInput);
    }
    if x.rows().flatten().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFinite);
    }
    let bw = match bandwidth {
        Bandwidth::Fixed(b) if b.is_finite() && b >= 0.0 => b,
        Bandwidth::Fixed(b) => return Err(LearnError::InvalidParams(format!("bandwidth {b}"))),
        Bandwidth::Auto { seed } => estimate_bandwidth(x, seed),
    };
    let bw2 = bw * bw;
    let d = x.n_cols();

    let mut canon: Vec<usize> = (0..n).collect();
    canon.sort_by(|&a, &b| lex_cmp(x.row(a), x.row(b)).then(a.cmp(&b)));
    let points: Vec<&[f64]> = canon.iter().map(|&i| x.row(i)).collect();

    let mut endpoints: Vec<Vec<f64>> = Vec::with_capacity(n);
    for start in &points {
        let mut pos = start.to_vec();
        for _ in 0..MAX_ITER {
            let mut mean = vec![0.0; d];
            let mut count = 0usize;
            for p in &points {
                if dist2(p, &pos) <= bw2 {
                    for (m, v) in mean.iter_mut().zip(p.iter()) {
                        *m += v;
                    }
                    count += 1;
                }
            }
            if count == 0 {
                break;
            }
            mean.iter_mut().for_each(|m| *m /= count as f64);
            let step = dist2(&mean, &pos).sqrt();
            pos = mean;
            if step < TOLERANCE {
                break;
            }
        }
        endpoints.push(pos);
    }

    let intensity: Vec<usize> = endpoints
        .iter()
        .map(|e| points.iter().filter(|p| dist2(p, e) <= bw2).count())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        intensity[b]
            .cmp(&intensity[a])
            .then_with(|| lex_cmp(&endpoints[a], &endpoints[b]))
    });
    let merge2 = (bw / 2.0) * (bw / 2.0);
    let mut merged: Vec<(Vec<f64>, usize)> = Vec::new();
    for i in order {
        match merged.iter_mut().find(|(m, _)| dist2(m, &endpoints[i]) <= merge2) {
            Some((_, support)) => *support += 1,
            None => merged.push((endpoints[i].clone(), 1)),
        }
    }
    // A mode reached by a single trajectory is an isolated point, not a
    // density peak; drop it unless nothing else survives.
    if merged.iter().any(|(_, s)| *s >= MIN_SUPPORT) {
        merged.retain(|(_, s)| *s >= MIN_SUPPORT);
    }
    let modes: Vec<Vec<f64>> = merged.into_iter().map(|(m, _)| m).collect();

    let assignment = (0..n)
        .map(|i| {
            let row = x.row(i);
            (0..modes.len())
                .min_by(|&a, &b| dist2(row, &modes[a]).total_cmp(&dist2(row, &modes[b])).then(a.cmp(&b)))
                .expect("at least one mode")
        })
        .collect();
    Ok(ClusterResult {
        modes,
        assignment,
        bandwidth: bw,
    })
}

/// Mean shift over a feature table that must already be numeric.
pub fn mean_shift_table(x: &FeatureMatrix, bandwidth: Bandwidth) -> Result<ClusterResult, LearnError> {
    if let Some(c) = x.columns().iter().find(|c| !c.data.is_numeric()) {
        return Err(LearnError::NonNumeric(c.name.clone()));
    }
    let enc = super::matrix::OneHotEncoder::fit(x);
    mean_shift(&enc.transform(x)?, bandwidth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::matrix::{Column, ColumnData};

    #[test]
    fn single_point() {
        let x = DenseMatrix::from_rows(&[vec![1.5, -2.0]]);
        let r = mean_shift(&x, Bandwidth::Auto { seed: 0 }).unwrap();
        assert_eq!(r.modes, vec![vec![1.5, -2.0]]);
        assert_eq!(r.assignment, vec![0]);
    }

    #[test]
    fn identical_points() {
        let x = DenseMatrix::from_rows(&vec![vec![3.0, 3.0]; 10]);
        let r = mean_shift(&x, Bandwidth::Auto { seed: 0 }).unwrap();
        assert_eq!(r.n_modes(), 1);
        assert!(r.assignment.iter().all(|&a| a == 0));
    }

    #[test]
    fn errors() {
        let empty = DenseMatrix::new(0, 2, vec![]);
        assert!(matches!(
            mean_shift(&empty, Bandwidth::Fixed(1.0)),
            Err(LearnError::EmptyInput)
        ));
        let cat = FeatureMatrix::new(vec![Column {
            name: "race".into(),
            data: ColumnData::Categorical(vec!["a".into()]),
        }])
        .unwrap();
        assert!(matches!(
            mean_shift_table(&cat, Bandwidth::Fixed(1.0)),
            Err(LearnError::NonNumeric(_))
        ));
    }

    #[test]
    fn modes_are_separated() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 0.37).sin() * 3.0, (i as f64 * 0.11).cos()])
            .collect();
        let x = DenseMatrix::from_rows(&rows);
        let r = mean_shift(&x, Bandwidth::Fixed(0.8)).unwrap();
        for a in 0..r.n_modes() {
            for b in a + 1..r.n_modes() {
                assert!(dist2(&r.modes[a], &r.modes[b]).sqrt() > 0.4);
            }
        }
        assert_eq!(r.assignment.len(), 40);
    }

    #[test]
    fn isolated_points_join_nearest_mode() {
        let x = DenseMatrix::from_rows(&[vec![0.0], vec![0.1], vec![0.2], vec![9.0]]);
        let r = mean_shift(&x, Bandwidth::Fixed(1.0)).unwrap();
        assert_eq!(r.n_modes(), 1);
        assert_eq!(r.assignment, vec![0; 4]);
        // With only isolated points every one is kept.
        let y = DenseMatrix::from_rows(&[vec![0.0], vec![5.0]]);
        assert_eq!(mean_shift(&y, Bandwidth::Fixed(1.0)).unwrap().n_modes(), 2);
    }
}
