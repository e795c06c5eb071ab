//! Seeded, label-stratified train/test splits.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::seed;

pub const MIN_ROWS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    /// Sorted row positions.
    pub train: Vec<usize>,
    /// Sorted row positions, disjoint from `train`.
    pub test: Vec<usize>,
}

/// Training rows allocated to each class: `round(fraction * n)` clamped to
/// `[1, n - 1]`, shared out by largest remainder so every class keeps its
/// proportion within one row.
fn allocate(class_sizes: [usize; 2], fraction: f64) -> [usize; 2] {
    let n: usize = class_sizes.iter().sum();
    let n_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let exact = class_sizes.map(|c| n_train as f64 * c as f64 / n as f64);
    let mut alloc = exact.map(|q| q.floor() as usize);
    let mut left = n_train - alloc.iter().sum::<usize>();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if alloc[c] < class_sizes[c] {
            alloc[c] += 1;
            left -= 1;
        }
    }
    alloc
}

pub fn stratified_split(labels: &[bool], fraction: f64, seed: u64) -> Result<Split, HarnessError> {
    let n = labels.len();
    if n < MIN_ROWS {
        return Err(HarnessError::TooFewRows(n));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HarnessError::InvalidConfig(format!("train_fraction {fraction}")));
    }
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        classes[y as usize].push(i);
    }
    let alloc = allocate([classes[0].len(), classes[1].len()], fraction);
    let mut rng = seed::rng(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (rows, k) in classes.iter_mut().zip(alloc) {
        rows.shuffle(&mut rng);
        train.extend_from_slice(&rows[..k]);
        test.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Split `k` uses seed `base_seed + k`.
pub fn make_splits(
    labels: &[bool],
    n_splits: usize,
    fraction: f64,
    base_seed: u64,
) -> Result<Vec<Split>, HarnessError> {
    if n_splits == 0 {
        return Err(HarnessError::InvalidConfig("n_splits must be >= 1".into()));
    }
    (0..n_splits)
        .map(|k| stratified_split(labels, fraction, base_seed.wrapping_add(k as u64)))
        .collect()
}
