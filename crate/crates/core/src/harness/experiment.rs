//! Repeated-split evaluation of a model grid.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::splits::{make_splits, Split};
use super::HarnessError;
use crate::dataset::{defendant_features, worker_features, Condition, Dataset, DEFAULT_CHARGE_TOP_K};
use crate::hybrid::{self, default_grid, HybridInput, HybridKind, HybridOutput, HybridSpec, OracleMode};
use crate::learners::ForestParams;
use crate::metrics::{self, MetricRow, MetricSet, ALL, METRICS_CSV_HEADER, METRIC_NAMES};
use crate::partition::partition_rows;
use crate::scoring::{scores_for, Scorer};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    All,
    DisagreementOnly,
}

impl Population {
    pub fn as_str(&self) -> &'static str {
        match self {
            Population::All => "all",
            Population::DisagreementOnly => "disagreement_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub population: Population,
    /// Machine and human scorer defining the partition and the
    /// disagreement population.
    pub scorer_pair: (Scorer, Scorer),
    pub models: Vec<HybridSpec>,
    pub n_splits: usize,
    pub train_fraction: f64,
    pub base_seed: u64,
    pub subgroups: Vec<String>,
    pub output_dir: Option<PathBuf>,
    pub charge_top_k: usize,
    /// Replaces the forest parameters of every model when set.
    pub forest: Option<ForestParams>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            population: Population::All,
            scorer_pair: (Scorer::Compas, Scorer::Hnr),
            models: default_grid(),
            n_splits: 10,
            train_fraction: 0.8,
            base_seed: 0,
            subgroups: vec!["race".into()],
            output_dir: None,
            charge_top_k: DEFAULT_CHARGE_TOP_K,
            forest: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        if self.n_splits == 0 {
            return Err(HarnessError::InvalidConfig("n_splits must be >= 1".into()));
        }
        for m in &self.models {
            m.validate()?;
        }
        let mut names: Vec<String> = self.models.iter().map(HybridSpec::display_name).collect();
        names.sort();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(HarnessError::InvalidConfig(format!("duplicate model name `{}`", w[0])));
        }
        Ok(())
    }
}

/// Metric values of one model on one split's test rows within a
/// (group, slice) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitValues {
    pub n: u64,
    pub values: [Option<f64>; 7],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model_type: String,
    pub model: String,
    pub group: String,
    pub slice: String,
    /// One entry per split; `None` when the cell failed or the group had
    /// no test rows in that split.
    pub splits: Vec<Option<SplitValues>>,
}

fn defined(row: &ResultRow, k: usize) -> Vec<f64> {
    row.splits.iter().flatten().filter_map(|s| s.values[k]).collect()
}

impl ResultRow {
    pub fn mean(&self) -> [Option<f64>; 7] {
        std::array::from_fn(|k| {
            let v = defined(self, k);
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        })
    }

    /// Sample standard deviation (n - 1 denominator) over the splits where
    /// the metric is defined; undefined below two values.
    pub fn std(&self) -> [Option<f64>; 7] {
        std::array::from_fn(|k| {
            let v = defined(self, k);
            if v.len() < 2 {
                return None;
            }
            let m = v.iter().sum::<f64>() / v.len() as f64;
            Some((v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt())
        })
    }

    /// Rounded mean test-set size over the splits that produced values.
    pub fn mean_n(&self) -> u64 {
        let ns: Vec<u64> = self.splits.iter().flatten().map(|s| s.n).collect();
        if ns.is_empty() {
            0
        } else {
            (ns.iter().sum::<u64>() as f64 / ns.len() as f64).round() as u64
        }
    }

    fn metric_row(&self, values: [Option<f64>; 7]) -> MetricRow {
        MetricRow {
            model: self.model.clone(),
            group: self.group.clone(),
            slice: self.slice.clone(),
            n: self.mean_n(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub population: Population,
    pub scorer_pair: (Scorer, Scorer),
    /// Rows in the modeled population.
    pub n_rows: usize,
    /// Size of the disagreement subset of the scorer pair over the whole
    /// dataset.
    pub disagreement_count: usize,
    pub n_splits: usize,
    pub rows: Vec<ResultRow>,
    pub notes: Vec<String>,
}

/// CSV cell for per-split values: full precision so aggregates can be
/// recomputed exactly.
fn raw_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResultTable {
    pub fn row(&self, model: &str, group: &str, slice: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.group == group && r.slice == slice)
    }

    pub fn models(&self) -> Vec<(&str, &str)> {
        let mut out: Vec<(&str, &str)> = Vec::new();
        for r in &self.rows {
            if out.last().is_none_or(|(m, _)| *m != r.model) {
                out.push((&r.model, &r.model_type));
            }
        }
        out
    }

    pub fn mean_rows(&self) -> Vec<MetricRow> {
        self.rows.iter().map(|r| r.metric_row(r.mean())).collect()
    }

    pub fn std_rows(&self) -> Vec<MetricRow> {
        self.rows.iter().map(|r| r.metric_row(r.std())).collect()
    }

    /// Means in the metrics schema.
    pub fn metrics_csv(&self) -> String {
        rows_csv(&self.mean_rows())
    }

    pub fn metrics_std_csv(&self) -> String {
        rows_csv(&self.std_rows())
    }

    /// Every retained per-split value, full precision.
    pub fn metrics_splits_csv(&self) -> String {
        let mut out = format!("model,group,slice,split,n,{}\n", METRIC_NAMES.join(","));
        for r in &self.rows {
            for (k, s) in r.splits.iter().enumerate() {
                if let Some(s) = s {
                    let cells: Vec<String> = s.values.iter().map(|&v| raw_cell(v)).collect();
                    out.push_str(&format!(
                        "{},{},{},{k},{},{}\n",
                        r.model,
                        r.group,
                        r.slice,
                        s.n,
                        cells.join(",")
                    ));
                }
            }
        }
        out
    }

    /// Models whose mean accuracy exceeds the benevolent oracle or falls
    /// below the adversarial oracle, per (group, slice).
    pub fn dominance_violations(&self) -> Vec<String> {
        const ACC: usize = 2;
        let mut out = Vec::new();
        let oracle_acc = |name: &str, g: &str, s: &str| self.row(name, g, s).and_then(|r| r.mean()[ACC]);
        for r in &self.rows {
            if r.model_type == "Oracle" {
                continue;
            }
            let Some(acc) = r.mean()[ACC] else { continue };
            if let Some(best) = oracle_acc("Benevolent oracle", &r.group, &r.slice) {
                if acc > best + 1e-12 {
                    out.push(format!(
                        "{} ({}, {}): accuracy {acc:.3} above benevolent oracle {best:.3}",
                        r.model, r.group, r.slice
                    ));
                }
            }
            if let Some(worst) = oracle_acc("Adversarial oracle", &r.group, &r.slice) {
                if acc < worst - 1e-12 {
                    out.push(format!(
                        "{} ({}, {}): accuracy {acc:.3} below adversarial oracle {worst:.3}",
                        r.model, r.group, r.slice
                    ));
                }
            }
        }
        out
    }
}

pub fn rows_csv(rows: &[MetricRow]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

/// Model inputs for every defendant in dataset order: the eight defendant
/// features, worker aggregates of both conditions and every computable
/// score. Scorers that cannot be computed are reported in the notes.
pub fn hybrid_input(dataset: &Dataset, charge_top_k: usize) -> Result<(HybridInput, Vec<String>), HarnessError> {
    let mut notes = Vec::new();
    let mut scores = BTreeMap::new();
    for s in Scorer::HUMAN_AND_MACHINE {
        match scores_for(dataset, &s) {
            Ok(v) => {
                scores.insert(s, v.into_iter().map(|r| r.value).collect());
            }
            Err(e) => notes.push(format!("scorer {s} unavailable: {e}")),
        }
    }
    let workers =
        worker_features(dataset, Condition::NoRace).hconcat(&worker_features(dataset, Condition::WithRace))?;
    let input = HybridInput::new(defendant_features(dataset, charge_top_k), workers, scores)?;
    Ok((input, notes))
}

/// Subgroup value per row: the values of every configured column, which
/// must be `race`, `sex` or `charge_degree`.
fn subgroup_columns(dataset: &Dataset, columns: &[String]) -> Result<Vec<Vec<String>>, HarnessError> {
    columns
        .iter()
        .map(|c| {
            dataset
                .group_column(c)
                .ok_or_else(|| HarnessError::InvalidConfig(format!("unknown subgroup column `{c}`")))
        })
        .collect()
}

fn cell_seed(base: u64, split: usize, name: &str, spec_seed: u64) -> u64 {
    seed::combine(
        seed::combine(base, split as u64),
        seed::combine(seed::hash_str(name), spec_seed),
    )
}

fn run_cell(
    spec: &HybridSpec,
    train: &HybridInput,
    train_labels: &[bool],
    test: &HybridInput,
    test_labels: &[bool],
) -> Result<HybridOutput, hybrid::HybridError> {
    if spec.is_oracle() {
        let mode = match spec.kind {
            HybridKind::OracleBenevolent => OracleMode::Benevolent,
            _ => OracleMode::Adversarial,
        };
        return hybrid::oracle(
            test.score(&spec.scorers[0])?,
            test.score(&spec.scorers[1])?,
            test_labels,
            mode,
        );
    }
    hybrid::fit(spec, train, train_labels)?.predict(test)
}

type CellKey = (usize, String, String);
type SplitResult = (BTreeMap<CellKey, SplitValues>, Vec<String>);

#[allow(clippy::too_many_arguments)]
fn run_split(
    k: usize,
    split: &Split,
    models: &[HybridSpec],
    input: &HybridInput,
    labels: &[bool],
    groups: &[Vec<String>],
    config: &ExperimentConfig,
) -> SplitResult {
    let train = input.take_rows(&split.train);
    let test = input.take_rows(&split.test);
    let pick = |rows: &[usize]| rows.iter().map(|&i| labels[i]).collect::<Vec<bool>>();
    let (train_labels, test_labels) = (pick(&split.train), pick(&split.test));
    let test_groups: Vec<Vec<String>> = groups
        .iter()
        .map(|g| split.test.iter().map(|&i| g[i].clone()).collect())
        .collect();

    let mut cells = BTreeMap::new();
    let mut notes = Vec::new();
    for (m, spec) in models.iter().enumerate() {
        let name = spec.display_name();
        let mut spec = spec.clone();
        spec.seed = cell_seed(config.base_seed, k, &name, spec.seed);
        if let Some(f) = &config.forest {
            spec.forest = f.clone();
        }
        let evaluated = run_cell(&spec, &train, &train_labels, &test, &test_labels)
            .map_err(|e| e.to_string())
            .and_then(|out| {
                let mut all: BTreeMap<(String, String), MetricSet> = BTreeMap::new();
                let fallback = vec![ALL.to_string(); test_labels.len()];
                for g in test_groups.iter().chain(groups.is_empty().then_some(&fallback)) {
                    let sets =
                        metrics::evaluate_by_group_and_slice(out.scores.as_deref(), &out.predictions, &test_labels, g)
                            .map_err(|e| e.to_string())?;
                    all.extend(sets);
                }
                Ok(all)
            });
        match evaluated {
            Ok(sets) => {
                for ((g, s), set) in sets {
                    cells.insert(
                        (m, g, s),
                        SplitValues {
                            n: set.n,
                            values: set.values(),
                        },
                    );
                }
            }
            Err(e) => notes.push(format!("split {k}, {name}: {e}")),
        }
    }
    (cells, notes)
}

fn slice_rank(s: &str) -> usize {
    match s {
        ALL => 0,
        metrics::SLICE_RECIDIVATED => 1,
        _ => 2,
    }
}

/// Evaluates every model of the grid on `n_splits` stratified splits of the
/// chosen population and aggregates mean and standard deviation per
/// (model, group, slice). Splits run on separate threads; each cell seeds
/// itself from (base seed, split index, model name), so results do not
/// depend on scheduling.
pub fn run_experiment(dataset: &Dataset, config: &ExperimentConfig) -> Result<ResultTable, HarnessError> {
    config.validate()?;
    let (machine, human) = &config.scorer_pair;
    let pair_rows = partition_rows(dataset, &scores_for(dataset, machine)?, &scores_for(dataset, human)?)?;
    let disagreement: Vec<usize> = pair_rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.case.is_disagreement())
        .map(|(i, _)| i)
        .collect();

    let (full_input, mut notes) = hybrid_input(dataset, config.charge_top_k)?;
    let full_labels = dataset.labels();
    let full_groups = subgroup_columns(dataset, &config.subgroups)?;
    let population: Vec<usize> = match config.population {
        Population::All => (0..dataset.len()).collect(),
        Population::DisagreementOnly => disagreement.clone(),
    };
    let input = full_input.take_rows(&population);
    let labels: Vec<bool> = population.iter().map(|&i| full_labels[i]).collect();
    let groups: Vec<Vec<String>> = full_groups
        .iter()
        .map(|g| population.iter().map(|&i| g[i].clone()).collect())
        .collect();

    let splits = make_splits(&labels, config.n_splits, config.train_fraction, config.base_seed)?;
    let results: Vec<SplitResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = splits
            .iter()
            .enumerate()
            .map(|(k, split)| {
                let (input, labels, groups) = (&input, &labels, &groups);
                scope.spawn(move || run_split(k, split, &config.models, input, labels, groups, config))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("split worker panicked"))
            .collect()
    });

    let mut table: BTreeMap<CellKey, Vec<Option<SplitValues>>> = BTreeMap::new();
    for m in 0..config.models.len() {
        table.insert((m, ALL.to_string(), ALL.to_string()), vec![None; config.n_splits]);
    }
    for (k, (cells, split_notes)) in results.into_iter().enumerate() {
        for (key, v) in cells {
            table.entry(key).or_insert_with(|| vec![None; config.n_splits])[k] = Some(v);
        }
        notes.extend(split_notes);
    }
    let mut keyed: Vec<(CellKey, Vec<Option<SplitValues>>)> = table.into_iter().collect();
    keyed.sort_by(|((ma, ga, sa), _), ((mb, gb, sb), _)| {
        ma.cmp(mb)
            .then((ga != ALL).cmp(&(gb != ALL)))
            .then(ga.cmp(gb))
            .then(slice_rank(sa).cmp(&slice_rank(sb)))
    });
    let rows: Vec<ResultRow> = keyed
        .into_iter()
        .map(|((m, group, slice), splits)| ResultRow {
            model_type: config.models[m].model_type().to_string(),
            model: config.models[m].display_name(),
            group,
            slice,
            splits,
        })
        .collect();

    let table = ResultTable {
        population: config.population,
        scorer_pair: config.scorer_pair.clone(),
        n_rows: population.len(),
        disagreement_count: disagreement.len(),
        n_splits: config.n_splits,
        rows,
        notes,
    };
    let violations = table.dominance_violations();
    if !violations.is_empty() {
        log::warn!(
            "{} cells fall outside the pairwise oracle bounds; see the summary notes",
            violations.len()
        );
        for v in &violations {
            log::debug!("oracle bound: {v}");
        }
    }
    Ok(table)
}

/// Full-population metrics of each scorer on its 0..=10 value and its
/// binarization at the default cutoff, by subgroup and recidivism slice.
pub fn scorer_metrics(dataset: &Dataset, subgroups: &[String]) -> Result<Vec<MetricRow>, HarnessError> {
    let labels = dataset.labels();
    let groups = subgroup_columns(dataset, subgroups)?;
    let mut rows = Vec::new();
    for s in Scorer::HUMAN_AND_MACHINE {
        let Ok(scores) = scores_for(dataset, &s) else { continue };
        let values: Vec<f64> = scores.iter().map(|r| r.value).collect();
        let preds: Vec<bool> = scores.iter().map(|r| r.binarized).collect();
        let mut cells: BTreeMap<(String, String), MetricSet> = BTreeMap::new();
        let fallback = vec![ALL.to_string(); labels.len()];
        for g in groups.iter().chain(groups.is_empty().then_some(&fallback)) {
            cells.extend(metrics::evaluate_by_group_and_slice(Some(&values), &preds, &labels, g)?);
        }
        let mut keyed: Vec<_> = cells.into_iter().collect();
        keyed.sort_by(|((ga, sa), _), ((gb, sb), _)| {
            (ga != ALL)
                .cmp(&(gb != ALL))
                .then(ga.cmp(gb))
                .then(slice_rank(sa).cmp(&slice_rank(sb)))
        });
        rows.extend(
            keyed
                .into_iter()
                .map(|((g, sl), m)| MetricRow::from_set(s.label(), &g, &sl, &m)),
        );
    }
    Ok(rows)
}
