//! Defendant records, worker predictions and machine scores: CSV ingestion,
//! validation, synthetic generation and feature assembly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::{Column, ColumnData, FeatureMatrix, OTHER_CATEGORY};
use crate::partition::CaseLabel;
use crate::seed;

pub const DEFENDANTS_FILE: &str = "defendants.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

pub const DEFENDANT_COLUMNS: [&str; 11] = [
    "id",
    "age",
    "race",
    "sex",
    "juv_misd_count",
    "juv_felony_count",
    "priors_count",
    "charge_degree",
    "charge",
    "compas_score",
    "recidivated",
];

pub const PREDICTION_COLUMNS: [&str; 7] = [
    "worker_id",
    "defendant_id",
    "condition",
    "prediction",
    "worker_race",
    "worker_sex",
    "worker_age",
];

pub const MIN_AGE: u32 = 12;
pub const MAX_AGE: u32 = 100;
/// Charges kept as their own category when building features.
pub const DEFAULT_CHARGE_TOP_K: usize = 20;
/// Category used for missing worker demographics.
pub const UNKNOWN: &str = "unknown";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file}:{line}: bad value `{value}` in column `{column}`")]
    BadValue {
        file: String,
        line: u64,
        column: String,
        value: String,
    },
    #[error("prediction references unknown defendant {0}")]
    DanglingForeignKey(u64),
    #[error("duplicate key {0}")]
    DuplicateKey(String),
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

impl DatasetError {
    pub fn is_io(&self) -> bool {
        matches!(self, DatasetError::Io { .. })
            || matches!(self, DatasetError::Csv { source, .. } if source.is_io_error())
    }
}

macro_rules! closed_vocabulary {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = ();

            fn from_str(s: &str) -> Result<Self, ()> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err(()),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

closed_vocabulary!(Race { Black => "black", White => "white", Other => "other" });
closed_vocabulary!(Sex { Male => "male", Female => "female" });
closed_vocabulary!(ChargeDegree { Misdemeanor => "misdemeanor", Felony => "felony" });
closed_vocabulary!(Condition { NoRace => "no_race", WithRace => "with_race" });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefendantRecord {
    pub id: u64,
    pub age: u32,
    pub race: Race,
    pub sex: Sex,
    pub juv_misd_count: u32,
    pub juv_felony_count: u32,
    pub priors_count: u32,
    pub charge_degree: ChargeDegree,
    pub charge: String,
    pub recidivated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerPrediction {
    pub worker_id: u64,
    pub defendant_id: u64,
    pub condition: Condition,
    pub prediction: bool,
    pub worker_race: String,
    pub worker_sex: String,
    pub worker_age: Option<u32>,
}

/// Validated collection of defendants, their COMPAS scores and the worker
/// predictions about them. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    defendants: Vec<DefendantRecord>,
    compas_scores: BTreeMap<u64, u8>,
    predictions: Vec<WorkerPrediction>,
    index: HashMap<u64, usize>,
}

impl Dataset {
    pub fn new(
        defendants: Vec<DefendantRecord>,
        compas_scores: BTreeMap<u64, u8>,
        predictions: Vec<WorkerPrediction>,
    ) -> Result<Self, DatasetError> {
        let mut index = HashMap::with_capacity(defendants.len());
        for (i, d) in defendants.iter().enumerate() {
            if index.insert(d.id, i).is_some() {
                return Err(DatasetError::DuplicateKey(format!("defendant id {}", d.id)));
            }
            if !(MIN_AGE..=MAX_AGE).contains(&d.age) {
                return Err(DatasetError::BadValue {
                    file: DEFENDANTS_FILE.into(),
                    line: i as u64 + 2,
                    column: "age".into(),
                    value: d.age.to_string(),
                });
            }
        }
        for (&id, &score) in &compas_scores {
            if !index.contains_key(&id) {
                return Err(DatasetError::DanglingForeignKey(id));
            }
            if !(1..=10).contains(&score) {
                return Err(DatasetError::BadValue {
                    file: DEFENDANTS_FILE.into(),
                    line: index[&id] as u64 + 2,
                    column: "compas_score".into(),
                    value: score.to_string(),
                });
            }
        }
        let mut seen = BTreeSet::new();
        for p in &predictions {
            if !index.contains_key(&p.defendant_id) {
                return Err(DatasetError::DanglingForeignKey(p.defendant_id));
            }
            if !seen.insert((p.worker_id, p.defendant_id, p.condition)) {
                return Err(DatasetError::DuplicateKey(format!(
                    "prediction (worker {}, defendant {}, {})",
                    p.worker_id, p.defendant_id, p.condition
                )));
            }
        }
        Ok(Self {
            defendants,
            compas_scores,
            predictions,
            index,
        })
    }

    pub fn defendants(&self) -> &[DefendantRecord] {
        &self.defendants
    }

    pub fn predictions(&self) -> &[WorkerPrediction] {
        &self.predictions
    }

    pub fn compas_scores(&self) -> &BTreeMap<u64, u8> {
        &self.compas_scores
    }

    pub fn len(&self) -> usize {
        self.defendants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defendants.is_empty()
    }

    pub fn position(&self, id: u64) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn defendant(&self, id: u64) -> Option<&DefendantRecord> {
        self.position(id).map(|i| &self.defendants[i])
    }

    pub fn labels(&self) -> Vec<bool> {
        self.defendants.iter().map(|d| d.recidivated).collect()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.defendants.iter().map(|d| d.id).collect()
    }

    /// Predictions grouped by defendant position, for one condition.
    pub fn predictions_by_defendant(&self, condition: Condition) -> Vec<Vec<&WorkerPrediction>> {
        let mut groups = vec![Vec::new(); self.defendants.len()];
        for p in self.predictions.iter().filter(|p| p.condition == condition) {
            groups[self.index[&p.defendant_id]].push(p);
        }
        groups
    }

    /// Per-row value of a subgroup column (`race`, `sex` or
    /// `charge_degree`).
    pub fn group_column(&self, column: &str) -> Option<Vec<String>> {
        let f: fn(&DefendantRecord) -> String = match column {
            "race" => |d| d.race.to_string(),
            "sex" => |d| d.sex.to_string(),
            "charge_degree" => |d| d.charge_degree.to_string(),
            _ => return None,
        };
        Some(self.defendants.iter().map(f).collect())
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

/// Maps each required column to its position; extra columns are ignored
/// with a warning.
fn column_positions(headers: &csv::StringRecord, required: &[&str], file: &str) -> Result<Vec<usize>, DatasetError> {
    for h in headers.iter() {
        if !required.contains(&h) {
            log::warn!("{file}: ignoring unknown column `{h}`");
        }
    }
    required
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| DatasetError::MissingColumn {
                    file: file.to_string(),
                    column: c.to_string(),
                })
        })
        .collect()
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    positions: &'a [usize],
    columns: &'a [&'a str],
    file: &'a str,
    line: u64,
}

impl Row<'_> {
    fn raw(&self, k: usize) -> &str {
        self.record.get(self.positions[k]).unwrap_or("")
    }

    fn bad(&self, k: usize) -> DatasetError {
        DatasetError::BadValue {
            file: self.file.to_string(),
            line: self.line,
            column: self.columns[k].to_string(),
            value: self.raw(k).to_string(),
        }
    }

    fn parse<T: FromStr>(&self, k: usize) -> Result<T, DatasetError> {
        self.raw(k).parse().map_err(|_| self.bad(k))
    }

    fn flag(&self, k: usize) -> Result<bool, DatasetError> {
        match self.raw(k) {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(self.bad(k)),
        }
    }

    fn category(&self, k: usize) -> String {
        let v = self.raw(k);
        if v.is_empty() {
            UNKNOWN.to_string()
        } else {
            v.to_string()
        }
    }
}

fn line_of(record: &csv::StringRecord, fallback: u64) -> u64 {
    record.position().map_or(fallback, |p| p.line())
}

pub fn load_dataset(defendants_path: &Path, predictions_path: &Path) -> Result<Dataset, DatasetError> {
    let mut reader = open_reader(defendants_path)?;
    let csv_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DatasetError::Csv {
            path: path.clone(),
            source,
        }
    };
    let headers = reader.headers().map_err(csv_err(defendants_path))?.clone();
    let pos = column_positions(&headers, &DEFENDANT_COLUMNS, DEFENDANTS_FILE)?;
    let mut defendants = Vec::new();
    let mut compas = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(defendants_path))?;
        let row = Row {
            record: &record,
            positions: &pos,
            columns: &DEFENDANT_COLUMNS,
            file: DEFENDANTS_FILE,
            line: line_of(&record, i as u64 + 2),
        };
        let age: u32 = row.parse(1)?;
        if !(MIN_AGE..=MAX_AGE).contains(&age) {
            return Err(row.bad(1));
        }
        let score: u8 = row.parse(9)?;
        if !(1..=10).contains(&score) {
            return Err(row.bad(9));
        }
        let charge = row.raw(8);
        if charge.is_empty() {
            return Err(row.bad(8));
        }
        let d = DefendantRecord {
            id: row.parse(0)?,
            age,
            race: row.parse(2)?,
            sex: row.parse(3)?,
            juv_misd_count: row.parse(4)?,
            juv_felony_count: row.parse(5)?,
            priors_count: row.parse(6)?,
            charge_degree: row.parse(7)?,
            charge: charge.to_string(),
            recidivated: row.flag(10)?,
        };
        if compas.insert(d.id, score).is_some() {
            return Err(DatasetError::DuplicateKey(format!("defendant id {}", d.id)));
        }
        defendants.push(d);
    }

    let mut reader = open_reader(predictions_path)?;
    let headers = reader.headers().map_err(csv_err(predictions_path))?.clone();
    let pos = column_positions(&headers, &PREDICTION_COLUMNS, PREDICTIONS_FILE)?;
    let mut predictions = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(predictions_path))?;
        let row = Row {
            record: &record,
            positions: &pos,
            columns: &PREDICTION_COLUMNS,
            file: PREDICTIONS_FILE,
            line: line_of(&record, i as u64 + 2),
        };
        let worker_age = match row.raw(6) {
            "" => None,
            _ => Some(row.parse(6)?),
        };
        predictions.push(WorkerPrediction {
            worker_id: row.parse(0)?,
            defendant_id: row.parse(1)?,
            condition: row.parse(2)?,
            prediction: row.flag(3)?,
            worker_race: row.category(4),
            worker_sex: row.category(5),
            worker_age,
        });
    }
    Dataset::new(defendants, compas, predictions)
}

/// Loads `defendants.csv` and `predictions.csv` from a directory.
pub fn load_dir(dir: &Path) -> Result<Dataset, DatasetError> {
    load_dataset(&dir.join(DEFENDANTS_FILE), &dir.join(PREDICTIONS_FILE))
}

pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<(), DatasetError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DatasetError::Io {
            path: path.clone(),
            source,
        }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;

    let path = dir.join(DEFENDANTS_FILE);
    let csv_err = |source| DatasetError::Csv {
        path: path.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(DEFENDANT_COLUMNS).map_err(csv_err)?;
    for d in &dataset.defendants {
        w.write_record([
            d.id.to_string(),
            d.age.to_string(),
            d.race.to_string(),
            d.sex.to_string(),
            d.juv_misd_count.to_string(),
            d.juv_felony_count.to_string(),
            d.priors_count.to_string(),
            d.charge_degree.to_string(),
            d.charge.clone(),
            dataset.compas_scores[&d.id].to_string(),
            (d.recidivated as u8).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io(&path))?;

    let path = dir.join(PREDICTIONS_FILE);
    let csv_err = |source| DatasetError::Csv {
        path: path.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(PREDICTION_COLUMNS).map_err(csv_err)?;
    for p in &dataset.predictions {
        w.write_record([
            p.worker_id.to_string(),
            p.defendant_id.to_string(),
            p.condition.to_string(),
            (p.prediction as u8).to_string(),
            p.worker_race.clone(),
            p.worker_sex.clone(),
            p.worker_age.map(|a| a.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io(&path))?;
    Ok(())
}

/// Target case shares. Each case pair keeps its reference mass; the
/// both-correct pair splits 0.275 / 0.215 and the others split evenly.
pub const DEFAULT_CASE_MIX: [f64; 8] = [0.275, 0.215, 0.081, 0.081, 0.0795, 0.0795, 0.0945, 0.0945];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_defendants: usize,
    pub n_workers_per_defendant: usize,
    pub seed: u64,
    pub case_mix: [f64; 8],
    /// Probability that a feature ignores the case profile and comes from a
    /// broad background distribution instead.
    pub feature_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_defendants: 1000,
            n_workers_per_defendant: 20,
            seed: 0,
            case_mix: DEFAULT_CASE_MIX,
            feature_noise: 0.2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.n_defendants == 0 || self.n_workers_per_defendant == 0 {
            return Err(DatasetError::InvalidConfig(
                "n_defendants and n_workers_per_defendant must be >= 1".into(),
            ));
        }
        if self.case_mix.iter().any(|p| p.is_nan() || *p < 0.0) {
            return Err(DatasetError::InvalidConfig(
                "case_mix entries must be non-negative".into(),
            ));
        }
        let sum: f64 = self.case_mix.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidConfig(format!(
                "case_mix sums to {sum}, expected 1"
            )));
        }
        if !(0.0..=1.0).contains(&self.feature_noise) {
            return Err(DatasetError::InvalidConfig("feature_noise must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Charge that marks each case when features follow the case profile.
const CASE_CHARGES: [&str; 8] = [
    "Grand Theft in the 3rd Degree",
    "Driving Under The Influence",
    "Possession of Cannabis",
    "Petit Theft",
    "Battery",
    "Driving License Suspended",
    "Burglary Unoccupied Dwelling",
    "Resist Officer w/o Violence",
];

const BACKGROUND_CHARGES: [&str; 24] = [
    "Battery",
    "Possession of Cocaine",
    "Grand Theft in the 3rd Degree",
    "Driving While License Revoked",
    "Possession of Cannabis",
    "Petit Theft",
    "Aggravated Assault w/Firearm",
    "Driving Under The Influence",
    "Felony Battery",
    "Criminal Mischief",
    "Possess Drug Paraphernalia",
    "Burglary Unoccupied Dwelling",
    "Aggravated Battery",
    "Resist Officer w/o Violence",
    "Tampering With Physical Evidence",
    "Deliver Cocaine",
    "Trespass Structure",
    "Robbery / No Weapon",
    "Fleeing or Eluding",
    "Uttering a Forged Instrument",
    "Leaving the Scene of Accident",
    "Stalking",
    "Obstruct Fire Equipment",
    "Disorderly Conduct",
];

/// Per-case feature profile: inclusive priors and age ranges. The boxes
/// are pairwise disjoint.
fn case_profile(case: u8) -> ((u32, u32), (u32, u32)) {
    match case {
        1 => ((2, 12), (18, 31)),
        2 => ((0, 1), (33, 48)),
        3 => ((0, 0), (24, 32)),
        6 => ((1, 1), (24, 32)),
        4 => ((2, 3), (33, 60)),
        5 => ((4, 5), (33, 60)),
        7 => ((6, 12), (33, 60)),
        _ => ((0, 1), (18, 23)),
    }
}

fn draw_case(rng: &mut seed::Rng, mix: &[f64; 8]) -> u8 {
    let u: f64 = rng.gen::<f64>() * mix.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in mix.iter().enumerate() {
        if p > 0.0 {
            last = k;
            acc += p;
            if u < acc {
                return k as u8 + 1;
            }
        }
    }
    last as u8 + 1
}

fn pick<'a>(rng: &mut seed::Rng, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

/// Synthetic population whose eight-case partition at cutoff 5 follows
/// `case_mix`. Each defendant's case is drawn first; features follow the
/// case profile, then the COMPAS score, worker votes and label are set so
/// that the case is realized exactly.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Dataset, DatasetError> {
    config.validate()?;
    let mut rng = seed::rng(config.seed);
    let n_workers = config.n_workers_per_defendant;
    let pool = n_workers.max(100);

    // Worker pools for the two conditions; ids are disjoint.
    let mut workers = Vec::with_capacity(2 * pool);
    for w in 0..2 * pool {
        let race = match rng.gen_range(0..100) {
            0..=74 => "white",
            75..=84 => "black",
            _ => "other",
        };
        let sex = if rng.gen_bool(0.5) { "male" } else { "female" };
        let age = if rng.gen_bool(0.05) {
            None
        } else {
            Some(rng.gen_range(18..=70u32))
        };
        workers.push((w as u64 + 1, race, sex, age));
    }

    let mut defendants = Vec::with_capacity(config.n_defendants);
    let mut compas = BTreeMap::new();
    let mut predictions = Vec::with_capacity(2 * n_workers * config.n_defendants);
    let noise = config.feature_noise;

    for i in 0..config.n_defendants {
        let id = i as u64 + 1;
        let case = CaseLabel::new(draw_case(&mut rng, &config.case_mix)).expect("case in 1..=8");
        let (machine_high, human_high, recidivated) = case.outcome();

        let ((p_lo, p_hi), (a_lo, a_hi)) = case_profile(case.id());
        let priors_count = if rng.gen_bool(noise) {
            (rng.gen::<f64>().powi(3) * 20.0) as u32
        } else {
            rng.gen_range(p_lo..=p_hi)
        };
        let age = if rng.gen_bool(noise) {
            rng.gen_range(18..=70)
        } else {
            rng.gen_range(a_lo..=a_hi)
        };
        // Charge is a weaker signal than the priors/age box: half of the
        // rows carry the case charge even without noise.
        let charge = if rng.gen_bool(0.5 + 0.5 * noise) {
            pick(&mut rng, &BACKGROUND_CHARGES)
        } else {
            CASE_CHARGES[case.id() as usize - 1]
        };
        let race = match rng.gen_range(0..100) {
            0..=49 => Race::Black,
            50..=90 => Race::White,
            _ => Race::Other,
        };
        let sex = if rng.gen_bool(0.8) { Sex::Male } else { Sex::Female };
        let charge_degree = if rng.gen_bool(if human_high { 0.75 } else { 0.55 }) {
            ChargeDegree::Felony
        } else {
            ChargeDegree::Misdemeanor
        };
        let juv_misd_count = if rng.gen_bool(0.1) { rng.gen_range(1..=3) } else { 0 };
        let juv_felony_count = if rng.gen_bool(0.07) { rng.gen_range(1..=2) } else { 0 };

        let tilt = (priors_count / 4).min(3) as u8;
        let score: u8 = if machine_high {
            (5 + rng.gen_range(0..=2) + tilt).min(10)
        } else {
            (1 + rng.gen_range(0..=2u8) + (priors_count > 0) as u8).min(4)
        };

        // Vote counts: high means 2k >= n, which is exactly score >= 5.
        let half_up = n_workers.div_ceil(2);
        let votes_nr = if human_high {
            let k = (n_workers as f64 * rng.gen_range(0.6..0.95)).round() as usize;
            k.clamp(half_up, n_workers)
        } else {
            let k = (n_workers as f64 * rng.gen_range(0.05..0.4)).round() as usize;
            k.min(half_up.saturating_sub(1))
        };
        let shift: i64 = match race {
            Race::Black if rng.gen_bool(0.3) => 1,
            Race::White if rng.gen_bool(0.3) => -1,
            _ => 0,
        };
        let votes_wr = (votes_nr as i64 + shift).clamp(0, n_workers as i64) as usize;

        for (condition, votes, offset) in [(Condition::NoRace, votes_nr, 0), (Condition::WithRace, votes_wr, pool)] {
            let chosen = sample(&mut rng, pool, n_workers);
            for (j, w) in chosen.iter().enumerate() {
                let (worker_id, wr, ws, wa) = workers[offset + w];
                predictions.push(WorkerPrediction {
                    worker_id,
                    defendant_id: id,
                    condition,
                    prediction: j < votes,
                    worker_race: wr.to_string(),
                    worker_sex: ws.to_string(),
                    worker_age: wa,
                });
            }
        }

        compas.insert(id, score);
        defendants.push(DefendantRecord {
            id,
            age,
            race,
            sex,
            juv_misd_count,
            juv_felony_count,
            priors_count,
            charge_degree,
            charge: charge.to_string(),
            recidivated,
        });
    }
    Dataset::new(defendants, compas, predictions)
}

/// Keeps the `k` most frequent values (ties by first appearance) and maps
/// the rest to `__other__`.
pub fn cap_categories(values: &[String], k: usize) -> Vec<String> {
    let mut counts: Vec<(&str, usize, usize)> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        match counts.iter_mut().find(|(s, _, _)| *s == v.as_str()) {
            Some(entry) => entry.1 += 1,
            None => counts.push((v.as_str(), 1, i)),
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let keep: BTreeSet<&str> = counts.iter().take(k).map(|(s, _, _)| *s).collect();
    values
        .iter()
        .map(|v| {
            if keep.contains(v.as_str()) {
                v.clone()
            } else {
                OTHER_CATEGORY.to_string()
            }
        })
        .collect()
}

/// The eight defendant features, one row per defendant in dataset order.
pub fn defendant_features(dataset: &Dataset, charge_top_k: usize) -> FeatureMatrix {
    let d = dataset.defendants();
    let num = |name: &str, f: fn(&DefendantRecord) -> f64| Column {
        name: name.to_string(),
        data: ColumnData::Numeric(d.iter().map(f).collect()),
    };
    let cat = |name: &str, f: fn(&DefendantRecord) -> String| Column {
        name: name.to_string(),
        data: ColumnData::Categorical(d.iter().map(f).collect()),
    };
    let charges: Vec<String> = d.iter().map(|r| r.charge.clone()).collect();
    FeatureMatrix::new(vec![
        num("age", |r| r.age as f64),
        cat("race", |r| r.race.to_string()),
        cat("sex", |r| r.sex.to_string()),
        num("juv_misd_count", |r| r.juv_misd_count as f64),
        num("juv_felony_count", |r| r.juv_felony_count as f64),
        num("priors_count", |r| r.priors_count as f64),
        cat("charge_degree", |r| r.charge_degree.to_string()),
        Column {
            name: "charge".into(),
            data: ColumnData::Categorical(cap_categories(&charges, charge_top_k)),
        },
    ])
    .expect("columns share the dataset length")
}

fn mode_of<'a>(values: impl Iterator<Item = &'a str>) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    // BTreeMap iteration is sorted, so ties resolve to the smallest value.
    counts
        .into_iter()
        .fold((UNKNOWN, 0), |best, (v, c)| if c > best.1 { (v, c) } else { best })
        .0
        .to_string()
}

/// Per-defendant aggregates of the workers who assessed each defendant in
/// one condition: mean age, modal race, modal sex. Column names are prefixed
/// with `hnr_` or `hwr_`. Missing ages are imputed with the condition-wide
/// mean.
pub fn worker_features(dataset: &Dataset, condition: Condition) -> FeatureMatrix {
    let prefix = match condition {
        Condition::NoRace => "hnr",
        Condition::WithRace => "hwr",
    };
    let groups = dataset.predictions_by_defendant(condition);
    let known: Vec<f64> = groups
        .iter()
        .flatten()
        .filter_map(|p| p.worker_age.map(f64::from))
        .collect();
    let global_mean = if known.is_empty() {
        0.0
    } else {
        known.iter().sum::<f64>() / known.len() as f64
    };
    let mut ages = Vec::with_capacity(groups.len());
    let mut races = Vec::with_capacity(groups.len());
    let mut sexes = Vec::with_capacity(groups.len());
    for g in &groups {
        let a: Vec<f64> = g.iter().filter_map(|p| p.worker_age.map(f64::from)).collect();
        ages.push(if a.is_empty() {
            global_mean
        } else {
            a.iter().sum::<f64>() / a.len() as f64
        });
        races.push(mode_of(g.iter().map(|p| p.worker_race.as_str())));
        sexes.push(mode_of(g.iter().map(|p| p.worker_sex.as_str())));
    }
    FeatureMatrix::new(vec![
        Column {
            name: format!("{prefix}_worker_age_mean"),
            data: ColumnData::Numeric(ages),
        },
        Column {
            name: format!("{prefix}_worker_race_mode"),
            data: ColumnData::Categorical(races),
        },
        Column {
            name: format!("{prefix}_worker_sex_mode"),
            data: ColumnData::Categorical(sexes),
        },
    ])
    .expect("columns share the dataset length")
}
