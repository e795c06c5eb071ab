//! Eight-way agreement/correctness partition of a scorer pair against
//! ground truth.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::scoring::RiskScore;

pub const PARTITION_CSV_HEADER: &str = "defendant_id,machine_binary,human_binary,recidivated,case_id";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("empty input")]
    EmptyInput,
    #[error("no score for defendant {0}")]
    MissingScore(u64),
}

/// `(machine_high, human_high, recidivated)` for cases 1..=8.
const OUTCOMES: [(bool, bool, bool); 8] = [
    (true, true, true),
    (false, false, false),
    (true, false, true),
    (false, true, false),
    (false, true, true),
    (true, false, false),
    (true, true, false),
    (false, false, true),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct CaseLabel(u8);

impl CaseLabel {
    pub fn new(id: u8) -> Option<Self> {
        (1..=8).contains(&id).then_some(Self(id))
    }

    pub fn all() -> impl Iterator<Item = CaseLabel> {
        (1..=8).map(CaseLabel)
    }

    pub fn id(&self) -> u8 {
        self.0
    }

    pub fn outcome(&self) -> (bool, bool, bool) {
        OUTCOMES[self.0 as usize - 1]
    }

    pub fn group(&self) -> CaseGroup {
        match self.0 {
            1 | 2 => CaseGroup::BothCorrect,
            3 | 4 => CaseGroup::MachineCorrect,
            5 | 6 => CaseGroup::HumanCorrect,
            _ => CaseGroup::BothIncorrect,
        }
    }

    pub fn is_disagreement(&self) -> bool {
        (3..=6).contains(&self.0)
    }
}

impl TryFrom<u8> for CaseLabel {
    type Error = String;

    fn try_from(id: u8) -> Result<Self, String> {
        CaseLabel::new(id).ok_or_else(|| format!("case id {id} outside 1..=8"))
    }
}

impl From<CaseLabel> for u8 {
    fn from(c: CaseLabel) -> u8 {
        c.0
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn assign_case(machine_high: bool, human_high: bool, recidivated: bool) -> CaseLabel {
    let id = OUTCOMES
        .iter()
        .position(|&o| o == (machine_high, human_high, recidivated))
        .expect("outcome table covers all eight inputs");
    CaseLabel(id as u8 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseGroup {
    BothCorrect,
    MachineCorrect,
    HumanCorrect,
    BothIncorrect,
}

impl CaseGroup {
    pub const ALL: [CaseGroup; 4] = [
        CaseGroup::BothCorrect,
        CaseGroup::MachineCorrect,
        CaseGroup::HumanCorrect,
        CaseGroup::BothIncorrect,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CaseGroup::BothCorrect => "both_correct",
            CaseGroup::MachineCorrect => "machine_correct",
            CaseGroup::HumanCorrect => "human_correct",
            CaseGroup::BothIncorrect => "both_incorrect",
        }
    }

    pub fn cases(&self) -> [u8; 2] {
        match self {
            CaseGroup::BothCorrect => [1, 2],
            CaseGroup::MachineCorrect => [3, 4],
            CaseGroup::HumanCorrect => [5, 6],
            CaseGroup::BothIncorrect => [7, 8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    /// Every case id 1..=8 is present, possibly with count 0.
    pub counts: BTreeMap<u8, u64>,
    pub n: u64,
    pub group_shares: BTreeMap<CaseGroup, f64>,
}

impl PartitionSummary {
    pub fn share(&self, group: CaseGroup) -> f64 {
        self.group_shares[&group]
    }

    pub fn case_share(&self, case: u8) -> f64 {
        self.counts[&case] as f64 / self.n as f64
    }

    pub fn disagreement_count(&self) -> u64 {
        (3..=6).map(|c| self.counts[&c]).sum()
    }
}

pub fn summarize_partition(cases: &[CaseLabel]) -> Result<PartitionSummary, PartitionError> {
    if cases.is_empty() {
        return Err(PartitionError::EmptyInput);
    }
    let mut counts: BTreeMap<u8, u64> = (1..=8).map(|c| (c, 0)).collect();
    for c in cases {
        *counts.get_mut(&c.id()).expect("valid case") += 1;
    }
    let n = cases.len() as u64;
    let group_shares = CaseGroup::ALL
        .iter()
        .map(|g| {
            let [a, b] = g.cases();
            (*g, (counts[&a] + counts[&b]) as f64 / n as f64)
        })
        .collect();
    Ok(PartitionSummary {
        counts,
        n,
        group_shares,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub defendant_id: u64,
    pub machine_binary: bool,
    pub human_binary: bool,
    pub recidivated: bool,
    pub case: CaseLabel,
}

impl PartitionRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.defendant_id, self.machine_binary as u8, self.human_binary as u8, self.recidivated as u8, self.case
        )
    }

    pub fn parse_csv_line(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split(',').collect();
        let flag = |s: &str| match s {
            "0" => Some(false),
            "1" => Some(true),
            _ => None,
        };
        if f.len() != 5 {
            return None;
        }
        let row = PartitionRow {
            defendant_id: f[0].parse().ok()?,
            machine_binary: flag(f[1])?,
            human_binary: flag(f[2])?,
            recidivated: flag(f[3])?,
            case: CaseLabel::new(f[4].parse().ok()?)?,
        };
        (assign_case(row.machine_binary, row.human_binary, row.recidivated) == row.case).then_some(row)
    }
}

fn by_id(scores: &[RiskScore]) -> HashMap<u64, bool> {
    scores.iter().map(|s| (s.defendant_id, s.binarized)).collect()
}

/// One row per defendant, in dataset order.
pub fn partition_rows(
    dataset: &Dataset,
    machine: &[RiskScore],
    human: &[RiskScore],
) -> Result<Vec<PartitionRow>, PartitionError> {
    let (m, h) = (by_id(machine), by_id(human));
    dataset
        .defendants()
        .iter()
        .map(|d| {
            let mb = *m.get(&d.id).ok_or(PartitionError::MissingScore(d.id))?;
            let hb = *h.get(&d.id).ok_or(PartitionError::MissingScore(d.id))?;
            Ok(PartitionRow {
                defendant_id: d.id,
                machine_binary: mb,
                human_binary: hb,
                recidivated: d.recidivated,
                case: assign_case(mb, hb, d.recidivated),
            })
        })
        .collect()
}

/// Ids whose two binarized scores differ (cases 3 to 6).
pub fn disagreement_subset(
    dataset: &Dataset,
    machine: &[RiskScore],
    human: &[RiskScore],
) -> Result<BTreeSet<u64>, PartitionError> {
    Ok(partition_rows(dataset, machine, human)?
        .into_iter()
        .filter(|r| r.machine_binary != r.human_binary)
        .map(|r| r.defendant_id)
        .collect())
}

pub fn partition_csv(rows: &[PartitionRow]) -> String {
    let mut out = String::from(PARTITION_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn parse_partition_csv(text: &str) -> Option<Vec<PartitionRow>> {
    let mut lines = text.lines();
    if lines.next()? != PARTITION_CSV_HEADER {
        return None;
    }
    lines
        .filter(|l| !l.is_empty())
        .map(PartitionRow::parse_csv_line)
        .collect()
}
