//! Output files and the markdown summary.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::characterize::DIFFERENCE_TREES;
use super::experiment::{rows_csv, ResultTable};
use super::HarnessError;
use crate::metrics::{format_cell, MetricRow, ALL, SLICE_NOT_RECIDIVATED, SLICE_RECIDIVATED};
use crate::partition::{parse_partition_csv, partition_csv, summarize_partition, CaseGroup, CaseLabel, PartitionRow};
use crate::scoring::{calibration_csv, parse_calibration_csv, CalibrationCurve, Scorer};

pub const METRICS_FILE: &str = "metrics.csv";
pub const METRICS_STD_FILE: &str = "metrics_std.csv";
pub const METRICS_SPLITS_FILE: &str = "metrics_splits.csv";
pub const RESULTS_FILE: &str = "results.json";
pub const PARTITION_FILE: &str = "partition.csv";
pub const CALIBRATION_FILE: &str = "calibration.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const TREE_8CASE_FILE: &str = "tree_8case.txt";
pub const SUMMARY_FILE: &str = "summary.md";
pub const CASE_STATS_FILE: &str = "case_stats.csv";
pub const CLUSTERS_FILE: &str = "clusters.csv";
pub const IMPORTANCE_FILE: &str = "importance.csv";

pub fn tree_diff_file(stem: &str) -> String {
    format!("tree_diff_{stem}.txt")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionReport {
    pub pair: Option<(Scorer, Scorer)>,
    pub rows: Vec<PartitionRow>,
}

/// Everything a report directory can hold. Absent parts are skipped both
/// in the files written and in the summary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub partition: Option<PartitionReport>,
    pub calibration: Vec<CalibrationCurve>,
    /// Full-population metrics of each scorer (`scores.csv`).
    pub scorer_metrics: Vec<MetricRow>,
    pub results: Option<ResultTable>,
    /// `(file name, contents)` of tree exports and other text artifacts.
    pub artifacts: Vec<(String, String)>,
}

fn write(dir: &Path, name: &str, body: &str, written: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(())
}

/// Writes every present part of the report plus `summary.md` into `dir`,
/// creating it if needed. Returns the paths written, in order.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    if let Some(t) = &report.results {
        write(dir, METRICS_FILE, &t.metrics_csv(), &mut written)?;
        write(dir, METRICS_STD_FILE, &t.metrics_std_csv(), &mut written)?;
        write(dir, METRICS_SPLITS_FILE, &t.metrics_splits_csv(), &mut written)?;
        write(
            dir,
            RESULTS_FILE,
            &(serde_json::to_string_pretty(t)? + "\n"),
            &mut written,
        )?;
    }
    if let Some(p) = &report.partition {
        write(dir, PARTITION_FILE, &partition_csv(&p.rows), &mut written)?;
    }
    if !report.calibration.is_empty() {
        write(
            dir,
            CALIBRATION_FILE,
            &calibration_csv(&report.calibration),
            &mut written,
        )?;
    }
    if !report.scorer_metrics.is_empty() {
        write(dir, SCORES_FILE, &rows_csv(&report.scorer_metrics), &mut written)?;
    }
    for (name, body) in &report.artifacts {
        write(dir, name, body, &mut written)?;
    }
    write(dir, SUMMARY_FILE, &summary_markdown(report), &mut written)?;
    Ok(written)
}

fn read_optional(path: &Path) -> Result<Option<String>, HarnessError> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}

fn malformed(path: &Path) -> HarnessError {
    HarnessError::Malformed(path.display().to_string())
}

/// Reads back the CSV and JSON parts of a results directory.
pub fn load_report(dir: &Path) -> Result<Report, HarnessError> {
    if !dir.is_dir() {
        return Err(HarnessError::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        });
    }
    let mut report = Report::default();
    let path = dir.join(RESULTS_FILE);
    if let Some(text) = read_optional(&path)? {
        report.results = Some(serde_json::from_str(&text)?);
    }
    let path = dir.join(PARTITION_FILE);
    if let Some(text) = read_optional(&path)? {
        report.partition = Some(PartitionReport {
            pair: report.results.as_ref().map(|r| r.scorer_pair.clone()),
            rows: parse_partition_csv(&text).ok_or_else(|| malformed(&path))?,
        });
    }
    let path = dir.join(CALIBRATION_FILE);
    if let Some(text) = read_optional(&path)? {
        report.calibration = parse_calibration_csv(&text).ok_or_else(|| malformed(&path))?;
    }
    let path = dir.join(SCORES_FILE);
    if let Some(text) = read_optional(&path)? {
        report.scorer_metrics = text
            .lines()
            .skip(1)
            .filter(|l| !l.is_empty())
            .map(MetricRow::parse_csv_line)
            .collect::<Option<_>>()
            .ok_or_else(|| malformed(&path))?;
    }
    for name in artifact_files() {
        if let Some(body) = read_optional(&dir.join(&name))? {
            report.artifacts.push((name, body));
        }
    }
    Ok(report)
}

/// Text artifacts a results directory may hold, in summary order.
pub fn artifact_files() -> Vec<String> {
    let mut names = vec![TREE_8CASE_FILE.to_string()];
    names.extend(DIFFERENCE_TREES.iter().map(|(stem, _, _)| tree_diff_file(stem)));
    names.extend([CASE_STATS_FILE, CLUSTERS_FILE, IMPORTANCE_FILE].map(String::from));
    names
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn dash(v: Option<f64>) -> String {
    match v {
        Some(_) => format_cell(v),
        None => "-".into(),
    }
}

fn mean_std(m: Option<f64>, s: Option<f64>) -> String {
    match (m, s) {
        (Some(_), Some(_)) => format!("{} ± {}", format_cell(m), format_cell(s)),
        (Some(_), None) => format_cell(m),
        _ => "-".into(),
    }
}

fn table_header(out: &mut String, cols: &[&str]) {
    let _ = writeln!(out, "| {} |", cols.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(cols.len()));
}

fn partition_section(out: &mut String, p: &PartitionReport) {
    let title = match &p.pair {
        Some((m, h)) => format!("## Agreement partition ({m} vs {h})"),
        None => "## Agreement partition".into(),
    };
    let _ = writeln!(out, "{title}\n");
    let cases: Vec<CaseLabel> = p.rows.iter().map(|r| r.case).collect();
    let Ok(summary) = summarize_partition(&cases) else {
        out.push_str("No defendants.\n\n");
        return;
    };
    table_header(
        out,
        &[
            "Case",
            "Machine",
            "Human",
            "Recidivated",
            "Group",
            "Defendants",
            "Share",
        ],
    );
    let hl = |b: bool| if b { "high" } else { "low" };
    for c in CaseLabel::all() {
        let (m, h, r) = c.outcome();
        let _ = writeln!(
            out,
            "| {c} | {} | {} | {} | {} | {} | {} |",
            hl(m),
            hl(h),
            if r { "yes" } else { "no" },
            c.group().as_str(),
            summary.counts[&c.id()],
            pct(summary.case_share(c.id()))
        );
    }
    out.push('\n');
    table_header(out, &["Group", "Cases", "Share"]);
    for g in CaseGroup::ALL {
        let [a, b] = g.cases();
        let _ = writeln!(out, "| {} | {a}, {b} | {} |", g.as_str(), pct(summary.share(g)));
    }
    let d = summary.disagreement_count();
    let _ = writeln!(
        out,
        "\nDisagreement subset: {d} of {} defendants ({}).\n",
        summary.n,
        pct(d as f64 / summary.n as f64)
    );
}

fn ordered_groups(rows: &[MetricRow]) -> Vec<String> {
    let others: BTreeSet<&str> = rows.iter().map(|r| r.group.as_str()).filter(|g| *g != ALL).collect();
    std::iter::once(ALL).chain(others).map(String::from).collect()
}

fn scorer_sections(out: &mut String, rows: &[MetricRow]) {
    let groups = ordered_groups(rows);
    let scorers: Vec<&str> = rows.iter().fold(Vec::new(), |mut acc, r| {
        if !acc.contains(&r.model.as_str()) {
            acc.push(r.model.as_str());
        }
        acc
    });
    let find = |s: &str, g: &str, sl: &str| rows.iter().find(|r| r.model == s && r.group == g && r.slice == sl);
    let mut cols = vec!["Scorer", "Metric"];
    cols.extend(groups.iter().map(String::as_str));

    out.push_str("## Scorers on all defendants\n\n");
    table_header(out, &cols);
    for s in &scorers {
        for (label, k) in [("Accuracy", 2), ("AUC", 0)] {
            let cells: Vec<String> = groups
                .iter()
                .map(|g| dash(find(s, g, ALL).and_then(|r| r.values[k])))
                .collect();
            let _ = writeln!(out, "| {s} | {label} | {} |", cells.join(" | "));
        }
    }
    out.push('\n');

    out.push_str("## Accuracy by recidivism status\n\n");
    let mut cols = vec!["Scorer", "Slice"];
    cols.extend(groups.iter().map(String::as_str));
    table_header(out, &cols);
    for s in &scorers {
        for (label, slice) in [
            ("Do recidivate", SLICE_RECIDIVATED),
            ("Do not recidivate", SLICE_NOT_RECIDIVATED),
        ] {
            let cells: Vec<String> = groups
                .iter()
                .map(|g| dash(find(s, g, slice).and_then(|r| r.values[2])))
                .collect();
            let _ = writeln!(out, "| {s} | {label} | {} |", cells.join(" | "));
        }
    }
    out.push('\n');
}

fn calibration_section(out: &mut String, curves: &[CalibrationCurve]) {
    out.push_str("## Calibration sweep\n\n");
    table_header(out, &["Scorer", "Cutoff", "Accuracy", "FPR", "FNR"]);
    for c in curves {
        for p in &c.points {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                c.scorer,
                p.cutoff,
                format_cell(Some(p.accuracy)),
                dash(p.fpr),
                dash(p.fnr)
            );
        }
    }
    out.push('\n');
}

fn model_section(out: &mut String, t: &ResultTable) {
    let (m, h) = &t.scorer_pair;
    let population = match t.population {
        super::Population::All => "all defendants".to_string(),
        super::Population::DisagreementOnly => format!("defendants where {m} and {h} disagree"),
    };
    let _ = writeln!(
        out,
        "## Models on {population}\n\n{} rows, {} train/test splits; mean ± sample std over splits.\n",
        t.n_rows, t.n_splits
    );
    table_header(
        out,
        &[
            "Type", "Model", "AUC", "Bal Acc", "FPR", "FNR", "FDR", "FOR", "Accuracy",
        ],
    );
    for r in t.rows.iter().filter(|r| r.group == ALL && r.slice == ALL) {
        let (mean, std) = (r.mean(), r.std());
        let cells: Vec<String> = [0, 1, 3, 4, 5, 6, 2]
            .iter()
            .map(|&k| mean_std(mean[k], std[k]))
            .collect();
        let _ = writeln!(out, "| {} | {} | {} |", r.model_type, r.model, cells.join(" | "));
    }
    out.push('\n');

    let groups: BTreeSet<&str> = t.rows.iter().map(|r| r.group.as_str()).filter(|g| *g != ALL).collect();
    if !groups.is_empty() {
        out.push_str("### AUC by subgroup\n\n");
        let mut cols = vec!["Model", ALL];
        cols.extend(groups.iter().copied());
        table_header(out, &cols);
        for (model, _) in t.models() {
            let cells: Vec<String> = std::iter::once(ALL)
                .chain(groups.iter().copied())
                .map(|g| {
                    t.row(model, g, ALL)
                        .map_or("-".into(), |r| mean_std(r.mean()[0], r.std()[0]))
                })
                .collect();
            let _ = writeln!(out, "| {model} | {} |", cells.join(" | "));
        }
        out.push('\n');
    }

    let violations = t.dominance_violations();
    if !violations.is_empty() || !t.notes.is_empty() {
        out.push_str("### Notes\n\n");
        for v in violations {
            let _ = writeln!(out, "- oracle bound: {v}");
        }
        for n in &t.notes {
            let _ = writeln!(out, "- {n}");
        }
        out.push('\n');
    }
}

/// Markdown summary: partition, scorer tables, calibration sweep and the
/// model table, each only when its data is present.
pub fn summary_markdown(report: &Report) -> String {
    let mut out = String::from("# Human and machine risk scores\n\n");
    if let Some(p) = &report.partition {
        partition_section(&mut out, p);
    }
    if !report.scorer_metrics.is_empty() {
        scorer_sections(&mut out, &report.scorer_metrics);
    }
    if !report.calibration.is_empty() {
        calibration_section(&mut out, &report.calibration);
    }
    if let Some(t) = &report.results {
        model_section(&mut out, t);
    }
    if !report.artifacts.is_empty() {
        out.push_str("## Artifacts\n\n");
        for (name, _) in &report.artifacts {
            let _ = writeln!(out, "- `{name}`");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::assign_case;

    fn rows() -> Vec<PartitionRow> {
        (0..8u64)
            .map(|i| {
                let (m, h, r) = (i & 1 == 1, i & 2 == 2, i & 4 == 4);
                PartitionRow {
                    defendant_id: i + 1,
                    machine_binary: m,
                    human_binary: h,
                    recidivated: r,
                    case: assign_case(m, h, r),
                }
            })
            .collect()
    }

    #[test]
    fn partition_only_summary() {
        let report = Report {
            partition: Some(PartitionReport {
                pair: Some((Scorer::Compas, Scorer::Hnr)),
                rows: rows(),
            }),
            ..Default::default()
        };
        let md = summary_markdown(&report);
        assert!(md.contains("## Agreement partition (C vs HNR)"));
        assert!(md.contains("Disagreement subset: 4 of 8 defendants (50.0%)."));
        assert!(!md.contains("## Models"));
    }

    #[test]
    fn emit_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let report = Report {
            partition: Some(PartitionReport {
                pair: None,
                rows: rows(),
            }),
            artifacts: vec![(TREE_8CASE_FILE.into(), "leaf\n".into())],
            ..Default::default()
        };
        let written = emit_report(&report, dir.path()).unwrap();
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, [PARTITION_FILE, TREE_8CASE_FILE, SUMMARY_FILE]);
        let back = load_report(dir.path()).unwrap();
        assert_eq!(back.partition.unwrap().rows, rows());
        assert_eq!(back.artifacts, report.artifacts);
        assert!(matches!(
            load_report(&dir.path().join("missing")),
            Err(HarnessError::Io { .. })
        ));
    }
}
