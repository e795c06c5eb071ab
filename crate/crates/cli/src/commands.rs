//! Subcommand implementations. Each returns the text for stdout.

use std::path::{Path, PathBuf};

use hybridj::dataset::{generate_synthetic, load_dir, write_dataset, Dataset, SynthConfig};
use hybridj::harness::characterize::{DIFFERENCE_DEPTH, EIGHT_CASE_DEPTH};
use hybridj::harness::report::{tree_diff_file, CASE_STATS_FILE, CLUSTERS_FILE, IMPORTANCE_FILE, TREE_8CASE_FILE};
use hybridj::harness::{
    characterize_partition, emit_report, importance_csv, load_report, run_experiment, score_difference_trees,
    score_importance, scorer_metrics, summary_markdown, CharacterizeParams, ExperimentConfig, PartitionReport, Report,
};
use hybridj::learners::AdditiveParams;
use hybridj::partition::partition_rows;
use hybridj::scoring::{calibration_csv, calibration_sweep, scores_for, CalibrationCurve, Scorer};
use serde::de::DeserializeOwned;

use crate::error::CliError;

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|e| CliError::io(path, e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn synth(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<String, CliError> {
    let mut cfg: SynthConfig = match config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let ds = generate_synthetic(&cfg)?;
    write_dataset(&ds, out)?;
    Ok(format!(
        "wrote {} defendants and {} predictions to {}\n",
        ds.len(),
        ds.predictions().len(),
        out.display()
    ))
}

/// Sweeps of every scorer the dataset supports, in C, HNR, HWR order.
fn calibration_curves(ds: &Dataset) -> Result<Vec<CalibrationCurve>, CliError> {
    let labels = ds.labels();
    let mut curves = Vec::new();
    for s in Scorer::HUMAN_AND_MACHINE {
        match scores_for(ds, &s) {
            Ok(scores) => curves.push(calibration_sweep(&scores, &labels)?),
            Err(e) => log::warn!("calibration: skipping {s}: {e}"),
        }
    }
    Ok(curves)
}

pub fn calibrate(data: &Path, out: Option<&Path>) -> Result<String, CliError> {
    let ds = load_dir(data)?;
    let csv = calibration_csv(&calibration_curves(&ds)?);
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join(hybridj::harness::report::CALIBRATION_FILE), &csv)?;
    }
    Ok(csv)
}

fn partition_report(ds: &Dataset, pair: &(Scorer, Scorer)) -> Result<PartitionReport, CliError> {
    let rows = partition_rows(ds, &scores_for(ds, &pair.0)?, &scores_for(ds, &pair.1)?)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(PartitionReport {
        pair: Some(pair.clone()),
        rows,
    })
}

pub fn partition(data: &Path, pair: &(Scorer, Scorer), out: Option<&Path>) -> Result<String, CliError> {
    let ds = load_dir(data)?;
    let report = Report {
        partition: Some(partition_report(&ds, pair)?),
        ..Default::default()
    };
    if let Some(dir) = out {
        emit_report(&report, dir)?;
    }
    Ok(summary_markdown(&report))
}

pub struct CharacterizeOptions {
    pub pair: (Scorer, Scorer),
    pub seed: u64,
    pub cluster: bool,
    pub charge_top_k: usize,
}

/// Eight-case tree, per-case stats and clusters, difference trees and
/// importances as `(file name, body)`. Parts needing an absent scorer are
/// skipped with a warning.
fn characterize_artifacts(ds: &Dataset, opts: &CharacterizeOptions) -> Result<Vec<(String, String)>, CliError> {
    let params = CharacterizeParams {
        max_depth: EIGHT_CASE_DEPTH,
        bandwidth: None,
        seed: opts.seed,
        charge_top_k: opts.charge_top_k,
        cluster: opts.cluster,
    };
    let c = characterize_partition(ds, (&opts.pair.0, &opts.pair.1), &params)?;
    for note in &c.notes {
        log::info!("characterize: {note}");
    }
    let mut out = vec![(TREE_8CASE_FILE.to_string(), c.tree_text())];
    match score_difference_trees(ds, DIFFERENCE_DEPTH, opts.charge_top_k) {
        Ok(trees) => {
            for (stem, tree) in trees {
                out.push((tree_diff_file(&stem), tree.to_text()));
            }
        }
        Err(e) => log::warn!("difference trees skipped: {e}"),
    }
    out.push((CASE_STATS_FILE.into(), c.case_stats_csv()));
    if opts.cluster {
        out.push((CLUSTERS_FILE.into(), c.clusters_csv()));
    }
    match score_importance(ds, &AdditiveParams::default(), opts.charge_top_k) {
        Ok(models) => out.push((IMPORTANCE_FILE.into(), importance_csv(&models))),
        Err(e) => log::warn!("importance skipped: {e}"),
    }
    Ok(out)
}

pub fn characterize(data: &Path, opts: &CharacterizeOptions, out: Option<&Path>) -> Result<String, CliError> {
    let ds = load_dir(data)?;
    let artifacts = characterize_artifacts(&ds, opts)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        for (name, body) in &artifacts {
            write_file(&dir.join(name), body)?;
        }
    }
    let mut text = String::new();
    for (name, body) in &artifacts {
        text.push_str(&format!("== {name}\n{body}\n"));
    }
    Ok(text)
}

pub fn run(data: &Path, experiment: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<String, CliError> {
    let mut cfg: ExperimentConfig = read_json(experiment)?;
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    cfg.validate()?;
    let dir: PathBuf = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Validation("no output directory: pass --out or set output_dir".into()))?;
    let ds = load_dir(data)?;
    log::info!("running {} models over {} splits", cfg.models.len(), cfg.n_splits);
    let table = run_experiment(&ds, &cfg)?;
    let opts = CharacterizeOptions {
        pair: cfg.scorer_pair.clone(),
        seed: cfg.base_seed,
        cluster: true,
        charge_top_k: cfg.charge_top_k,
    };
    let report = Report {
        partition: Some(partition_report(&ds, &cfg.scorer_pair)?),
        calibration: calibration_curves(&ds)?,
        scorer_metrics: scorer_metrics(&ds, &cfg.subgroups)?,
        results: Some(table),
        artifacts: characterize_artifacts(&ds, &opts)?,
    };
    let written = emit_report(&report, &dir)?;
    let mut text = String::new();
    for p in written {
        text.push_str(&format!("wrote {}\n", p.display()));
    }
    Ok(text)
}

pub fn report(results: &Path) -> Result<String, CliError> {
    let report = load_report(results)?;
    let md = summary_markdown(&report);
    write_file(&results.join(hybridj::harness::report::SUMMARY_FILE), &md)?;
    Ok(md)
}
