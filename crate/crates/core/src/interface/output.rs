//! CSV results, per-experiment counts and the run manifest.
//!
//! Floats are written with Rust's shortest round-trip `{:e}` formatting, so
//! reading a file back yields bit-identical values. Absent values are empty
//! cells.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interface::config::ConfigDocument;
use crate::models::ModelKind;
use crate::physics::{classical_coincidence_ratio, qm_coincidence_ratio, ExperimentConfig};
use crate::randomness::PRNG_ALGORITHM;
use crate::runner::{summarize, BatchResult, ExperimentResult};

pub const RESULT_COLUMNS: &[&str] = &[
    "model",
    "angle_rad",
    "pairs_total",
    "coincidences_total",
    "ratio_mean",
    "ratio_se",
    "qm_prediction",
    "classical_prediction",
    "deviation_pct",
    "z_score",
];

pub const EXPERIMENT_COLUMNS: &[&str] = &[
    "model",
    "sigma",
    "f2",
    "angle_index",
    "experiment_index",
    "pairs",
    "coincidences",
    "singles1",
];

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const RESULTS_FILE: &str = "results.csv";
pub const EXPERIMENTS_FILE: &str = "experiments.csv";

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub angle_rad: f64,
    pub pairs_total: u64,
    pub coincidences_total: u64,
    pub ratio_mean: f64,
    pub ratio_se: Option<f64>,
    pub qm_prediction: f64,
    pub classical_prediction: f64,
    /// Against the classical curve for the local-realistic model, the
    /// quantum curve otherwise.
    pub deviation_pct: Option<f64>,
    pub z_score: Option<f64>,
}

/// The curve a model's deviations are measured against.
pub fn reference_curve(model: &ModelKind, phi: f64, cfg: &ExperimentConfig) -> f64 {
    match model {
        ModelKind::LocalRealistic => classical_coincidence_ratio(phi, cfg),
        _ => qm_coincidence_ratio(phi, cfg),
    }
}

pub fn result_rows(batch: &BatchResult) -> Vec<ResultRow> {
    let cfg = &batch.config;
    batch
        .per_angle
        .iter()
        .map(|s| {
            let reference = reference_curve(&batch.model, s.angle, cfg);
            let diff = s.ratio_mean - reference;
            ResultRow {
                model: batch.model.name().to_string(),
                angle_rad: s.angle,
                pairs_total: s.total_pairs,
                coincidences_total: s.total_coincidences,
                ratio_mean: s.ratio_mean,
                ratio_se: s.ratio_se,
                qm_prediction: qm_coincidence_ratio(s.angle, cfg),
                classical_prediction: classical_coincidence_ratio(s.angle, cfg),
                deviation_pct: (reference != 0.0).then(|| 100.0 * diff / reference),
                z_score: s.ratio_se.filter(|se| *se > 0.0).map(|se| diff / se),
            }
        })
        .collect()
}

fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_csv(
        path,
        RESULT_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.model.clone(),
                fmt_f64(r.angle_rad),
                r.pairs_total.to_string(),
                r.coincidences_total.to_string(),
                fmt_f64(r.ratio_mean),
                fmt_opt(r.ratio_se),
                fmt_f64(r.qm_prediction),
                fmt_f64(r.classical_prediction),
                fmt_opt(r.deviation_pct),
                fmt_opt(r.z_score),
            ]
        }),
    )
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    read_csv(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub model: ExperimentModel,
    pub sigma: Option<f64>,
    pub f2: f64,
    pub angle_index: usize,
    pub experiment_index: usize,
    pub pairs: u64,
    pub coincidences: u64,
    pub singles1: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentModel {
    Collapse,
    LocalRealistic,
    Smeared,
}

impl ExperimentRow {
    pub fn model_kind(&self) -> Result<ModelKind> {
        match self.model {
            ExperimentModel::Collapse => Ok(ModelKind::Collapse),
            ExperimentModel::LocalRealistic => Ok(ModelKind::LocalRealistic),
            ExperimentModel::Smeared => ModelKind::parse("smeared", self.sigma),
        }
    }

    fn result(&self) -> Result<ExperimentResult> {
        Ok(ExperimentResult {
            model: self.model_kind()?,
            angle_index: self.angle_index,
            experiment_index: self.experiment_index,
            pairs: self.pairs,
            coincidences: self.coincidences,
            singles1: self.singles1,
        })
    }
}

pub fn experiment_rows(batch: &BatchResult) -> Vec<ExperimentRow> {
    let model = match batch.model {
        ModelKind::Collapse => ExperimentModel::Collapse,
        ModelKind::LocalRealistic => ExperimentModel::LocalRealistic,
        ModelKind::Smeared { .. } => ExperimentModel::Smeared,
    };
    batch
        .results
        .iter()
        .map(|r| ExperimentRow {
            model,
            sigma: batch.model.sigma(),
            f2: batch.f2,
            angle_index: r.angle_index,
            experiment_index: r.experiment_index,
            pairs: r.pairs,
            coincidences: r.coincidences,
            singles1: r.singles1,
        })
        .collect()
}

pub fn write_experiments(path: &Path, rows: &[ExperimentRow]) -> Result<()> {
    write_csv(
        path,
        EXPERIMENT_COLUMNS,
        rows.iter().map(|r| {
            let model = match r.model {
                ExperimentModel::Collapse => "collapse",
                ExperimentModel::LocalRealistic => "local-realistic",
                ExperimentModel::Smeared => "smeared",
            };
            vec![
                model.to_string(),
                fmt_opt(r.sigma),
                fmt_f64(r.f2),
                r.angle_index.to_string(),
                r.experiment_index.to_string(),
                r.pairs.to_string(),
                r.coincidences.to_string(),
                r.singles1.to_string(),
            ]
        }),
    )
}

pub fn read_experiments(path: &Path) -> Result<Vec<ExperimentRow>> {
    read_csv(path)
}

/// Rebuild batches from stored per-experiment counts, one per model in
/// first-seen order.
pub fn batches_from_experiments(rows: &[ExperimentRow], cfg: &ExperimentConfig) -> Result<Vec<BatchResult>> {
    let mut groups: Vec<(ModelKind, f64, Vec<ExperimentResult>)> = Vec::new();
    for row in rows {
        let kind = row.model_kind()?;
        match groups.iter_mut().find(|g| g.0 == kind) {
            Some(g) => {
                if g.1 != row.f2 {
                    return Err(Error::Parse(format!("{kind} rows disagree on f2")));
                }
                g.2.push(row.result()?);
            }
            None => groups.push((kind, row.f2, vec![row.result()?])),
        }
    }
    groups
        .into_iter()
        .map(|(model, f2, results)| {
            let mut c = cfg.clone();
            c.f2 = Some(f2);
            c.experiments = results.iter().map(|r| r.experiment_index as u64 + 1).max().unwrap_or(0);
            if let Some(r) = results.first() {
                c.pairs_per_experiment = r.pairs;
            }
            if let ModelKind::Smeared { sigma } = model {
                c.sigma = Some(sigma);
            }
            let per_angle = summarize(&results, &c)?;
            Ok(BatchResult {
                model,
                master_seed: c.master_seed,
                config: c,
                f2,
                per_angle,
                results,
                rng_algorithm: PRNG_ALGORITHM.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub prng_algorithm: String,
    pub master_seed: u64,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub config: ConfigDocument,
    /// Arguments that regenerate every output, program name first.
    pub reproduce: Vec<String>,
    pub outputs: Vec<OutputRecord>,
    pub notes: Vec<String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, started_unix_s: u64) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            prng_algorithm: PRNG_ALGORITHM.to_string(),
            master_seed: cfg.master_seed,
            started_unix_s,
            finished_unix_s: started_unix_s,
            config: ConfigDocument::from_config(cfg),
            reproduce: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn add_output(&mut self, path: &Path, description: &str) {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.outputs.push(OutputRecord {
            path: name,
            description: description.to_string(),
        });
    }
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir.to_path_buf())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
