//! Experiment-plan execution and aggregation.
//!
//! One experiment unit is `(model, angle_index, experiment_index)` and owns
//! the stream derived from that label. Units run on the current rayon pool
//! and are reduced in a fixed order, so results do not depend on the worker
//! count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelKind, PairSimulator, PreparedModel};
use crate::physics::ExperimentConfig;
use crate::randomness::{derive_stream, RandomStream, PRNG_ALGORITHM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub model: ModelKind,
    pub angle_index: usize,
    pub experiment_index: usize,
    pub pairs: u64,
    pub coincidences: u64,
    /// Photon-1 transmissions.
    pub singles1: u64,
}

impl ExperimentResult {
    pub fn raw_ratio(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.coincidences as f64 / self.pairs as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleStats {
    pub angle: f64,
    /// `F2` times the mean per-experiment coincidence fraction.
    pub ratio_mean: f64,
    /// Standard error of `ratio_mean`; absent for a single experiment.
    pub ratio_se: Option<f64>,
    pub experiments: u64,
    pub total_pairs: u64,
    pub total_coincidences: u64,
    pub total_singles1: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub model: ModelKind,
    pub config: ExperimentConfig,
    /// Coefficient applied to every per-experiment ratio.
    pub f2: f64,
    pub per_angle: Vec<AngleStats>,
    /// Per-experiment results, ordered by angle then experiment index.
    pub results: Vec<ExperimentResult>,
    pub rng_algorithm: String,
    pub master_seed: u64,
}

impl BatchResult {
    pub fn single_experiment(&self) -> bool {
        self.config.experiments < 2
    }

    /// The same batch with a different `F2`, recomputed from the stored
    /// per-experiment counts.
    pub fn with_f2(&self, f2: f64) -> Result<BatchResult> {
        let mut cfg = self.config.clone();
        cfg.f2 = Some(f2);
        let per_angle = summarize(&self.results, &cfg)?;
        Ok(BatchResult {
            config: cfg,
            f2,
            per_angle,
            ..self.clone()
        })
    }

    /// Per-experiment ratio lists (F2 applied), one per angle.
    pub fn ratios_by_angle(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); self.config.angles.len()];
        for r in &self.results {
            out[r.angle_index].push(self.f2 * r.raw_ratio());
        }
        out
    }

    pub fn means(&self) -> Vec<f64> {
        self.per_angle.iter().map(|a| a.ratio_mean).collect()
    }
}

/// Count coincidences for `pairs` pairs on one stream.
pub fn simulate_experiment<S: PairSimulator>(
    simulator: &S,
    stream: &mut RandomStream,
    pairs: u64,
) -> (u64, u64) {
    let mut coincidences = 0u64;
    let mut singles1 = 0u64;
    for _ in 0..pairs {
        let (p1, p2) = simulator.transmissions(stream);
        singles1 += p1 as u64;
        coincidences += (p1 && p2) as u64;
    }
    (coincidences, singles1)
}

pub fn run_experiment(
    model: ModelKind,
    angle_index: usize,
    experiment_index: usize,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult> {
    cfg.validate_physics()?;
    let phi = *cfg.angles.get(angle_index).ok_or_else(|| {
        Error::Contract(format!(
            "angle index {angle_index} outside a {}-angle plan",
            cfg.angles.len()
        ))
    })?;
    let prepared = PreparedModel::new(model, phi, cfg)?;
    Ok(run_prepared(&prepared, angle_index, experiment_index, cfg))
}

fn run_prepared(
    prepared: &PreparedModel,
    angle_index: usize,
    experiment_index: usize,
    cfg: &ExperimentConfig,
) -> ExperimentResult {
    let model = prepared.kind();
    let mut stream = derive_stream(cfg.master_seed, model.domain(), angle_index, experiment_index);
    let (coincidences, singles1) =
        simulate_experiment(prepared, &mut stream, cfg.pairs_per_experiment);
    ExperimentResult {
        model,
        angle_index,
        experiment_index,
        pairs: cfg.pairs_per_experiment,
        coincidences,
        singles1,
    }
}

/// Run every `(angle, experiment)` unit of the plan on the current rayon
/// pool. Requires `cfg.f2`; use `Some(1.0)` for raw fractions.
pub fn run_batch(model: ModelKind, cfg: &ExperimentConfig) -> Result<BatchResult> {
    cfg.validate()?;
    model.validate()?;
    let f2 = cfg
        .f2
        .ok_or_else(|| Error::validation(&["f2"], "f2 must be set (1.0 for raw fractions)"))?;
    let prepared = cfg
        .angles
        .iter()
        .map(|&phi| PreparedModel::new(model, phi, cfg))
        .collect::<Result<Vec<_>>>()?;
    let experiments = cfg.experiments as usize;
    let units = prepared.len() * experiments;
    let results: Vec<ExperimentResult> = (0..units)
        .into_par_iter()
        .map(|unit| {
            let angle_index = unit / experiments;
            let experiment_index = unit % experiments;
            run_prepared(&prepared[angle_index], angle_index, experiment_index, cfg)
        })
        .collect();
    let per_angle = summarize(&results, cfg)?;
    Ok(BatchResult {
        model,
        config: cfg.clone(),
        f2,
        per_angle,
        results,
        rng_algorithm: PRNG_ALGORITHM.to_string(),
        master_seed: cfg.master_seed,
    })
}

/// Mean and standard error of the per-experiment ratios at each angle.
/// `cfg.f2` scales the ratios; raw fractions when it is absent.
pub fn summarize(results: &[ExperimentResult], cfg: &ExperimentConfig) -> Result<Vec<AngleStats>> {
    let f2 = cfg.f2.unwrap_or(1.0);
    if let Some(first) = results.first() {
        if let Some(other) = results.iter().find(|r| r.model != first.model) {
            return Err(Error::Contract(format!(
                "mixed models in one summary: {} and {}",
                first.model, other.model
            )));
        }
    }
    let mut grouped: Vec<Vec<&ExperimentResult>> = vec![Vec::new(); cfg.angles.len()];
    for r in results {
        grouped
            .get_mut(r.angle_index)
            .ok_or_else(|| Error::Contract(format!("angle index {} outside plan", r.angle_index)))?
            .push(r);
    }
    grouped
        .into_iter()
        .zip(&cfg.angles)
        .map(|(mut group, &angle)| {
            group.sort_by_key(|r| r.experiment_index);
            let ratios: Vec<f64> = group.iter().map(|r| f2 * r.raw_ratio()).collect();
            let (ratio_mean, ratio_se) = mean_and_se(&ratios);
            Ok(AngleStats {
                angle,
                ratio_mean,
                ratio_se,
                experiments: group.len() as u64,
                total_pairs: group.iter().map(|r| r.pairs).sum(),
                total_coincidences: group.iter().map(|r| r.coincidences).sum(),
                total_singles1: group.iter().map(|r| r.singles1).sum(),
            })
        })
        .collect()
}

/// Sample mean and `sd / sqrt(n)` with the `n - 1` variance; the error is
/// `None` below two samples.
pub fn mean_and_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (0.0, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    (mean, Some(sd / (n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{collapse_expected_ratio, AnalyzerEfficiencies};
    use std::f64::consts::FRAC_PI_2;

    fn result(exp: usize, coincidences: u64, pairs: u64) -> ExperimentResult {
        ExperimentResult {
            model: ModelKind::Collapse,
            angle_index: 0,
            experiment_index: exp,
            pairs,
            coincidences,
            singles1: coincidences,
        }
    }

    fn one_angle_cfg() -> ExperimentConfig {
        ExperimentConfig {
            angles: vec![0.0],
            f2: Some(1.0),
            ..Default::default()
        }
    }

    #[test]
    fn empty_run_has_no_coincidences() {
        let cfg = ExperimentConfig {
            pairs_per_experiment: 0,
            ..Default::default()
        };
        for model in [
            ModelKind::Collapse,
            ModelKind::LocalRealistic,
            ModelKind::Smeared { sigma: 0.2 },
        ] {
            let r = run_experiment(model, 0, 0, &cfg).unwrap();
            assert_eq!(r.coincidences, 0);
            assert_eq!(r.pairs, 0);
        }
    }

    #[test]
    fn transparent_analyzers_are_rejected() {
        let cfg = ExperimentConfig {
            analyzer1: AnalyzerEfficiencies { e_par: 1.0, e_perp: 1.0 },
            analyzer2: AnalyzerEfficiencies { e_par: 1.0, e_perp: 1.0 },
            f2: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(
            run_experiment(ModelKind::Collapse, 0, 0, &cfg),
            Err(Error::Validation { .. })
        ));
        assert!(run_batch(ModelKind::Collapse, &cfg).is_err());
    }

    #[test]
    fn collapse_concentrates_on_oracle() {
        let cfg = ExperimentConfig::default();
        let r = run_experiment(ModelKind::Collapse, 8, 0, &cfg).unwrap();
        let c = collapse_expected_ratio(FRAC_PI_2, &cfg);
        let n = r.pairs as f64;
        assert!((r.raw_ratio() - c).abs() < 5.0 * (c * (1.0 - c) / n).sqrt());
    }

    #[test]
    fn bad_angle_index() {
        let cfg = ExperimentConfig::default();
        assert!(matches!(
            run_experiment(ModelKind::Collapse, 9, 0, &cfg),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn summarize_identical_experiments() {
        let cfg = one_angle_cfg();
        let results: Vec<_> = (0..5).map(|e| result(e, 40, 100)).collect();
        let stats = summarize(&results, &cfg).unwrap();
        assert_eq!(stats[0].ratio_se, Some(0.0));
        assert_eq!(stats[0].ratio_mean, 0.4);
    }

    #[test]
    fn summarize_two_experiments() {
        let cfg = one_angle_cfg();
        let results = vec![result(0, 30, 100), result(1, 50, 100)];
        let stats = summarize(&results, &cfg).unwrap();
        let (r1, r2) = (0.3, 0.5);
        assert!((stats[0].ratio_mean - (r1 + r2) / 2.0).abs() < 1e-15);
        assert!((stats[0].ratio_se.unwrap() - (r1 - r2).abs() / 2.0).abs() < 1e-15);
        assert_eq!(stats[0].total_pairs, 200);
        assert_eq!(stats[0].total_coincidences, 80);
    }

    #[test]
    fn summarize_single_experiment_has_no_se() {
        let cfg = one_angle_cfg();
        let stats = summarize(&[result(0, 30, 100)], &cfg).unwrap();
        assert_eq!(stats[0].ratio_se, None);
    }

    #[test]
    fn summarize_rejects_mixed_models() {
        let cfg = one_angle_cfg();
        let mut other = result(1, 30, 100);
        other.model = ModelKind::LocalRealistic;
        assert!(matches!(
            summarize(&[result(0, 30, 100), other], &cfg),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn batch_requires_f2() {
        let cfg = ExperimentConfig {
            experiments: 1,
            pairs_per_experiment: 10,
            ..Default::default()
        };
        assert!(run_batch(ModelKind::Collapse, &cfg).is_err());
    }

    #[test]
    fn single_experiment_batch_is_flagged() {
        let cfg = ExperimentConfig {
            experiments: 1,
            pairs_per_experiment: 100,
            f2: Some(1.0),
            ..Default::default()
        };
        let b = run_batch(ModelKind::Collapse, &cfg).unwrap();
        assert!(b.single_experiment());
        assert!(b.per_angle.iter().all(|a| a.ratio_se.is_none()));
    }

    #[test]
    fn with_f2_matches_fresh_run() {
        let cfg = ExperimentConfig {
            experiments: 4,
            pairs_per_experiment: 500,
            f2: Some(1.0),
            ..Default::default()
        };
        let raw = run_batch(ModelKind::Collapse, &cfg).unwrap();
        let scaled = raw.with_f2(0.92).unwrap();
        let fresh = run_batch(
            ModelKind::Collapse,
            &ExperimentConfig { f2: Some(0.92), ..cfg },
        )
        .unwrap();
        assert_eq!(scaled, fresh);
    }

    #[test]
    fn mean_and_se_small_inputs() {
        assert_eq!(mean_and_se(&[]), (0.0, None));
        assert_eq!(mean_and_se(&[2.0]), (2.0, None));
    }
}
