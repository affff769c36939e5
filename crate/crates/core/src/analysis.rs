use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::ExperimentConfig;
use crate::runner::BatchResult;

/// Angles at or below this bound form the small-angle band.
pub const SMALL_ANGLE_MAX: f64 = PI / 8.0;
/// Angles at or above this bound form the large-angle band.
pub const LARGE_ANGLE_MIN: f64 = 3.0 * PI / 8.0;
const ANGLE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub angle: f64,
    pub ratio_mean: f64,
    pub ratio_se: Option<f64>,
    pub curve: f64,
    /// `100 (model - curve) / curve`; absent where the curve is zero.
    pub percent: Option<f64>,
    /// `(model - curve) / se`; absent without a positive standard error.
    pub z: Option<f64>,
}

/// Smallest and largest absolute percent deviation over a set of angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub min_abs_pct: f64,
    pub max_abs_pct: f64,
    /// Smallest `|z|` in the band, when every row has one.
    pub min_abs_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub rows: Vec<DeviationRow>,
    pub small_angle: Option<Band>,
    pub large_angle: Option<Band>,
}

impl DeviationReport {
    pub fn max_abs_percent(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.percent.map(f64::abs))
            .reduce(f64::max)
    }
}

fn band<'a>(rows: impl Iterator<Item = &'a DeviationRow>) -> Option<Band> {
    let rows: Vec<_> = rows.collect();
    let pcts: Vec<f64> = rows.iter().filter_map(|r| r.percent.map(f64::abs)).collect();
    if pcts.is_empty() {
        return None;
    }
    let zs: Option<Vec<f64>> = rows.iter().map(|r| r.z.map(f64::abs)).collect();
    Some(Band {
        min_abs_pct: pcts.iter().copied().fold(f64::INFINITY, f64::min),
        max_abs_pct: pcts.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min_abs_z: zs.and_then(|z| z.into_iter().reduce(f64::min)),
    })
}

pub fn deviation_report(batch: &BatchResult, curve: &dyn Fn(f64) -> f64) -> DeviationReport {
    let rows: Vec<DeviationRow> = batch
        .per_angle
        .iter()
        .map(|s| {
            let c = curve(s.angle);
            let diff = s.ratio_mean - c;
            DeviationRow {
                angle: s.angle,
                ratio_mean: s.ratio_mean,
                ratio_se: s.ratio_se,
                curve: c,
                percent: (c != 0.0).then(|| 100.0 * diff / c),
                z: s.ratio_se.filter(|se| *se > 0.0).map(|se| diff / se),
            }
        })
        .collect();
    let small_angle = band(rows.iter().filter(|r| r.angle <= SMALL_ANGLE_MAX + ANGLE_SLACK));
    let large_angle = band(rows.iter().filter(|r| r.angle >= LARGE_ANGLE_MIN - ANGLE_SLACK));
    DeviationReport {
        rows,
        small_angle,
        large_angle,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationLength {
    pub r_c_cm: f64,
    pub uncertainty_cm: f64,
    pub sigma: f64,
    pub sigma_err: f64,
    pub wavelength1_cm: f64,
    pub wavelength2_cm: f64,
}

impl CorrelationLength {
    pub fn mean_wavelength_cm(&self) -> f64 {
        0.5 * (self.wavelength1_cm + self.wavelength2_cm)
    }
}

/// `r_c = sigma * mean wavelength`. The uncertainty adds in quadrature the
/// width error and the half-spread of the two wavelengths.
pub fn correlation_length(sigma: f64, sigma_err: f64, cfg: &ExperimentConfig) -> Result<CorrelationLength> {
    if !(sigma > 0.0) {
        return Err(Error::Contract(format!("smearing width {sigma} must be positive")));
    }
    let mean = cfg.mean_wavelength_cm();
    let half_spread = 0.5 * (cfg.wavelength1_cm - cfg.wavelength2_cm).abs();
    let uncertainty_cm = (sigma_err * mean).hypot(sigma * half_spread);
    Ok(CorrelationLength {
        r_c_cm: sigma * mean,
        uncertainty_cm,
        sigma,
        sigma_err,
        wavelength1_cm: cfg.wavelength1_cm,
        wavelength2_cm: cfg.wavelength2_cm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use crate::runner::AngleStats;

    fn batch(means: &[(f64, f64, Option<f64>)]) -> BatchResult {
        let cfg = ExperimentConfig {
            angles: means.iter().map(|m| m.0).collect(),
            ..Default::default()
        };
        BatchResult {
            model: ModelKind::Collapse,
            per_angle: means
                .iter()
                .map(|&(angle, ratio_mean, ratio_se)| AngleStats {
                    angle,
                    ratio_mean,
                    ratio_se,
                    experiments: 10,
                    total_pairs: 0,
                    total_coincidences: 0,
                    total_singles1: 0,
                })
                .collect(),
            config: cfg,
            f2: 1.0,
            results: vec![],
            rng_algorithm: String::new(),
            master_seed: 0,
        }
    }

    #[test]
    fn exact_means_give_zero_deviation() {
        let curve = |phi: f64| 0.25 + 0.2 * (2.0 * phi).cos();
        let b = batch(&[(0.0, curve(0.0), Some(0.01)), (1.2, curve(1.2), Some(0.01))]);
        let r = deviation_report(&b, &curve);
        for row in &r.rows {
            assert_eq!(row.percent, Some(0.0));
            assert_eq!(row.z, Some(0.0));
        }
    }

    #[test]
    fn signs_and_bands() {
        let curve = |_: f64| 0.5;
        let b = batch(&[
            (0.0, 0.51, Some(0.001)),
            (PI / 8.0, 0.52, Some(0.001)),
            (PI / 4.0, 0.7, Some(0.001)),
            (3.0 * PI / 8.0, 0.45, Some(0.001)),
            (PI / 2.0, 0.25, Some(0.001)),
        ]);
        let r = deviation_report(&b, &curve);
        for row in &r.rows {
            assert_eq!(row.percent.unwrap().signum(), row.z.unwrap().signum());
        }
        let small = r.small_angle.unwrap();
        assert!((small.min_abs_pct - 2.0).abs() < 1e-9);
        assert!((small.max_abs_pct - 4.0).abs() < 1e-9);
        let large = r.large_angle.unwrap();
        assert!((large.min_abs_pct - 10.0).abs() < 1e-9);
        assert!((large.max_abs_pct - 50.0).abs() < 1e-9);
        assert!((large.min_abs_z.unwrap() - 50.0).abs() < 1e-6);
    }

    #[test]
    fn zero_curve_drops_percent_only() {
        let b = batch(&[(0.0, 0.1, Some(0.05))]);
        let r = deviation_report(&b, &|_| 0.0);
        assert_eq!(r.rows[0].percent, None);
        assert!((r.rows[0].z.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_length_reference_values() {
        let cfg = ExperimentConfig::default();
        let rc = correlation_length(0.2131, 0.0009, &cfg).unwrap();
        assert!((rc.mean_wavelength_cm() - 4.87e-5).abs() < 1e-12);
        assert!((rc.r_c_cm - 1.038e-5).abs() < 1e-8);
        assert!((rc.uncertainty_cm - 0.137e-5).abs() < 0.001e-5);

        let doubled = correlation_length(0.4262, 0.0009, &cfg).unwrap();
        assert!((doubled.r_c_cm - 2.0 * rc.r_c_cm).abs() < 1e-18);
        assert!(correlation_length(0.0, 0.0, &cfg).is_err());
    }
}
