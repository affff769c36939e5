//! Closed-form coincidence predictions.
//!
//! Everything here is a pure function of an [`ExperimentConfig`]. Besides the
//! quantum and classical predictions, the module carries the exact
//! expectations of each Monte Carlo model so the simulator can be checked
//! against them.
//!
//! All curves share the form `constant + amplitude * cos(2 phi)`. Writing
//! `a = e_par + e_perp` and `b = e_par - e_perp` for each analyzer:
//!
//! | curve      | constant      | amplitude                 |
//! |------------|---------------|---------------------------|
//! | quantum    | `a1 a2 / 4`   | `b1 b2 F1 / 4`            |
//! | classical  | `a1 a2 / 4`   | `b1 b2 / 8`               |
//! | collapse   | `a1 a2 / 4`   | `a1 b2 / 4`               |
//! | smeared    | `a1 a2 / 4`   | `a1 b2 exp(-2 s^2) / 4`   |
//!
//! The Monte Carlo expectations are additionally divided by the product of
//! acceptance bounds when [`Normalization::MaxProbability`] is selected.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parallel/perpendicular transmission probabilities of one analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerEfficiencies {
    pub e_par: f64,
    pub e_perp: f64,
}

impl AnalyzerEfficiencies {
    pub fn new(e_par: f64, e_perp: f64) -> Result<Self> {
        let eff = AnalyzerEfficiencies { e_par, e_perp };
        eff.validate("e_par", "e_perp")?;
        Ok(eff)
    }

    pub(crate) fn validate(&self, par_key: &str, perp_key: &str) -> Result<()> {
        let (par, perp) = (self.e_par, self.e_perp);
        if !(par.is_finite() && perp.is_finite()) {
            return Err(Error::validation(
                &[par_key, perp_key],
                "efficiencies must be finite",
            ));
        }
        if !(0.0..=1.0).contains(&par) {
            return Err(Error::validation(
                &[par_key],
                format!("{par_key} = {par} is outside [0, 1]"),
            ));
        }
        if perp < 0.0 {
            return Err(Error::validation(
                &[perp_key],
                format!("{perp_key} = {perp} is negative"),
            ));
        }
        if perp >= par {
            return Err(Error::validation(
                &[par_key, perp_key],
                format!("{perp_key} = {perp} must be strictly below {par_key} = {par}"),
            ));
        }
        Ok(())
    }

    /// `e_par + e_perp`
    pub fn sum(&self) -> f64 {
        self.e_par + self.e_perp
    }

    /// `e_par - e_perp`
    pub fn diff(&self) -> f64 {
        self.e_par - self.e_perp
    }
}

/// Upper bound of the acceptance-rejection draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Draw on `[0, e_par)` of the analyzer in question.
    #[default]
    MaxProbability,
    /// Draw on `[0, 1)`.
    Unit,
}

impl Normalization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::MaxProbability => "max-probability",
            Normalization::Unit => "unit",
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-probability" => Ok(Normalization::MaxProbability),
            "unit" => Ok(Normalization::Unit),
            other => Err(Error::validation(
                &["normalization"],
                format!("unknown normalization {other:?}, expected \"max-probability\" or \"unit\""),
            )),
        }
    }
}

/// Full description of a simulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub analyzer1: AnalyzerEfficiencies,
    pub analyzer2: AnalyzerEfficiencies,
    /// Acceptance-angle factor multiplying the quantum cos 2phi term.
    pub f1: f64,
    /// Detector acceptance coefficient applied to simulated ratios.
    pub f2: Option<f64>,
    /// Relative analyzer angles in radians.
    pub angles: Vec<f64>,
    pub wavelength1_cm: f64,
    pub wavelength2_cm: f64,
    pub pairs_per_experiment: u64,
    pub experiments: u64,
    pub master_seed: u64,
    pub normalization: Normalization,
    /// Smearing width in radians, used by the smeared model only.
    pub sigma: Option<f64>,
}

pub const DEFAULT_MASTER_SEED: u64 = 1;

/// Nine relative angles `k pi / 16`, `k = 0..=8`.
pub fn default_angles() -> Vec<f64> {
    (0..=8).map(|k| k as f64 * PI / 16.0).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            analyzer1: AnalyzerEfficiencies {
                e_par: 0.97,
                e_perp: 0.038,
            },
            analyzer2: AnalyzerEfficiencies {
                e_par: 0.96,
                e_perp: 0.037,
            },
            f1: 0.9876,
            f2: None,
            angles: default_angles(),
            wavelength1_cm: 5.513e-5,
            wavelength2_cm: 4.227e-5,
            pairs_per_experiment: 100_000,
            experiments: 500,
            master_seed: DEFAULT_MASTER_SEED,
            normalization: Normalization::MaxProbability,
            sigma: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.validate_physics()?;
        if self.pairs_per_experiment == 0 {
            return Err(Error::validation(
                &["pairs_per_experiment"],
                "pairs_per_experiment must be at least 1",
            ));
        }
        if self.experiments == 0 {
            return Err(Error::validation(&["experiments"], "experiments must be at least 1"));
        }
        Ok(())
    }

    /// Everything except the run-size checks.
    pub fn validate_physics(&self) -> Result<()> {
        self.analyzer1.validate("e1_par", "e1_perp")?;
        self.analyzer2.validate("e2_par", "e2_perp")?;
        if !(self.f1 > 0.0 && self.f1 <= 1.0) {
            return Err(Error::validation(
                &["f1"],
                format!("f1 = {} is outside (0, 1]", self.f1),
            ));
        }
        if let Some(f2) = self.f2 {
            if !(f2 > 0.0 && f2 <= 1.0) {
                return Err(Error::validation(
                    &["f2"],
                    format!("f2 = {f2} is outside (0, 1]"),
                ));
            }
        }
        if let Some(sigma) = self.sigma {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::validation(
                    &["sigma"],
                    format!("sigma = {sigma} must be finite and non-negative"),
                ));
            }
        }
        if self.angles.is_empty() {
            return Err(Error::validation(&["angles"], "at least one angle is required"));
        }
        for (i, &phi) in self.angles.iter().enumerate() {
            if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&phi) {
                return Err(Error::validation(
                    &["angles"],
                    format!("angles[{i}] = {phi} is outside [0, pi/2]"),
                ));
            }
            if i > 0 && phi <= self.angles[i - 1] {
                return Err(Error::validation(
                    &["angles"],
                    format!("angles must be strictly increasing (angles[{i}] = {phi})"),
                ));
            }
        }
        for (key, w) in [
            ("wavelength1_cm", self.wavelength1_cm),
            ("wavelength2_cm", self.wavelength2_cm),
        ] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::validation(&[key], format!("{key} = {w} must be positive")));
            }
        }
        Ok(())
    }

    /// Acceptance-rejection bound for analyzer 1.
    pub fn p_max1(&self) -> f64 {
        match self.normalization {
            Normalization::MaxProbability => self.analyzer1.e_par,
            Normalization::Unit => 1.0,
        }
    }

    /// Acceptance-rejection bound for analyzer 2.
    pub fn p_max2(&self) -> f64 {
        match self.normalization {
            Normalization::MaxProbability => self.analyzer2.e_par,
            Normalization::Unit => 1.0,
        }
    }

    /// Factor by which every Monte Carlo expectation is divided.
    pub fn normalization_constant(&self) -> f64 {
        self.p_max1() * self.p_max2()
    }

    pub fn mean_wavelength_cm(&self) -> f64 {
        0.5 * (self.wavelength1_cm + self.wavelength2_cm)
    }
}

/// Probability that an analyzer transmits a photon polarized at `phi`
/// relative to its axis.
pub fn transmission_probability(phi: f64, eff: &AnalyzerEfficiencies) -> f64 {
    let (s, c) = phi.sin_cos();
    eff.e_par * c * c + eff.e_perp * s * s
}

/// Constant term shared by every curve.
pub fn shared_constant(cfg: &ExperimentConfig) -> f64 {
    0.25 * cfg.analyzer1.sum() * cfg.analyzer2.sum()
}

pub fn qm_amplitude(cfg: &ExperimentConfig) -> f64 {
    0.25 * cfg.analyzer1.diff() * cfg.analyzer2.diff() * cfg.f1
}

pub fn classical_amplitude(cfg: &ExperimentConfig) -> f64 {
    0.125 * cfg.analyzer1.diff() * cfg.analyzer2.diff()
}

/// Amplitude of the collapse-model expectation, before normalization.
pub fn collapse_amplitude_unit(cfg: &ExperimentConfig) -> f64 {
    0.25 * cfg.analyzer1.sum() * cfg.analyzer2.diff()
}

/// Collapse-model amplitude under the configured normalization.
pub fn collapse_amplitude(cfg: &ExperimentConfig) -> f64 {
    collapse_amplitude_unit(cfg) / cfg.normalization_constant()
}

/// Quantum prediction of `R_phi / R_0`.
pub fn qm_coincidence_ratio(phi: f64, cfg: &ExperimentConfig) -> f64 {
    shared_constant(cfg) + qm_amplitude(cfg) * (2.0 * phi).cos()
}

/// Classical prediction for photon pairs sharing a random, equal polarization.
pub fn classical_coincidence_ratio(phi: f64, cfg: &ExperimentConfig) -> f64 {
    shared_constant(cfg) + classical_amplitude(cfg) * (2.0 * phi).cos()
}

/// Exact expectation of the collapse-model coincidence fraction (F2 not
/// applied).
pub fn collapse_expected_ratio(phi: f64, cfg: &ExperimentConfig) -> f64 {
    (shared_constant(cfg) + collapse_amplitude_unit(cfg) * (2.0 * phi).cos())
        / cfg.normalization_constant()
}

/// Exact expectation of the smeared-model coincidence fraction. Uses
/// `E[cos 2(b - phi)] = exp(-2 sigma^2) cos 2phi` for `b ~ N(0, sigma^2)`.
pub fn smeared_expected_ratio(phi: f64, sigma: f64, cfg: &ExperimentConfig) -> f64 {
    let damping = (-2.0 * sigma * sigma).exp();
    (shared_constant(cfg) + collapse_amplitude_unit(cfg) * damping * (2.0 * phi).cos())
        / cfg.normalization_constant()
}

/// Exact expectation of the local-realistic coincidence fraction: the
/// classical curve divided by the normalization constant.
pub fn local_expected_ratio(phi: f64, cfg: &ExperimentConfig) -> f64 {
    classical_coincidence_ratio(phi, cfg) / cfg.normalization_constant()
}

/// Smearing width at which `f2` times the smeared amplitude equals the
/// quantum amplitude.
pub fn sigma_star(f2: f64, cfg: &ExperimentConfig) -> Result<f64> {
    let model_amp = f2 * collapse_amplitude(cfg);
    if !(model_amp > 0.0) {
        return Err(Error::InfeasibleFit(format!(
            "f2 * collapse amplitude = {model_amp} is not positive"
        )));
    }
    let ratio = qm_amplitude(cfg) / model_amp;
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InfeasibleFit(format!(
            "amplitude ratio {ratio} is outside (0, 1]; no real smearing width matches"
        )));
    }
    Ok((-0.5 * ratio.ln()).max(0.0).sqrt())
}
