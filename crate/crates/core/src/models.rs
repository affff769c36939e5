//! Photon-pair models.
//!
//! Analyzer 1 sits at laboratory angle 0 and analyzer 2 at the relative
//! angle `phi`. Each pair consumes its stream in a fixed order: photon-1
//! polarization, photon-1 acceptance draw, then whatever photon 2 needs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{transmission_probability, ExperimentConfig};
use crate::randomness::{accept_fraction, gaussian_angle, uniform_angle, RandomStream, StreamDomain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelKind {
    /// Measuring photon 1 sets photon 2's polarization to the analyzer-1 axis.
    Collapse,
    /// Both photons carry the same random polarization from emission.
    LocalRealistic,
    /// Photon 2's polarization is Gaussian about the analyzer-1 axis.
    Smeared { sigma: f64 },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Collapse => "collapse",
            ModelKind::LocalRealistic => "local-realistic",
            ModelKind::Smeared { .. } => "smeared",
        }
    }

    pub fn domain(&self) -> StreamDomain {
        match self {
            ModelKind::Collapse => StreamDomain::Collapse,
            ModelKind::LocalRealistic => StreamDomain::LocalRealistic,
            ModelKind::Smeared { .. } => StreamDomain::Smeared,
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            ModelKind::Smeared { sigma } => Some(*sigma),
            _ => None,
        }
    }

    /// True when two kinds describe the same model, ignoring smearing width.
    pub fn same_family(&self, other: &ModelKind) -> bool {
        self.domain() == other.domain()
    }

    pub fn validate(&self) -> Result<()> {
        if let ModelKind::Smeared { sigma } = *self {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::validation(
                    &["sigma"],
                    format!("smearing width {sigma} must be finite and non-negative"),
                ));
            }
        }
        Ok(())
    }

    /// Parse a model name as used on the command line.
    pub fn parse(name: &str, sigma: Option<f64>) -> Result<Self> {
        match name {
            "collapse" => Ok(ModelKind::Collapse),
            "local" | "local-realistic" => Ok(ModelKind::LocalRealistic),
            "smeared" => {
                let sigma = sigma.ok_or_else(|| {
                    Error::validation(&["sigma"], "the smeared model needs a sigma")
                })?;
                let m = ModelKind::Smeared { sigma };
                m.validate()?;
                Ok(m)
            }
            other => Err(Error::validation(
                &["model"],
                format!("unknown model {other:?} (collapse, local-realistic, smeared)"),
            )),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Smeared { sigma } => write!(f, "smeared(sigma={sigma})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOutcome {
    pub pol1: f64,
    /// Effective photon-2 polarization; `None` when the model leaves it
    /// undetermined because photon 1 was absorbed.
    pub pol2: Option<f64>,
    pub passed1: bool,
    pub passed2: bool,
}

impl PairOutcome {
    pub fn coincidence(&self) -> bool {
        self.passed1 && self.passed2
    }
}

/// Anything that turns a random stream into pair outcomes. Alternative
/// correlation rules plug in here.
pub trait PairSimulator {
    fn simulate(&self, stream: &mut RandomStream) -> PairOutcome;

    /// `(passed1, passed2)` without materializing the outcome.
    #[inline]
    fn transmissions(&self, stream: &mut RandomStream) -> (bool, bool) {
        let o = self.simulate(stream);
        (o.passed1, o.passed2)
    }
}

/// A model bound to one relative angle and configuration, with acceptance
/// fractions precomputed as `(a + b cos 2x) / (2 p_max)`.
#[derive(Debug, Clone)]
pub struct PreparedModel {
    kind: ModelKind,
    phi: f64,
    half_sum1: f64,
    half_diff1: f64,
    half_sum2: f64,
    half_diff2: f64,
    cos2phi: f64,
    sin2phi: f64,
    /// Collapse model only: photon 2 always arrives at angle 0.
    collapse_fraction2: f64,
}

impl PreparedModel {
    pub fn new(kind: ModelKind, phi: f64, cfg: &ExperimentConfig) -> Result<Self> {
        kind.validate()?;
        let p1 = cfg.p_max1();
        let p2 = cfg.p_max2();
        let (sin2phi, cos2phi) = (2.0 * phi).sin_cos();
        Ok(PreparedModel {
            kind,
            phi,
            half_sum1: 0.5 * cfg.analyzer1.sum() / p1,
            half_diff1: 0.5 * cfg.analyzer1.diff() / p1,
            half_sum2: 0.5 * cfg.analyzer2.sum() / p2,
            half_diff2: 0.5 * cfg.analyzer2.diff() / p2,
            cos2phi,
            sin2phi,
            collapse_fraction2: transmission_probability(-phi, &cfg.analyzer2) / p2,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    #[inline]
    fn fraction1(&self, cos2: f64) -> f64 {
        self.half_sum1 + self.half_diff1 * cos2
    }

    #[inline]
    fn fraction2(&self, cos2: f64) -> f64 {
        self.half_sum2 + self.half_diff2 * cos2
    }
}

impl PairSimulator for PreparedModel {
    #[inline]
    fn simulate(&self, stream: &mut RandomStream) -> PairOutcome {
        let pol1 = uniform_angle(stream);
        match self.kind {
            ModelKind::Collapse => {
                let passed1 = accept_fraction(stream, self.fraction1((2.0 * pol1).cos()));
                if !passed1 {
                    return PairOutcome { pol1, pol2: None, passed1, passed2: false };
                }
                let passed2 = accept_fraction(stream, self.collapse_fraction2);
                PairOutcome { pol1, pol2: Some(0.0), passed1, passed2 }
            }
            ModelKind::LocalRealistic => {
                let (s, c) = (2.0 * pol1).sin_cos();
                let passed1 = accept_fraction(stream, self.fraction1(c));
                // cos 2(pol1 - phi)
                let c2 = c * self.cos2phi + s * self.sin2phi;
                let passed2 = accept_fraction(stream, self.fraction2(c2));
                PairOutcome { pol1, pol2: Some(pol1), passed1, passed2 }
            }
            ModelKind::Smeared { sigma } => {
                let passed1 = accept_fraction(stream, self.fraction1((2.0 * pol1).cos()));
                if !passed1 {
                    return PairOutcome { pol1, pol2: None, passed1, passed2: false };
                }
                let pol2 = gaussian_angle(stream, 0.0, sigma);
                let passed2 =
                    accept_fraction(stream, self.fraction2((2.0 * (pol2 - self.phi)).cos()));
                PairOutcome { pol1, pol2: Some(pol2), passed1, passed2 }
            }
        }
    }
}

/// Simulate a single pair. Batch code should build a [`PreparedModel`] once
/// and reuse it.
pub fn simulate_pair(
    model: ModelKind,
    phi: f64,
    stream: &mut RandomStream,
    cfg: &ExperimentConfig,
) -> Result<PairOutcome> {
    Ok(PreparedModel::new(model, phi, cfg)?.simulate(stream))
}
