//! TOML config documents.
//!
//! A document is a flat table of the keys in [`KNOWN_KEYS`]; every key is
//! optional and falls back to the default replication setup.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{AnalyzerEfficiencies, ExperimentConfig};

pub const KNOWN_KEYS: &[&str] = &[
    "e1_par",
    "e1_perp",
    "e2_par",
    "e2_perp",
    "f1",
    "f2",
    "sigma",
    "angles",
    "pairs_per_experiment",
    "experiments",
    "master_seed",
    "normalization",
    "wavelength1_cm",
    "wavelength2_cm",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e1_par: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e1_perp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e2_par: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e2_perp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs_per_experiment: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiments: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength1_cm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength2_cm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
}

impl ConfigDocument {
    /// Values in `self` replace those in `base`.
    pub fn apply_to(&self, base: &ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        let a1 = AnalyzerEfficiencies {
            e_par: self.e1_par.unwrap_or(base.analyzer1.e_par),
            e_perp: self.e1_perp.unwrap_or(base.analyzer1.e_perp),
        };
        let a2 = AnalyzerEfficiencies {
            e_par: self.e2_par.unwrap_or(base.analyzer2.e_par),
            e_perp: self.e2_perp.unwrap_or(base.analyzer2.e_perp),
        };
        cfg.analyzer1 = a1;
        cfg.analyzer2 = a2;
        if let Some(v) = self.f1 {
            cfg.f1 = v;
        }
        if let Some(v) = self.f2 {
            cfg.f2 = Some(v);
        }
        if let Some(v) = self.sigma {
            cfg.sigma = Some(v);
        }
        if let Some(v) = &self.angles {
            cfg.angles = v.clone();
        }
        if let Some(v) = self.pairs_per_experiment {
            cfg.pairs_per_experiment = v;
        }
        if let Some(v) = self.experiments {
            cfg.experiments = v;
        }
        if let Some(v) = self.master_seed {
            cfg.master_seed = v;
        }
        if let Some(v) = &self.normalization {
            cfg.normalization = v.parse()?;
        }
        if let Some(v) = self.wavelength1_cm {
            cfg.wavelength1_cm = v;
        }
        if let Some(v) = self.wavelength2_cm {
            cfg.wavelength2_cm = v;
        }
        Ok(cfg)
    }

    /// Every key spelled out.
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        ConfigDocument {
            e1_par: Some(cfg.analyzer1.e_par),
            e1_perp: Some(cfg.analyzer1.e_perp),
            e2_par: Some(cfg.analyzer2.e_par),
            e2_perp: Some(cfg.analyzer2.e_perp),
            f1: Some(cfg.f1),
            f2: cfg.f2,
            sigma: cfg.sigma,
            angles: Some(cfg.angles.clone()),
            pairs_per_experiment: Some(cfg.pairs_per_experiment),
            experiments: Some(cfg.experiments),
            master_seed: Some(cfg.master_seed),
            normalization: Some(cfg.normalization.as_str().to_string()),
            wavelength1_cm: Some(cfg.wavelength1_cm),
            wavelength2_cm: Some(cfg.wavelength2_cm),
        }
    }
}

/// Parse a document without applying defaults or validation.
pub fn parse_document(text: &str) -> Result<ConfigDocument> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Parse(e.message().to_string()))?;
    let unknown: Vec<&str> = table
        .keys()
        .map(String::as_str)
        .filter(|k| !KNOWN_KEYS.contains(k))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::validation(&unknown, "unknown config key"));
    }
    toml::Value::Table(table)
        .try_into::<ConfigDocument>()
        .map_err(|e| Error::Parse(e.message().to_string()))
}

/// Parse and validate a config document over the default setup.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg = parse_document(text)?.apply_to(&ExperimentConfig::default())?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn to_config_text(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(&ConfigDocument::from_config(cfg)).map_err(|e| Error::Parse(e.to_string()))
}
