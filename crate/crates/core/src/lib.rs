//! Monte Carlo simulation of polarization-correlation coincidence
//! experiments with entangled photon pairs.
//!
//! Three pair models are simulated against the quantum-mechanical and
//! classical coincidence curves: a generic wave-function collapse model, a
//! local realistic model, and a smeared-polarization model. The crate fits
//! the detector acceptance coefficient and the smearing width, reports
//! deviations, and derives a correlation length from the fitted width.
//!
//! Module map:
//! - [`physics`]: closed-form curves and per-model expectations
//! - [`randomness`]: labeled ChaCha8 streams and sampling primitives
//! - [`models`]: single-pair simulation
//! - [`runner`]: experiment plans and aggregation
//! - [`fitting`]: `F2` and `sigma` fits, mean chi-squared
//! - [`analysis`]: deviation reports and the correlation length
//! - [`interface`]: config parsing, CSV/manifest output, SVG plots, CLI

// Range checks are written `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fitting;
pub mod interface;
pub mod models;
pub mod physics;
pub mod randomness;
pub mod runner;

pub use error::{Error, Result};
pub use models::ModelKind;
pub use physics::{AnalyzerEfficiencies, ExperimentConfig, Normalization};
pub use runner::{AngleStats, BatchResult, ExperimentResult};
