//! Test-side oracles built from Malus's law by brute-force quadrature,
//! independent of the library's closed forms.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use bellsim::runner::{AngleStats, BatchResult};
use bellsim::{ExperimentConfig, ModelKind, Normalization};

const QUAD_INTERVALS: usize = 20_000;

pub fn malus(x: f64, e_par: f64, e_perp: f64) -> f64 {
    e_par * x.cos().powi(2) + e_perp * x.sin().powi(2)
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn bounds(cfg: &ExperimentConfig) -> (f64, f64) {
    match cfg.normalization {
        Normalization::MaxProbability => (cfg.analyzer1.e_par, cfg.analyzer2.e_par),
        Normalization::Unit => (1.0, 1.0),
    }
}

fn p1(theta: f64, cfg: &ExperimentConfig) -> f64 {
    malus(theta, cfg.analyzer1.e_par, cfg.analyzer1.e_perp) / bounds(cfg).0
}

fn p2(x: f64, cfg: &ExperimentConfig) -> f64 {
    malus(x, cfg.analyzer2.e_par, cfg.analyzer2.e_perp) / bounds(cfg).1
}

/// Average over photon-1 polarization uniform on `[-pi/2, pi/2]`.
fn over_pol1(f: impl Fn(f64) -> f64) -> f64 {
    simpson(f, -FRAC_PI_2, FRAC_PI_2, QUAD_INTERVALS) / std::f64::consts::PI
}

pub fn quad_collapse(phi: f64, cfg: &ExperimentConfig) -> f64 {
    // Photon 2 is projected onto analyzer 1's axis.
    over_pol1(|t| p1(t, cfg) * p2(0.0 - phi, cfg))
}

pub fn quad_local(phi: f64, cfg: &ExperimentConfig) -> f64 {
    over_pol1(|t| p1(t, cfg) * p2(t - phi, cfg))
}

pub fn quad_smeared(phi: f64, sigma: f64, cfg: &ExperimentConfig) -> f64 {
    if sigma == 0.0 {
        return quad_collapse(phi, cfg);
    }
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let gauss = |b: f64| norm * (-0.5 * (b / sigma).powi(2)).exp();
    let photon2 = simpson(|b| gauss(b) * p2(b - phi, cfg), -12.0 * sigma, 12.0 * sigma, QUAD_INTERVALS);
    over_pol1(|t| p1(t, cfg) * photon2)
}

pub fn quad_oracle(model: ModelKind, phi: f64, cfg: &ExperimentConfig) -> f64 {
    match model {
        ModelKind::Collapse => quad_collapse(phi, cfg),
        ModelKind::LocalRealistic => quad_local(phi, cfg),
        ModelKind::Smeared { sigma } => quad_smeared(phi, sigma, cfg),
    }
}

pub fn library_oracle(model: ModelKind, phi: f64, cfg: &ExperimentConfig) -> f64 {
    use bellsim::physics::{collapse_expected_ratio, local_expected_ratio, smeared_expected_ratio};
    match model {
        ModelKind::Collapse => collapse_expected_ratio(phi, cfg),
        ModelKind::LocalRealistic => local_expected_ratio(phi, cfg),
        ModelKind::Smeared { sigma } => smeared_expected_ratio(phi, sigma, cfg),
    }
}

/// A noise-free batch with the given per-angle means and standard errors.
pub fn exact_batch(cfg: &ExperimentConfig, model: ModelKind, means: &[f64], se: Option<f64>) -> BatchResult {
    BatchResult {
        model,
        config: ExperimentConfig {
            f2: Some(1.0),
            ..cfg.clone()
        },
        f2: 1.0,
        per_angle: cfg
            .angles
            .iter()
            .zip(means)
            .map(|(&angle, &ratio_mean)| AngleStats {
                angle,
                ratio_mean,
                ratio_se: se,
                experiments: cfg.experiments,
                total_pairs: 0,
                total_coincidences: 0,
                total_singles1: 0,
            })
            .collect(),
        results: vec![],
        rng_algorithm: String::new(),
        master_seed: cfg.master_seed,
    }
}

/// Kolmogorov-Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((((i + 1) as f64) / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at significance 0.001.
pub fn ks_critical_001(n: usize) -> f64 {
    1.949 / (n as f64).sqrt()
}
