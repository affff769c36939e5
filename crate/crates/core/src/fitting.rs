//! Scalar fits against the quantum curve and the model-comparison statistic.
//!
//! `F2` is a scalar multiplier, so its weighted least-squares optimum is
//! closed form. The smearing width is found with a golden-section search
//! over `[0, 1]` rad, either against the closed-form smeared expectation or
//! against Monte Carlo batches. Uncertainties come from resampling
//! experiments within each angle.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::physics::{collapse_amplitude, qm_coincidence_ratio, smeared_expected_ratio, ExperimentConfig};
use crate::randomness::{derive_stream, StreamDomain};
use crate::runner::{mean_and_se, run_batch, BatchResult};

pub const DEFAULT_BOOTSTRAP_REPLICATES: usize = 199;
pub const SIGMA_BRACKET: (f64, f64) = (0.0, 1.0);

/// Bootstrap stream purposes, used as the angle slot of the stream label.
const BOOTSTRAP_F2: usize = 0;
const BOOTSTRAP_SIGMA: usize = 1;
const BOOTSTRAP_SCALE: usize = 2;

/// Per-angle weights of the least-squares objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// `1 / curve(phi)`: the fit minimizes the Pearson statistic.
    #[default]
    Pearson,
    /// `1 / se^2` from the Monte Carlo batch.
    InverseVariance,
    Uniform,
}

impl Weighting {
    pub fn as_str(&self) -> &'static str {
        match self {
            Weighting::Pearson => "pearson",
            Weighting::InverseVariance => "inverse-variance",
            Weighting::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pearson" => Ok(Weighting::Pearson),
            "inverse-variance" => Ok(Weighting::InverseVariance),
            "uniform" | "unweighted" => Ok(Weighting::Uniform),
            other => Err(Error::validation(
                &["weighting"],
                format!("unknown weighting {other:?} (pearson, inverse-variance, uniform)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaObjective {
    /// Monte Carlo batches at each candidate width.
    Mc,
    /// The closed-form smeared expectation.
    ClosedForm,
}

impl std::str::FromStr for SigmaObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(SigmaObjective::Mc),
            "closed-form" => Ok(SigmaObjective::ClosedForm),
            other => Err(Error::validation(
                &["mode"],
                format!("unknown sigma objective {other:?} (mc, closed-form)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMethod {
    pub weighting: Weighting,
    pub search: String,
    pub bootstrap_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameter: String,
    pub value: f64,
    /// `None` when the uncertainty is undefined (fewer than two replicates,
    /// or zero curvature at the optimum).
    pub uncertainty: Option<f64>,
    /// Weighted sum of squared residuals at `value`.
    pub objective: f64,
    pub method: FitMethod,
}

impl fmt::Display for FitResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.uncertainty {
            Some(u) => write!(f, "{} = {:.6} +/- {:.6}", self.parameter, self.value, u)?,
            None => write!(f, "{} = {:.6}", self.parameter, self.value)?,
        }
        write!(
            f,
            " (objective {:.6e}, {} weights, {})",
            self.objective,
            self.method.weighting.as_str(),
            self.method.search
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub weighting: Weighting,
    pub bootstrap_replicates: usize,
    /// Seed for the resampling streams.
    pub seed: u64,
}

impl FitOptions {
    pub fn new(weighting: Weighting, seed: u64) -> Self {
        FitOptions {
            weighting,
            bootstrap_replicates: DEFAULT_BOOTSTRAP_REPLICATES,
            seed,
        }
    }
}

fn weights(
    weighting: Weighting,
    ses: &[Option<f64>],
    targets: &[f64],
) -> Result<Vec<f64>> {
    match weighting {
        Weighting::Uniform => Ok(vec![1.0; targets.len()]),
        Weighting::Pearson => targets
            .iter()
            .map(|&q| {
                if q > 0.0 {
                    Ok(1.0 / q)
                } else {
                    Err(Error::Weighting(format!("curve value {q} is not positive")))
                }
            })
            .collect(),
        Weighting::InverseVariance => ses
            .iter()
            .enumerate()
            .map(|(i, se)| match se {
                Some(se) if *se > 0.0 => Ok(1.0 / (se * se)),
                Some(_) => Err(Error::Weighting(format!(
                    "standard error at angle {i} is zero; use an unweighted fit"
                ))),
                None => Err(Error::Weighting(format!(
                    "standard error at angle {i} is undefined; use an unweighted fit"
                ))),
            })
            .collect(),
    }
}

/// Closed-form weighted least-squares multiplier `s` minimizing
/// `sum w (s m - q)^2`. Returns `(s, objective)`.
pub fn fit_scale(means: &[f64], targets: &[f64], weights: &[f64]) -> Result<(f64, f64)> {
    if means.len() != targets.len() || means.len() != weights.len() || means.is_empty() {
        return Err(Error::Contract("fit inputs must be non-empty and equally long".into()));
    }
    let num: f64 = means.iter().zip(targets).zip(weights).map(|((m, q), w)| w * m * q).sum();
    let den: f64 = means.iter().zip(weights).map(|(m, w)| w * m * m).sum();
    if !(den > 0.0) {
        return Err(Error::InfeasibleFit("all model means are zero".into()));
    }
    let s = num / den;
    Ok((s, weighted_sse(&means.iter().map(|m| s * m).collect::<Vec<_>>(), targets, weights)))
}

fn weighted_sse(model: &[f64], targets: &[f64], weights: &[f64]) -> f64 {
    model
        .iter()
        .zip(targets)
        .zip(weights)
        .map(|((m, q), w)| w * (m - q) * (m - q))
        .sum()
}

/// Fit a multiplier mapping `batch` onto `curve`, with bootstrap
/// uncertainty. The batch's own F2 stays in the means, so a raw batch
/// yields the coefficient directly.
pub fn fit_scale_to_curve(
    batch: &BatchResult,
    curve: &dyn Fn(f64) -> f64,
    parameter: &str,
    opts: &FitOptions,
    purpose: usize,
) -> Result<FitResult> {
    let targets: Vec<f64> = batch.config.angles.iter().map(|&phi| curve(phi)).collect();
    let ses: Vec<Option<f64>> = batch.per_angle.iter().map(|a| a.ratio_se).collect();
    let w = weights(opts.weighting, &ses, &targets)?;
    let (value, objective) = fit_scale(&batch.means(), &targets, &w)?;

    let ratios = batch.ratios_by_angle();
    let mut replicates = Vec::with_capacity(opts.bootstrap_replicates);
    for b in 0..opts.bootstrap_replicates {
        let mut stream = derive_stream(opts.seed, StreamDomain::Bootstrap, purpose, b);
        let mut means = Vec::with_capacity(ratios.len());
        let mut ses = Vec::with_capacity(ratios.len());
        for per_exp in &ratios {
            let n = per_exp.len();
            let sample: Vec<f64> = (0..n).map(|_| per_exp[stream.random_range(0..n)]).collect();
            let (m, se) = mean_and_se(&sample);
            means.push(m);
            ses.push(se);
        }
        // A degenerate resample (e.g. all-identical draws) cannot be
        // inverse-variance weighted; skip it rather than fail the fit.
        let Ok(w) = weights(opts.weighting, &ses, &targets) else {
            continue;
        };
        if let Ok((s, _)) = fit_scale(&means, &targets, &w) {
            replicates.push(s);
        }
    }
    Ok(FitResult {
        parameter: parameter.to_string(),
        value,
        uncertainty: bootstrap_sd(&replicates),
        objective,
        method: FitMethod {
            weighting: opts.weighting,
            search: "closed-form weighted least squares".into(),
            bootstrap_replicates: opts.bootstrap_replicates,
        },
    })
}

fn bootstrap_sd(values: &[f64]) -> Option<f64> {
    let (mean, _) = mean_and_se(values);
    if values.len() < 2 {
        return None;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

/// Fit `F2` so the raw collapse batch best matches the quantum curve.
pub fn fit_f2(batch: &BatchResult, opts: &FitOptions) -> Result<FitResult> {
    if batch.model != ModelKind::Collapse {
        return Err(Error::Contract(format!(
            "F2 is fitted on a collapse batch, got {}",
            batch.model
        )));
    }
    if batch.f2 != 1.0 {
        return Err(Error::Contract(format!(
            "F2 fit needs a raw batch (f2 = 1), got f2 = {}",
            batch.f2
        )));
    }
    let cfg = batch.config.clone();
    fit_scale_to_curve(batch, &|phi| qm_coincidence_ratio(phi, &cfg), "F2", opts, BOOTSTRAP_F2)
}

/// Refit the acceptance coefficient on a smeared batch. The batch's applied
/// F2 is divided out first, so the result is directly a new F2.
pub fn refit_f2_on_smeared(batch: &BatchResult, opts: &FitOptions) -> Result<FitResult> {
    if !matches!(batch.model, ModelKind::Smeared { .. }) {
        return Err(Error::Contract(format!("expected a smeared batch, got {}", batch.model)));
    }
    let raw = batch.with_f2(1.0)?;
    let cfg = batch.config.clone();
    fit_scale_to_curve(&raw, &|phi| qm_coincidence_ratio(phi, &cfg), "F2 (smeared refit)", opts, BOOTSTRAP_SCALE)
}

/// Golden-section minimization of `f` over `[lo, hi]`. Returns the best
/// point seen, including the two endpoints, with its value.
pub fn golden_section_minimize<F>(mut f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iter = 0;
    while (b - a) > xtol && iter < max_iter {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        iter += 1;
    }
    let (mut best_x, mut best_f) = if fc <= fd { (c, fc) } else { (d, fd) };
    // The minimum may sit on the bracket boundary.
    if a == lo {
        let f_lo = f(lo);
        if f_lo <= best_f {
            best_x = lo;
            best_f = f_lo;
        }
    }
    if b == hi {
        let f_hi = f(hi);
        if f_hi < best_f {
            best_x = hi;
            best_f = f_hi;
        }
    }
    (best_x, best_f)
}

#[derive(Debug, Clone)]
pub struct SigmaFit {
    pub fit: FitResult,
    /// Monte Carlo mode: the smeared batch (F2 applied) at the optimum.
    pub batch: Option<BatchResult>,
    /// Objective evaluations spent in the search.
    pub evaluations: usize,
}

fn qm_targets(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.angles.iter().map(|&phi| qm_coincidence_ratio(phi, cfg)).collect()
}

fn check_upper_boundary(sigma: f64, xtol: f64) -> Result<()> {
    if sigma >= SIGMA_BRACKET.1 - xtol {
        return Err(Error::InfeasibleFit(format!(
            "smearing width optimum {sigma} sits on the upper end of [{}, {}]",
            SIGMA_BRACKET.0, SIGMA_BRACKET.1
        )));
    }
    Ok(())
}

/// Fit the smearing width with `F2` held fixed.
pub fn fit_sigma(
    cfg: &ExperimentConfig,
    f2: f64,
    mode: SigmaObjective,
    opts: &FitOptions,
) -> Result<SigmaFit> {
    if !(f2 > 0.0) {
        return Err(Error::validation(&["f2"], format!("f2 = {f2} must be positive")));
    }
    cfg.validate_physics()?;
    match mode {
        SigmaObjective::ClosedForm => fit_sigma_closed_form(cfg, f2, opts),
        SigmaObjective::Mc => fit_sigma_mc(cfg, f2, opts),
    }
}

/// Binomial variance of the mean ratio at the configured run size.
fn binomial_variance(raw: f64, f2: f64, cfg: &ExperimentConfig) -> f64 {
    let n = (cfg.pairs_per_experiment * cfg.experiments) as f64;
    f2 * f2 * raw * (1.0 - raw) / n
}

fn fit_sigma_closed_form(cfg: &ExperimentConfig, f2: f64, opts: &FitOptions) -> Result<SigmaFit> {
    let targets = qm_targets(cfg);
    let model = |sigma: f64| -> Vec<f64> {
        cfg.angles.iter().map(|&phi| f2 * smeared_expected_ratio(phi, sigma, cfg)).collect()
    };
    let weights_at = |sigma: f64| -> Result<Vec<f64>> {
        match opts.weighting {
            Weighting::InverseVariance => Ok(cfg
                .angles
                .iter()
                .map(|&phi| 1.0 / binomial_variance(smeared_expected_ratio(phi, sigma, cfg), f2, cfg))
                .collect()),
            w => weights(w, &[], &targets),
        }
    };
    weights_at(0.0)?;
    let objective = |sigma: f64| weighted_sse(&model(sigma), &targets, &weights_at(sigma).unwrap());

    let xtol = 1e-9;
    let mut evaluations = 0;
    let (mut sigma, _) = golden_section_minimize(
        |s| {
            evaluations += 1;
            objective(s)
        },
        SIGMA_BRACKET.0,
        SIGMA_BRACKET.1,
        xtol,
        200,
    );
    check_upper_boundary(sigma, xtol)?;

    let amp = f2 * collapse_amplitude(cfg);
    // d(model_i)/d(sigma)
    let slope = |sigma: f64| -> Vec<f64> {
        cfg.angles
            .iter()
            .map(|&phi| amp * (2.0 * phi).cos() * (-4.0 * sigma) * (-2.0 * sigma * sigma).exp())
            .collect()
    };
    // Fixed weights: polish by bisecting on the analytic gradient.
    if opts.weighting != Weighting::InverseVariance && sigma > 0.0 {
        let w = weights_at(sigma)?;
        let gradient = |s: f64| -> f64 {
            model(s)
                .iter()
                .zip(&targets)
                .zip(slope(s))
                .zip(&w)
                .map(|(((m, q), g), w)| w * (m - q) * g)
                .sum()
        };
        let (mut lo, mut hi) = ((sigma - 1e-6).max(1e-12), sigma + 1e-6);
        if gradient(lo) < 0.0 && gradient(hi) > 0.0 {
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if gradient(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            sigma = 0.5 * (lo + hi);
        }
    }

    // Linearized error propagation with binomial noise at the configured
    // run size.
    let w = weights_at(sigma)?;
    let g = slope(sigma);
    let var: Vec<f64> = cfg
        .angles
        .iter()
        .map(|&phi| binomial_variance(smeared_expected_ratio(phi, sigma, cfg), f2, cfg))
        .collect();
    let info: f64 = w.iter().zip(&g).map(|(w, g)| w * g * g).sum();
    let spread: f64 = w.iter().zip(&g).zip(&var).map(|((w, g), v)| w * w * g * g * v).sum();
    let uncertainty = (info > 0.0).then(|| spread.sqrt() / info);

    Ok(SigmaFit {
        fit: FitResult {
            parameter: "sigma".into(),
            value: sigma,
            uncertainty,
            objective: objective(sigma),
            method: FitMethod {
                weighting: opts.weighting,
                search: "golden-section on closed-form expectation, curvature uncertainty".into(),
                bootstrap_replicates: 0,
            },
        },
        batch: None,
        evaluations,
    })
}

/// Step used for the finite-difference slope in the Monte Carlo uncertainty.
const MC_SLOPE_STEP: f64 = 0.02;

fn fit_sigma_mc(cfg: &ExperimentConfig, f2: f64, opts: &FitOptions) -> Result<SigmaFit> {
    let mut plan = cfg.clone();
    plan.f2 = Some(f2);
    plan.validate()?;
    let targets = qm_targets(&plan);
    let batch_at = |sigma: f64| run_batch(ModelKind::Smeared { sigma }, &plan);
    let objective_of = |batch: &BatchResult| -> Result<f64> {
        let ses: Vec<Option<f64>> = batch.per_angle.iter().map(|a| a.ratio_se).collect();
        let w = weights(opts.weighting, &ses, &targets)?;
        Ok(weighted_sse(&batch.means(), &targets, &w))
    };

    // Every candidate reuses the same stream labels, so the objective is a
    // deterministic function of sigma.
    let xtol = 1e-4;
    let mut evaluations = 0;
    let mut failure: Option<Error> = None;
    let (sigma, _) = golden_section_minimize(
        |s| {
            evaluations += 1;
            match batch_at(s).and_then(|b| objective_of(&b)) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            }
        },
        SIGMA_BRACKET.0,
        SIGMA_BRACKET.1,
        xtol,
        100,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    check_upper_boundary(sigma, xtol)?;

    let center = batch_at(sigma)?;
    let objective = objective_of(&center)?;
    let uncertainty = if opts.bootstrap_replicates >= 2 && plan.experiments >= 2 {
        let h = MC_SLOPE_STEP.min(sigma).max(1e-3);
        let lower = batch_at((sigma - h).max(0.0))?;
        let upper = batch_at(sigma + h)?;
        let span = (sigma + h) - (sigma - h).max(0.0);
        mc_sigma_bootstrap(&center, &lower, &upper, span, &targets, opts)?
    } else {
        None
    };

    Ok(SigmaFit {
        fit: FitResult {
            parameter: "sigma".into(),
            value: sigma,
            uncertainty,
            objective,
            method: FitMethod {
                weighting: opts.weighting,
                search: "golden-section on Monte Carlo batches, linearized bootstrap uncertainty"
                    .into(),
                bootstrap_replicates: opts.bootstrap_replicates,
            },
        },
        batch: Some(center),
        evaluations,
    })
}

/// Resample experiments jointly across the three batches (same stream
/// labels) and take one Gauss-Newton step from the optimum per replicate.
fn mc_sigma_bootstrap(
    center: &BatchResult,
    lower: &BatchResult,
    upper: &BatchResult,
    span: f64,
    targets: &[f64],
    opts: &FitOptions,
) -> Result<Option<f64>> {
    let c = center.ratios_by_angle();
    let lo = lower.ratios_by_angle();
    let hi = upper.ratios_by_angle();
    let mut steps = Vec::with_capacity(opts.bootstrap_replicates);
    for b in 0..opts.bootstrap_replicates {
        let mut stream = derive_stream(opts.seed, StreamDomain::Bootstrap, BOOTSTRAP_SIGMA, b);
        let mut means = Vec::with_capacity(c.len());
        let mut ses = Vec::with_capacity(c.len());
        let mut slopes = Vec::with_capacity(c.len());
        for angle in 0..c.len() {
            let n = c[angle].len();
            let picks: Vec<usize> = (0..n).map(|_| stream.random_range(0..n)).collect();
            let pick = |v: &[f64]| picks.iter().map(|&i| v[i]).collect::<Vec<_>>();
            let (m, se) = mean_and_se(&pick(&c[angle]));
            let (m_lo, _) = mean_and_se(&pick(&lo[angle]));
            let (m_hi, _) = mean_and_se(&pick(&hi[angle]));
            means.push(m);
            ses.push(se);
            slopes.push((m_hi - m_lo) / span);
        }
        let Ok(w) = weights(opts.weighting, &ses, targets) else {
            continue;
        };
        let num: f64 = (0..means.len()).map(|i| w[i] * slopes[i] * (means[i] - targets[i])).sum();
        let den: f64 = (0..means.len()).map(|i| w[i] * slopes[i] * slopes[i]).sum();
        if den > 0.0 {
            steps.push(-num / den);
        }
    }
    Ok(bootstrap_sd(&steps))
}

/// Pearson-style mean `(1/n) sum (m - c)^2 / c` over the batch angles.
pub fn mean_chi_squared(batch: &BatchResult, curve: &dyn Fn(f64) -> f64) -> Result<f64> {
    if batch.per_angle.is_empty() {
        return Err(Error::UndefinedStatistic("batch has no angles".into()));
    }
    let mut total = 0.0;
    for stats in &batch.per_angle {
        if stats.experiments < 2 {
            return Err(Error::UndefinedStatistic(format!(
                "angle {} has {} experiment(s); at least 2 are required",
                stats.angle, stats.experiments
            )));
        }
        let c = curve(stats.angle);
        if !(c > 0.0) {
            return Err(Error::UndefinedStatistic(format!(
                "curve value {c} at angle {} is not positive",
                stats.angle
            )));
        }
        let d = stats.ratio_mean - c;
        total += d * d / c;
    }
    Ok(total / batch.per_angle.len() as f64)
}

/// Label emitted next to every chi-squared value.
pub const CHI_SQUARED_DEFINITION: &str = "mean over angles of (ratio_mean - curve)^2 / curve";
