mod common;

use bellsim::fitting::{fit_f2, fit_scale, fit_sigma, mean_chi_squared, FitOptions, SigmaObjective, Weighting};
use bellsim::physics::{collapse_amplitude, qm_amplitude, qm_coincidence_ratio};
use bellsim::{ExperimentConfig, ModelKind};
use common::exact_batch;
use proptest::prelude::*;

#[test]
fn f2_recovers_inverse_scale_exactly() {
    let cfg = ExperimentConfig::default();
    let q: Vec<f64> = cfg.angles.iter().map(|&phi| qm_coincidence_ratio(phi, &cfg)).collect();
    for c in [0.5, 1.0, 2.0] {
        let means: Vec<f64> = q.iter().map(|v| c * v).collect();
        for weighting in [Weighting::Pearson, Weighting::Uniform, Weighting::InverseVariance] {
            let batch = exact_batch(&cfg, ModelKind::Collapse, &means, Some(1e-3));
            let fit = fit_f2(&batch, &FitOptions::new(weighting, 1)).unwrap();
            assert!((fit.value * c - 1.0).abs() < 1e-12, "{weighting:?} c={c}: {}", fit.value);
            assert!(fit.objective < 1e-20);
        }
    }
}

#[test]
fn inverse_variance_needs_errors() {
    let cfg = ExperimentConfig::default();
    let means = vec![0.3; cfg.angles.len()];
    let batch = exact_batch(&cfg, ModelKind::Collapse, &means, None);
    assert!(fit_f2(&batch, &FitOptions::new(Weighting::InverseVariance, 1)).is_err());
    assert!(fit_f2(&batch, &FitOptions::new(Weighting::Uniform, 1)).is_ok());
}

proptest! {
    #[test]
    fn scale_fit_is_exact_for_proportional_data(
        c in 0.1f64..10.0,
        q in proptest::collection::vec(0.01f64..0.5, 1..12),
        w in 0.1f64..10.0,
    ) {
        let means: Vec<f64> = q.iter().map(|v| v / c).collect();
        let weights = vec![w; q.len()];
        let (s, _) = fit_scale(&means, &q, &weights).unwrap();
        prop_assert!((s / c - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sigma_is_zero_when_collapse_already_matches() {
    let cfg = ExperimentConfig::default();
    let f2 = qm_amplitude(&cfg) / collapse_amplitude(&cfg);
    let fit = fit_sigma(&cfg, f2, SigmaObjective::ClosedForm, &FitOptions::new(Weighting::Uniform, 1)).unwrap();
    // The objective is quartic in sigma near zero, so the search resolves
    // sigma only to about 1e-4 before double rounding takes over.
    let sigma = fit.fit.value;
    assert!(sigma < 1e-4, "{sigma}");
    let amp = f2 * collapse_amplitude(&cfg) * (-2.0 * sigma * sigma).exp();
    assert!((amp / qm_amplitude(&cfg) - 1.0).abs() < 1e-8);
}

#[test]
fn chi_squared_is_zero_only_at_the_curve() {
    let cfg = ExperimentConfig::default();
    let curve = |phi: f64| qm_coincidence_ratio(phi, &cfg);
    let exact: Vec<f64> = cfg.angles.iter().map(|&p| curve(p)).collect();
    let batch = exact_batch(&cfg, ModelKind::Collapse, &exact, Some(1e-3));
    assert_eq!(mean_chi_squared(&batch, &curve).unwrap(), 0.0);
    let mut off = exact.clone();
    off[4] += 1e-4;
    let batch = exact_batch(&cfg, ModelKind::Collapse, &off, Some(1e-3));
    let chi2 = mean_chi_squared(&batch, &curve).unwrap();
    let expected = 1e-8 / curve(cfg.angles[4]) / 9.0;
    assert!((chi2 / expected - 1.0).abs() < 1e-6);
}
