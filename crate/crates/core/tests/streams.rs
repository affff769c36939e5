mod common;

use bellsim::randomness::{derive_stream, StreamDomain};
use bellsim::runner::{run_batch, run_experiment};
use bellsim::{ExperimentConfig, ModelKind};
use common::{ks_critical_001, ks_statistic};

const N: usize = 20_000;

fn draws(domain: StreamDomain, angle: usize, exp: usize) -> Vec<f64> {
    let mut s = derive_stream(2026, domain, angle, exp);
    (0..N).map(|_| s.next_unit()).collect()
}

#[test]
fn neighbouring_streams_are_uniform_and_independent() {
    let base = draws(StreamDomain::Collapse, 0, 0);
    let neighbours = [
        draws(StreamDomain::Collapse, 0, 1),
        draws(StreamDomain::Collapse, 1, 0),
        draws(StreamDomain::Smeared, 0, 0),
        draws(StreamDomain::Bootstrap, 0, 0),
    ];
    let crit = ks_critical_001(N);
    assert!(ks_statistic(base.clone(), |x| x) < crit);
    for other in &neighbours {
        assert!(ks_statistic(other.clone(), |x| x) < crit);
        // For independent uniforms, frac(u + v) is uniform and |u - v| has
        // CDF 1 - (1 - x)^2.
        let sums: Vec<f64> = base.iter().zip(other).map(|(u, v)| (u + v).fract()).collect();
        let gaps: Vec<f64> = base.iter().zip(other).map(|(u, v)| (u - v).abs()).collect();
        assert!(ks_statistic(sums, |x| x) < crit);
        assert!(ks_statistic(gaps, |x| 1.0 - (1.0 - x).powi(2)) < crit);
    }
}

#[test]
fn lagged_draws_within_a_stream_are_independent() {
    let u = draws(StreamDomain::LocalRealistic, 3, 7);
    let sums: Vec<f64> = u.windows(2).map(|w| (w[0] + w[1]).fract()).collect();
    assert!(ks_statistic(sums, |x| x) < ks_critical_001(N - 1));
}

fn plan() -> ExperimentConfig {
    ExperimentConfig {
        pairs_per_experiment: 2_000,
        experiments: 6,
        f2: Some(0.95),
        master_seed: 99,
        ..Default::default()
    }
}

#[test]
fn worker_count_does_not_change_results() {
    for model in [ModelKind::Collapse, ModelKind::LocalRealistic, ModelKind::Smeared { sigma: 0.3 }] {
        let run_on = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_batch(model, &plan()).unwrap())
        };
        let one = run_on(1);
        let four = run_on(4);
        assert_eq!(one, four);
    }
}

#[test]
fn any_unit_reruns_in_isolation_and_in_any_order() {
    let cfg = plan();
    let model = ModelKind::Smeared { sigma: 0.2 };
    let batch = run_batch(model, &cfg).unwrap();
    let units: Vec<(usize, usize)> = (0..cfg.angles.len())
        .flat_map(|a| (0..cfg.experiments as usize).map(move |e| (a, e)))
        .collect();
    // Reverse, then a stride permutation.
    let mut order: Vec<(usize, usize)> = units.iter().rev().copied().collect();
    order.extend((0..units.len()).map(|i| units[(i * 7) % units.len()]));
    for (a, e) in order {
        let alone = run_experiment(model, a, e, &cfg).unwrap();
        let in_batch = batch
            .results
            .iter()
            .find(|r| r.angle_index == a && r.experiment_index == e)
            .unwrap();
        assert_eq!(&alone, in_batch);
    }
}

#[test]
fn seed_changes_results() {
    let a = run_batch(ModelKind::Collapse, &plan()).unwrap();
    let b = run_batch(ModelKind::Collapse, &ExperimentConfig { master_seed: 100, ..plan() }).unwrap();
    assert_ne!(a.results, b.results);
}
