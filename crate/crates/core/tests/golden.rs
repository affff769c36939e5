//! Frozen output of a miniature run. Set `BELLSIM_BLESS=1` to regenerate
//! after an intentional change to the sampling order.

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use bellsim::interface::output::{read_results, result_rows, write_results};
use bellsim::runner::run_batch;
use bellsim::{ExperimentConfig, ModelKind};

#[test]
fn miniature_run_matches_golden_file() {
    let cfg = ExperimentConfig {
        angles: vec![0.0, FRAC_PI_4],
        experiments: 3,
        pairs_per_experiment: 1000,
        master_seed: 20_261_014,
        f2: Some(0.9222),
        ..Default::default()
    };
    let mut rows = Vec::new();
    for model in [ModelKind::Collapse, ModelKind::LocalRealistic, ModelKind::Smeared { sigma: 0.2131 }] {
        rows.extend(result_rows(&run_batch(model, &cfg).unwrap()));
    }
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/mini_results.csv");
    let dir = tempfile::tempdir().unwrap();
    let fresh = dir.path().join("results.csv");
    write_results(&fresh, &rows).unwrap();
    if std::env::var_os("BELLSIM_BLESS").is_some() {
        std::fs::copy(&fresh, &golden).unwrap();
    }
    assert_eq!(std::fs::read_to_string(&fresh).unwrap(), std::fs::read_to_string(&golden).unwrap());
    assert_eq!(read_results(&golden).unwrap(), rows);
}
