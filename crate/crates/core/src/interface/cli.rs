//! Command-line surface.
//!
//! Settings resolve as flags over config file over built-in defaults. Exit
//! codes: 0 success, 1 usage or validation error, 2 runtime error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::fitting::{fit_f2, fit_sigma, FitOptions, SigmaObjective, Weighting, DEFAULT_BOOTSTRAP_REPLICATES};
use crate::interface::config::{parse_document, to_config_text};
use crate::interface::output::{
    batches_from_experiments, ensure_dir, experiment_rows, read_experiments, read_text, result_rows, unix_now,
    write_experiments, write_manifest, write_results, write_text, RunManifest, CONFIG_FILE, EXPERIMENTS_FILE,
    MANIFEST_FILE, RESULTS_FILE,
};
use crate::interface::pipeline::{replicate, ReplicateOptions, ERROR_BAR_NOTE};
use crate::interface::plot::{figure1, figure2, single};
use crate::interface::config::parse_config;
use crate::models::ModelKind;
use crate::physics::{
    classical_amplitude, classical_coincidence_ratio, qm_amplitude, qm_coincidence_ratio, shared_constant,
    ExperimentConfig,
};
use crate::runner::run_batch;

/// Worker-count environment variable; unset means all cores.
pub const WORKERS_ENV: &str = "BELLSIM_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "bellsim", version, about = "Coincidence-experiment Monte Carlo and fits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct CommonArgs {
    /// TOML config document.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Pairs per experiment.
    #[arg(long)]
    pairs: Option<u64>,
    /// Experiments per angle.
    #[arg(long)]
    experiments: Option<u64>,
    #[arg(long)]
    f2: Option<f64>,
    /// Smearing width in radians.
    #[arg(long)]
    sigma: Option<f64>,
    /// max-probability or unit.
    #[arg(long)]
    normalization: Option<String>,
    /// Worker threads; overrides BELLSIM_WORKERS.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct FitArgs {
    /// pearson, inverse-variance or uniform.
    #[arg(long, default_value = "pearson")]
    weighting: String,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_REPLICATES)]
    bootstrap: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the quantum and classical curves.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        /// Angles in radians; defaults to the configured grid.
        #[arg(long)]
        phi: Vec<f64>,
    },
    /// Run one model batch.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// collapse, local-realistic or smeared.
        #[arg(long)]
        model: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fit F2 or the smearing width.
    Fit {
        #[command(subcommand)]
        target: FitTarget,
    },
    /// Full pipeline: F2 fit, three model batches, sigma fit, reports, plots.
    Replicate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Multiplies the experiment count.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Rebuild tables and plots from a stored run directory.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum FitTarget {
    F2 {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        fit: FitArgs,
    },
    Sigma {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// mc or closed-form.
        #[arg(long, default_value = "mc")]
        mode: String,
    },
}

/// Run the CLI on `args` (program name first) and return the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn resolve_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => parse_document(&read_text(path)?)?.apply_to(&ExperimentConfig::default())?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = common.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = common.pairs {
        cfg.pairs_per_experiment = v;
    }
    if let Some(v) = common.experiments {
        cfg.experiments = v;
    }
    if let Some(v) = common.f2 {
        cfg.f2 = Some(v);
    }
    if let Some(v) = common.sigma {
        cfg.sigma = Some(v);
    }
    if let Some(v) = &common.normalization {
        cfg.normalization = v.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn worker_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::validation(&[WORKERS_ENV], format!("{v:?} is not a worker count"))),
        Err(_) => Ok(None),
    }
}

fn with_workers<T>(flag: Option<usize>, job: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count(flag)? {
        if n == 0 {
            return Err(Error::validation(&["workers"], "worker count must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
    pool.install(job)
}

fn fit_options(fit: &FitArgs, cfg: &ExperimentConfig) -> Result<FitOptions> {
    let weighting: Weighting = fit.weighting.parse()?;
    Ok(FitOptions {
        bootstrap_replicates: fit.bootstrap,
        ..FitOptions::new(weighting, cfg.master_seed)
    })
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::path::absolute(path).map_err(|e| Error::io(path, e))
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Predict { common, phi } => predict(&common, &phi),
        Command::Run { common, model, out } => run(&common, &model, &out),
        Command::Fit { target } => match target {
            FitTarget::F2 { common, fit } => fit_f2_cmd(&common, &fit),
            FitTarget::Sigma { common, fit, mode } => fit_sigma_cmd(&common, &fit, &mode),
        },
        Command::Replicate { common, fit, scale, out } => replicate_cmd(&common, &fit, scale, &out),
        Command::Report { input, out } => report(&input, out.as_deref().unwrap_or(&input)),
    }
}

fn predict(common: &CommonArgs, phis: &[f64]) -> Result<()> {
    let cfg = resolve_config(common)?;
    let angles = if phis.is_empty() { cfg.angles.clone() } else { phis.to_vec() };
    println!(
        "quantum: constant {:.6} amplitude {:.6}; classical: constant {:.6} amplitude {:.6}",
        shared_constant(&cfg),
        qm_amplitude(&cfg),
        shared_constant(&cfg),
        classical_amplitude(&cfg)
    );
    println!("{:>14} {:>10} {:>10}", "phi_rad", "quantum", "classical");
    for phi in angles {
        println!(
            "{:>14.10} {:>10.6} {:>10.6}",
            phi,
            qm_coincidence_ratio(phi, &cfg),
            classical_coincidence_ratio(phi, &cfg)
        );
    }
    Ok(())
}

fn snapshot_config(dir: &Path, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let path = dir.join(CONFIG_FILE);
    write_text(&path, &to_config_text(cfg)?)?;
    Ok(path)
}

fn run(common: &CommonArgs, model: &str, out: &Path) -> Result<()> {
    let started = unix_now();
    let mut cfg = resolve_config(common)?;
    let kind = ModelKind::parse(model, cfg.sigma)?;
    if cfg.f2.is_none() {
        cfg.f2 = Some(1.0);
    }
    let batch = with_workers(common.workers, || run_batch(kind, &cfg))?;

    let dir = absolute(&ensure_dir(out)?)?;
    let config_path = snapshot_config(&dir, &cfg)?;
    let results_path = dir.join(RESULTS_FILE);
    let experiments_path = dir.join(EXPERIMENTS_FILE);
    write_results(&results_path, &result_rows(&batch))?;
    write_experiments(&experiments_path, &experiment_rows(&batch))?;

    let mut manifest = RunManifest::new("run", &cfg, started);
    manifest.reproduce = vec![
        "bellsim".into(),
        "run".into(),
        "--config".into(),
        config_path.display().to_string(),
        "--model".into(),
        kind.name().into(),
        "--out".into(),
        dir.display().to_string(),
    ];
    manifest.add_output(&config_path, "config snapshot");
    manifest.add_output(&results_path, "per-angle results");
    manifest.add_output(&experiments_path, "per-experiment counts");
    manifest.notes.push(ERROR_BAR_NOTE.into());
    manifest.finished_unix_s = unix_now();
    write_manifest(&dir.join(MANIFEST_FILE), &manifest)?;

    for s in &batch.per_angle {
        println!(
            "{} phi={:.6} ratio={:.6} se={}",
            kind.name(),
            s.angle,
            s.ratio_mean,
            s.ratio_se.map(|v| format!("{v:.6}")).unwrap_or_else(|| "n/a".into())
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn fit_f2_cmd(common: &CommonArgs, fit: &FitArgs) -> Result<()> {
    let mut cfg = resolve_config(common)?;
    cfg.f2 = Some(1.0);
    let opts = fit_options(fit, &cfg)?;
    let result = with_workers(common.workers, || {
        let batch = run_batch(ModelKind::Collapse, &cfg)?;
        fit_f2(&batch, &opts)
    })?;
    println!("{result}");
    Ok(())
}

fn fit_sigma_cmd(common: &CommonArgs, fit: &FitArgs, mode: &str) -> Result<()> {
    let cfg = resolve_config(common)?;
    let mode: SigmaObjective = mode.parse()?;
    let f2 = cfg
        .f2
        .ok_or_else(|| Error::validation(&["f2"], "fit sigma needs f2 (flag or config key)"))?;
    let opts = fit_options(fit, &cfg)?;
    let result = with_workers(common.workers, || fit_sigma(&cfg, f2, mode, &opts))?;
    println!("{}", result.fit);
    Ok(())
}

fn replicate_cmd(common: &CommonArgs, fit: &FitArgs, scale: f64, out: &Path) -> Result<()> {
    let started = unix_now();
    let mut cfg = resolve_config(common)?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::validation(&["scale"], format!("scale {scale} must be positive")));
    }
    cfg.experiments = ((cfg.experiments as f64 * scale).round() as u64).max(2);
    // F2 and sigma are fitted here, never taken from input.
    cfg.f2 = None;
    cfg.sigma = None;
    let opts = fit_options(fit, &cfg)?;
    let rep = with_workers(common.workers, || replicate(&cfg, &ReplicateOptions::new(opts)))?;

    let dir = absolute(&ensure_dir(out)?)?;
    let config_path = snapshot_config(&dir, &cfg)?;
    let results_path = dir.join(RESULTS_FILE);
    let experiments_path = dir.join(EXPERIMENTS_FILE);
    let summary_path = dir.join("summary.json");
    let fig1_path = dir.join("figure1.svg");
    let fig2_path = dir.join("figure2.svg");

    let mut rows = Vec::new();
    let mut experiments = Vec::new();
    for b in rep.batches() {
        rows.extend(result_rows(b));
        experiments.extend(experiment_rows(b));
    }
    write_results(&results_path, &rows)?;
    write_experiments(&experiments_path, &experiments)?;
    let summary =
        serde_json::to_string_pretty(&rep.summary).map_err(|e| Error::Parse(e.to_string()))? + "\n";
    write_text(&summary_path, &summary)?;
    figure1(&rep.collapse, &rep.local).write(&fig1_path)?;
    figure2(&rep.smeared).write(&fig2_path)?;

    let mut manifest = RunManifest::new("replicate", &cfg, started);
    manifest.reproduce = vec![
        "bellsim".into(),
        "replicate".into(),
        "--config".into(),
        config_path.display().to_string(),
        "--weighting".into(),
        opts.weighting.as_str().into(),
        "--bootstrap".into(),
        opts.bootstrap_replicates.to_string(),
        "--out".into(),
        dir.display().to_string(),
    ];
    manifest.add_output(&config_path, "config snapshot; experiments already scaled");
    manifest.add_output(&results_path, "per-angle results for the three models");
    manifest.add_output(&experiments_path, "per-experiment counts with the applied F2");
    manifest.add_output(&summary_path, "fits, deviation bands, chi-squared and correlation length");
    manifest.add_output(&fig1_path, "collapse and local realistic models against both curves");
    manifest.add_output(&fig2_path, "smeared model against both curves");
    manifest.notes.extend(rep.summary.notes.iter().cloned());
    manifest.finished_unix_s = unix_now();
    write_manifest(&dir.join(MANIFEST_FILE), &manifest)?;

    print_summary(&rep.summary);
    println!("wrote {}", dir.display());
    Ok(())
}

fn print_summary(s: &crate::interface::pipeline::ReplicationSummary) {
    println!("{}", s.f2);
    println!("{}", s.sigma);
    println!("closed-form {}", s.sigma_closed_form);
    println!("diagnostic {}", s.f2_smeared_refit);
    for (name, report) in [
        ("collapse vs quantum", &s.collapse_vs_qm),
        ("local realistic vs classical", &s.local_vs_classical),
        ("smeared vs quantum", &s.smeared_vs_qm),
    ] {
        let band = |b: Option<crate::analysis::Band>| {
            b.map(|b| format!("{:.2}%..{:.2}%", b.min_abs_pct, b.max_abs_pct)).unwrap_or_else(|| "n/a".into())
        };
        println!(
            "{name}: small-angle {}, large-angle {}, max {:.2}%",
            band(report.small_angle),
            band(report.large_angle),
            report.max_abs_percent().unwrap_or(f64::NAN)
        );
    }
    println!(
        "chi-squared ({}): collapse {:.6e}, smeared {:.6e}, ratio {:.1}",
        s.chi_squared_definition, s.chi_squared_collapse, s.chi_squared_smeared, s.chi_squared_ratio
    );
    println!(
        "r_c = {:.4e} +/- {:.4e} cm",
        s.correlation_length.r_c_cm, s.correlation_length.uncertainty_cm
    );
}

fn report(input: &Path, out: &Path) -> Result<()> {
    let cfg = parse_config(&read_text(&input.join(CONFIG_FILE))?)?;
    let rows = read_experiments(&input.join(EXPERIMENTS_FILE))?;
    let batches = batches_from_experiments(&rows, &cfg)?;
    let dir = ensure_dir(out)?;
    let table: Vec<_> = batches.iter().flat_map(result_rows).collect();
    write_results(&dir.join(RESULTS_FILE), &table)?;

    let qm = |phi: f64| qm_coincidence_ratio(phi, &cfg);
    for b in &batches {
        let chi2 = crate::fitting::mean_chi_squared(b, &qm)
            .map(|v| format!("{v:.6e}"))
            .unwrap_or_else(|e| format!("undefined ({e})"));
        println!("{} f2={:.6} chi-squared vs quantum {chi2}", b.model, b.f2);
    }
    let find = |name: &str| batches.iter().find(|b| b.model.name() == name);
    if let (Some(c), Some(l)) = (find("collapse"), find("local-realistic")) {
        figure1(c, l).write(&dir.join("figure1.svg"))?;
    }
    if let Some(s) = find("smeared") {
        figure2(s).write(&dir.join("figure2.svg"))?;
    }
    if batches.len() == 1 {
        single(&batches[0]).write(&dir.join("plot.svg"))?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}
