use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use unroll_core::audit::{gradient_audit, output_bound_audit, perturbation_audit, psi_audit, AuditSummary};
use unroll_core::bounds::{bound_report, BoundReport, VerifyOptions};
use unroll_core::data::{fmt_float, write_container, write_results_csv};
use unroll_core::model::Params;
use unroll_core::train::{evaluate, train, EpochRecord};

use crate::config::{trial_seed, ExperimentConfig, Scenario};
use crate::exit::{CliError, EXIT_OK, EXIT_RUNTIME, EXIT_VIOLATIONS};
use crate::runner::{run_experiment, summarize, write_summary};
use crate::scenario::{build_instance, synthetic_spec};

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct GlobalOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub paper_scale: bool,
    pub threads: Option<usize>,
}

/// Loads the config (or the defaults), applies the command-line overrides
/// and validates the result.
pub fn resolve_config(opts: &GlobalOptions) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &opts.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if opts.paper_scale {
        cfg.apply_paper_scale();
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(e.to_string()))?;
    fs::write(path, text + "\n")
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", path.display())))
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| CliError::runtime(e.to_string());
    w.write_record(["epoch", "train_mse", "test_mse", "train_l2", "test_l2"])
        .map_err(csv_err)?;
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            fmt_float(r.train_mse),
            fmt_float(r.test_mse),
            fmt_float(r.train_l2),
            fmt_float(r.test_l2),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(CliError::from)
}

/// Trains trial 0 of the first grid point. Writes `config.json`,
/// `params.json` and `history.csv`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<u8, CliError> {
    let dir = out_dir(cfg)?;
    let point = cfg.points()[0];
    let seed = trial_seed(cfg.seed, cfg.scenario, &point, 0);
    println!(
        "scenario={} N={} n={} s={} L={} m_train={} seed={} lr={} epochs={}",
        cfg.scenario.as_str(),
        point.big_n,
        point.n,
        point.s,
        point.layers,
        point.m_train,
        seed,
        cfg.train.learning_rate,
        cfg.train.epochs
    );
    write_json(&dir.join("config.json"), cfg)?;
    let inst = build_instance(cfg, &point, seed)?;
    let outcome = train(&inst.arch, &inst.spec, &inst.train, &inst.test, &inst.train_config)?;
    write_json(&dir.join("params.json"), &outcome.params)?;
    write_history(&dir.join("history.csv"), &outcome.history)?;
    let first = &outcome.history[0];
    let last = outcome.last();
    println!(
        "initial train_l2={:.6} test_l2={:.6}",
        first.train_l2, first.test_l2
    );
    println!(
        "final   train_l2={:.6} test_l2={:.6} train_mse={:.6} test_mse={:.6}",
        last.train_l2, last.test_l2, last.train_mse, last.test_mse
    );
    Ok(EXIT_OK)
}

/// Bound report for the first grid point, optionally at a trained
/// parameter snapshot.
pub fn bound_for(cfg: &ExperimentConfig, params_path: Option<&Path>) -> Result<BoundReport, CliError> {
    let point = cfg.points()[0];
    let seed = trial_seed(cfg.seed, cfg.scenario, &point, 0);
    let inst = build_instance(cfg, &point, seed)?;
    let params: Option<Params> = match params_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            let p: Params = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("bad params snapshot: {e}")))?;
            p.validate(&inst.arch).map_err(|e| CliError::config(e.to_string()))?;
            Some(p)
        }
        None => None,
    };
    let lemp = match (&params, cfg.bound.lemp) {
        (_, Some(v)) => v,
        (Some(p), None) => evaluate(&inst.arch, p, &inst.train)?.1,
        (None, None) => 0.0,
    };
    let y_fro = cfg.bound.y_fro.unwrap_or_else(|| inst.train.y.frobenius_norm());
    let m = cfg.bound.m.unwrap_or(inst.train.len());
    Ok(bound_report(&inst.arch, &inst.spec, params.as_ref(), y_fro, m, lemp)?)
}

/// Prints the bound report as JSON and writes it to `bound.json`.
pub fn cmd_bound(cfg: &ExperimentConfig, params_path: Option<&Path>) -> Result<u8, CliError> {
    let report = bound_for(cfg, params_path)?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join("bound.json"), &report)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime(e.to_string()))?
    );
    if let Some(note) = &report.corollary_note {
        eprintln!("corollary bound not evaluated: {note}");
    }
    Ok(EXIT_OK)
}

/// Runs the whole grid. Writes `results.csv` and `summary.csv`; on a failed
/// trial the completed rows are still written and the exit code is 3.
pub fn cmd_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<u8, CliError> {
    let dir = out_dir(cfg)?;
    write_json(&dir.join("config.json"), cfg)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::runtime(format!("cannot start worker pool: {e}")))?;
    let results = pool.install(|| run_experiment(cfg));
    let mut rows = Vec::with_capacity(results.len());
    let mut failures = 0;
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                failures += 1;
                eprintln!("trial failed: {e}");
            }
        }
    }
    write_results_csv(dir.join("results.csv"), &rows)?;
    write_summary(create(&dir.join("summary.csv"))?, &summarize(&rows))?;
    println!(
        "{} rows written to {}",
        rows.len(),
        dir.join("results.csv").display()
    );
    if failures > 0 {
        eprintln!("{failures} trials failed");
        return Ok(EXIT_RUNTIME);
    }
    Ok(EXIT_OK)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub lhs_inflation: f64,
    pub suites: Vec<AuditSummary>,
    pub seconds: Vec<f64>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(AuditSummary::passed)
    }
}

/// All four audit suites with the configured sizes.
pub fn run_verify(cfg: &ExperimentConfig) -> Result<VerifyReport, CliError> {
    let v = &cfg.verify;
    let opts = VerifyOptions { lhs_inflation: v.lhs_inflation };
    let mut suites = Vec::new();
    let mut seconds = Vec::new();
    let mut timed = |f: &mut dyn FnMut() -> unroll_core::Result<AuditSummary>| -> Result<(), CliError> {
        let start = Instant::now();
        suites.push(f()?);
        seconds.push(start.elapsed().as_secs_f64());
        Ok(())
    };
    timed(&mut || gradient_audit(cfg.seed, v.gradient_cases, v.gradient_tolerance))?;
    timed(&mut || output_bound_audit(cfg.seed, v.output_cases, &opts))?;
    timed(&mut || perturbation_audit(cfg.seed, v.perturbation_cases, &opts))?;
    timed(&mut || psi_audit(v.psi_grid))?;
    Ok(VerifyReport {
        seed: cfg.seed,
        lhs_inflation: v.lhs_inflation,
        suites,
        seconds,
    })
}

/// Prints a table per suite and writes `verify.json`. Exit 1 on any
/// violation.
pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<u8, CliError> {
    let report = run_verify(cfg)?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join("verify.json"), &report)?;
    println!("seed {}", report.seed);
    println!(
        "{:<20} {:>6} {:>8} {:>10} {:>14} {:>9}",
        "suite", "cases", "checks", "violations", "max ratio", "seconds"
    );
    for (s, secs) in report.suites.iter().zip(&report.seconds) {
        println!(
            "{:<20} {:>6} {:>8} {:>10} {:>14.6e} {:>9.2}",
            s.suite, s.cases, s.checks.checks, s.checks.violations, s.checks.max_ratio, secs
        );
    }
    if report.passed() {
        println!("all suites passed");
        return Ok(EXIT_OK);
    }
    println!();
    println!("{:<20} {:>6} {:<14} detail", "suite", "case", "family");
    for s in &report.suites {
        for f in &s.failures {
            let family = f
                .family
                .map(|fam| format!("{fam:?}").to_lowercase())
                .unwrap_or_else(|| "-".into());
            println!("{:<20} {:>6} {:<14} {}", s.suite, f.case, family, f.detail);
        }
    }
    Ok(EXIT_VIOLATIONS)
}

/// Writes trial 0 of the first grid point as `train.bin` and `test.bin`
/// with the generating spec in `dataset.json`.
pub fn cmd_datagen(cfg: &ExperimentConfig) -> Result<u8, CliError> {
    if cfg.scenario == Scenario::Mnist {
        return Err(CliError::config("datagen only produces synthetic data"));
    }
    let dir = out_dir(cfg)?;
    let point = cfg.points()[0];
    let seed = trial_seed(cfg.seed, cfg.scenario, &point, 0);
    let spec = synthetic_spec(cfg, &point, seed);
    let data = unroll_core::data::gen_synthetic(&spec)?;
    write_container(dir.join("train.bin"), &data.train)?;
    write_container(dir.join("test.bin"), &data.test)?;
    write_json(&dir.join("dataset.json"), &spec)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "seed {seed}: {} train / {} test samples written to {}", data.train.len(), data.test.len(), dir.display())?;
    Ok(EXIT_OK)
}
