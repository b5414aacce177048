//! Trials, the experiment grid, and the summary table.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use unroll_core::bounds::bound_report;
use unroll_core::data::{fmt_float, ResultRow};
use unroll_core::train::train;

use crate::config::{trial_seed, ExperimentConfig, GridPoint};
use crate::exit::CliError;
use crate::scenario::build_instance;

/// Trains one network and evaluates the bounds on it.
pub fn run_trial(cfg: &ExperimentConfig, p: &GridPoint, trial: usize) -> Result<ResultRow, CliError> {
    let start = Instant::now();
    let seed = trial_seed(cfg.seed, cfg.scenario, p, trial);
    let inst = build_instance(cfg, p, seed)?;
    let outcome = train(&inst.arch, &inst.spec, &inst.train, &inst.test, &inst.train_config)?;
    let last = outcome.last();
    let y_fro = inst.train.y.frobenius_norm();
    let report = bound_report(&inst.arch, &inst.spec, None, y_fro, inst.train.len(), last.train_l2)?;
    let runtime_s = if cfg.record_runtime {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    };
    Ok(ResultRow {
        scenario: cfg.scenario.as_str().to_string(),
        big_n: p.big_n,
        n: p.n,
        s: p.s,
        p: inst.p,
        kernel_len: inst.kernel_len,
        layers: p.layers,
        spaces: inst.arch.schedule().num_spaces(),
        weights: inst.arch.weight_count(),
        m_train: inst.train.len(),
        m_test: inst.test.len(),
        seed,
        trial,
        epochs: cfg.train.epochs,
        lr: cfg.train.learning_rate,
        r1: inst.spec.r1,
        r2: inst.spec.r2,
        train_mse: last.train_mse,
        test_mse: last.test_mse,
        train_l2: last.train_l2,
        test_l2: last.test_l2,
        ge_signed: last.test_l2 - last.train_l2,
        ge_abs: (last.train_l2 - last.test_l2).abs(),
        alpha: report.alpha,
        alpha_mode: report.alpha_mode.as_str().to_string(),
        b_inf: report.b_inf,
        d_inf: report.d_inf,
        w_inf: report.w_inf,
        y_fro,
        k_l: report.k_l,
        m_l: report.m_l,
        o_l: report.o_l,
        q_l: report.q_l,
        rad_bound: report.rad_bound,
        bound_thm1: report.full_bound,
        bound_cor1: report.corollary_bound.unwrap_or(f64::NAN),
        runtime_s,
    })
}

/// Every grid point times every repeat, in grid order then trial order.
pub fn jobs(cfg: &ExperimentConfig) -> Vec<(GridPoint, usize)> {
    cfg.points()
        .into_iter()
        .flat_map(|p| (0..cfg.repeats).map(move |t| (p, t)))
        .collect()
}

/// Runs all jobs on the current rayon pool. Results come back in job order
/// whatever the scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Vec<Result<ResultRow, CliError>> {
    jobs(cfg)
        .par_iter()
        .map(|(p, t)| run_trial(cfg, p, *t))
        .collect()
}

pub const SUMMARY_METRICS: [&str; 7] = [
    "train_l2", "test_l2", "ge_signed", "ge_abs", "rad_bound", "bound_thm1", "bound_cor1",
];

fn metric(row: &ResultRow, name: &str) -> f64 {
    match name {
        "train_l2" => row.train_l2,
        "test_l2" => row.test_l2,
        "ge_signed" => row.ge_signed,
        "ge_abs" => row.ge_abs,
        "rad_bound" => row.rad_bound,
        "bound_thm1" => row.bound_thm1,
        "bound_cor1" => row.bound_cor1,
        _ => unreachable!("unknown metric {name}"),
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub point: GridPoint,
    pub trials: usize,
    /// `(mean, std)` per entry of [`SUMMARY_METRICS`].
    pub stats: Vec<(f64, f64)>,
}

/// Groups rows by grid point, keeping first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut out: Vec<(GridPoint, Vec<&ResultRow>)> = Vec::new();
    for row in rows {
        let point = GridPoint {
            big_n: row.big_n,
            n: row.n,
            s: row.s,
            layers: row.layers,
            m_train: row.m_train,
        };
        match out.iter_mut().find(|(p, _)| *p == point) {
            Some((_, group)) => group.push(row),
            None => out.push((point, vec![row])),
        }
    }
    out.into_iter()
        .map(|(point, group)| SummaryRow {
            scenario: group[0].scenario.clone(),
            point,
            trials: group.len(),
            stats: SUMMARY_METRICS
                .iter()
                .map(|m| mean_std(&group.iter().map(|r| metric(r, m)).collect::<Vec<_>>()))
                .collect(),
        })
        .collect()
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["scenario", "N", "n", "s", "L", "m_train", "trials"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for m in SUMMARY_METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    let csv_err = |e: csv::Error| CliError::runtime(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let p = &r.point;
        let mut rec = vec![
            r.scenario.clone(),
            p.big_n.to_string(),
            p.n.to_string(),
            p.s.to_string(),
            p.layers.to_string(),
            p.m_train.to_string(),
            r.trials.to_string(),
        ];
        for &(mean, std) in &r.stats {
            rec.push(fmt_float(mean));
            rec.push(fmt_float(std));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(CliError::from)
}
