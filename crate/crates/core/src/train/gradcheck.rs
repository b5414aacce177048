use serde::{Deserialize, Serialize};

use super::backward::backward;
use super::loss::{loss, LossKind};
use super::add_ortho_penalty;
use crate::error::{Error, Result};
use crate::model::{forward, Architecture, HypothesisClassSpec, MapKind, Params, WeightBlock};
use crate::numkit::{random_gaussian_matrix, spectral_norm, Matrix, SeededRng};

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Minimum distance of every pre-activation from the threshold kink, and of
/// every pre-clip column norm from `B_out`.
pub const KINK_MARGIN: f64 = 1e-4;
/// Denominator floor of the relative error.
pub const REL_FLOOR: f64 = 1e-4;
const MAX_RESAMPLES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckOptions {
    pub batch: usize,
    pub coords_per_leaf: usize,
    pub check_tau: bool,
    pub check_lambda: bool,
    pub loss: LossKind,
    pub ortho_weight: f64,
    pub fd_step: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            batch: 3,
            coords_per_leaf: 12,
            check_tau: true,
            check_lambda: true,
            loss: LossKind::Mse,
            ortho_weight: 0.0,
            fd_step: FD_STEP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub max_rel_err: f64,
    pub worst_leaf: String,
    pub worst_index: usize,
    pub coordinates: usize,
    pub resamples: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Random parameters inside the class of `spec`: blocks at a random fraction
/// of `W∞`, stepsizes and thresholds uniform in their boxes.
pub fn sample_params(
    arch: &Architecture,
    spec: &HypothesisClassSpec,
    rng: &mut SeededRng,
) -> Result<Params> {
    let mut blocks = Vec::with_capacity(arch.spaces().len());
    for kind in arch.spaces() {
        let scale = spec.w_inf * rng.uniform_range(0.3, 1.0);
        let block = match kind {
            MapKind::Dense { a, atoms } => {
                let g = random_gaussian_matrix(rng, a.cols(), *atoms);
                let norm = spectral_norm(&g)?;
                WeightBlock::Dense(g.scale(scale / norm))
            }
            MapKind::Conv { kernel_len, .. } => {
                let w: Vec<f64> = (0..*kernel_len).map(|_| rng.normal()).collect();
                let norm = crate::numkit::norm2(&w);
                WeightBlock::Kernel(w.iter().map(|v| v * scale / norm).collect())
            }
        };
        blocks.push(block);
    }
    let tau = spec
        .tau0
        .iter()
        .map(|c| rng.uniform_range(c - spec.r1, c + spec.r1))
        .collect();
    let lambda = spec
        .lambda0
        .iter()
        .map(|c| rng.uniform_range(c - spec.r2, c + spec.r2))
        .collect();
    Ok(Params::new(blocks, tau, lambda))
}

fn away_from_kinks(arch: &Architecture, params: &Params, y: &Matrix) -> Result<bool> {
    let trace = forward(arch, params, y)?;
    for (l, u) in trace.pre_activations.iter().enumerate() {
        let theta = params.tau[l] * params.lambda[l];
        if u.as_slice().iter().any(|v| (v.abs() - theta).abs() < KINK_MARGIN) {
            return Ok(false);
        }
    }
    Ok(trace
        .final_linear
        .column_norms()
        .iter()
        .all(|c| (c - arch.b_out()).abs() >= KINK_MARGIN))
}

fn objective(
    arch: &Architecture,
    params: &Params,
    y: &Matrix,
    x: &Matrix,
    opts: &GradCheckOptions,
) -> Result<f64> {
    let h = forward(arch, params, y)?.output;
    let mut scratch = params.zeros_like();
    Ok(loss(opts.loss, &h, x)? + add_ortho_penalty(params, opts.ortho_weight, &mut scratch)?)
}

/// Compares [`backward`] against central differences at a random
/// kink-free point. Fails with [`Error::CheckFailed`] when the worst relative
/// error exceeds `tolerance`.
pub fn grad_check(
    arch: &Architecture,
    spec: &HypothesisClassSpec,
    seed: u64,
    tolerance: f64,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if !(opts.fd_step > 0.0) {
        return Err(Error::InvalidSpec("finite-difference step must be positive".into()));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidSpec("tolerance must be positive".into()));
    }
    spec.validate(arch.layers())?;
    let mut rng = SeededRng::new(seed);
    let mut resamples = 0;
    let (params, y, x) = loop {
        let params = sample_params(arch, spec, &mut rng)?;
        let y = random_gaussian_matrix(&mut rng, arch.input_dim(), opts.batch);
        let x = random_gaussian_matrix(&mut rng, arch.output_dim(), opts.batch).scale(0.5);
        if away_from_kinks(arch, &params, &y)? {
            break (params, y, x);
        }
        resamples += 1;
        if resamples >= MAX_RESAMPLES {
            return Err(Error::PreconditionViolated(
                "no kink-free sample found".into(),
            ));
        }
    };

    let trace = forward(arch, &params, &y)?;
    let (_, mut grads) = backward(arch, &params, &y, &x, opts.loss, &trace)?;
    add_ortho_penalty(&params, opts.ortho_weight, &mut grads)?;

    let j_count = params.blocks.len();
    let mut leaf_ids: Vec<usize> = (0..j_count).collect();
    if opts.check_tau {
        leaf_ids.push(j_count);
    }
    if opts.check_lambda {
        leaf_ids.push(j_count + 1);
    }
    let leaf_name = |k: usize| match k {
        k if k < j_count => format!("W{}", k + 1),
        k if k == j_count => "tau".to_string(),
        _ => "lambda".to_string(),
    };

    let mut report = GradCheckReport {
        seed,
        max_rel_err: 0.0,
        worst_leaf: String::new(),
        worst_index: 0,
        coordinates: 0,
        resamples,
    };
    let mut worst = (0.0, 0.0);
    let analytic_leaves: Vec<Vec<f64>> = grads.leaves().iter().map(|l| l.to_vec()).collect();
    for &k in &leaf_ids {
        let len = analytic_leaves[k].len();
        let picks = if len <= opts.coords_per_leaf {
            (0..len).collect()
        } else {
            rng.sample_subset(len, opts.coords_per_leaf)
        };
        for idx in picks {
            let mut plus = params.clone();
            plus.leaves_mut()[k][idx] += opts.fd_step;
            let mut minus = params.clone();
            minus.leaves_mut()[k][idx] -= opts.fd_step;
            let numeric = (objective(arch, &plus, &y, &x, opts)?
                - objective(arch, &minus, &y, &x, opts)?)
                / (2.0 * opts.fd_step);
            let analytic = analytic_leaves[k][idx];
            let err = relative_error(analytic, numeric);
            report.coordinates += 1;
            if err > report.max_rel_err || report.worst_leaf.is_empty() {
                report.max_rel_err = err;
                report.worst_leaf = leaf_name(k);
                report.worst_index = idx;
                worst = (analytic, numeric);
            }
        }
    }
    if report.max_rel_err > tolerance {
        return Err(Error::CheckFailed {
            leaf: report.worst_leaf,
            index: report.worst_index,
            analytic: worst.0,
            numeric: worst.1,
            rel_err: report.max_rel_err,
        });
    }
    Ok(report)
}
