//! Losses, reverse-mode gradients, and projected Adam training.

pub mod adam;
pub mod backward;
pub mod gradcheck;
pub mod loss;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState};
pub use backward::{backward, value_and_grad, Gradients};
pub use gradcheck::{grad_check, relative_error, sample_params, GradCheckOptions, GradCheckReport};
pub use loss::{l2_loss, loss, loss_and_grad, mse_loss, ortho_penalty, ortho_penalty_grad, LossKind};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{forward, Architecture, HypothesisClassSpec, MapKind, Params, WeightBlock};
use crate::numkit::{norm2, random_gaussian_matrix, spectral_norm, Matrix, SeededRng};

/// Full batch is used up to this many training samples.
pub const FULL_BATCH_LIMIT: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_tau: bool,
    pub train_lambda: bool,
    pub ortho_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            epochs: 10,
            batch_size: 128,
            train_tau: false,
            train_lambda: false,
            ortho_weight: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidSpec("batch size must be positive".into()));
        }
        if !(self.ortho_weight >= 0.0) {
            return Err(Error::InvalidSpec("ortho_weight must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Losses after each epoch; epoch 0 is the initialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_mse: f64,
    pub train_l2: f64,
    pub test_l2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub initial: Params,
    pub params: Params,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn last(&self) -> &EpochRecord {
        self.history.last().expect("history has the initial record")
    }
}

/// Clamps stepsizes and thresholds into their boxes and rescales every block
/// whose norm exceeds `W∞`.
pub fn project_params(params: &Params, spec: &HypothesisClassSpec) -> Result<Params> {
    let mut out = params.clone();
    for (t, c) in out.tau.iter_mut().zip(&spec.tau0) {
        *t = t.clamp(c - spec.r1, c + spec.r1);
    }
    for (l, c) in out.lambda.iter_mut().zip(&spec.lambda0) {
        *l = l.clamp(c - spec.r2, c + spec.r2);
    }
    for block in &mut out.blocks {
        let norm = block.norm()?;
        if norm > spec.w_inf {
            block.scale(spec.w_inf / norm);
        }
    }
    Ok(out)
}

/// Random blocks scaled to norm `min(W∞, 0.9 / max(1, ‖A‖))`, with `τ = τ0`
/// and `λ = λ0`.
pub fn init_params(
    arch: &Architecture,
    spec: &HypothesisClassSpec,
    rng: &mut SeededRng,
) -> Result<Params> {
    let mut blocks = Vec::with_capacity(arch.spaces().len());
    for kind in arch.spaces() {
        let a_norm = spectral_norm(kind.measurement())?;
        let target = spec.w_inf.min(0.9 / a_norm.max(1.0));
        let block = match kind {
            MapKind::Dense { a, atoms } => {
                let g = random_gaussian_matrix(rng, a.cols(), *atoms);
                let norm = spectral_norm(&g)?;
                WeightBlock::Dense(g.scale(target / norm))
            }
            MapKind::Conv { kernel_len, .. } => {
                let w: Vec<f64> = (0..*kernel_len).map(|_| rng.normal()).collect();
                let norm = norm2(&w);
                WeightBlock::Kernel(w.iter().map(|v| v * target / norm).collect())
            }
        };
        blocks.push(block);
    }
    Ok(Params::new(blocks, spec.tau0.clone(), spec.lambda0.clone()))
}

/// Sum of the orthogonality penalties of all square dense blocks, with the
/// matching gradient added into `grads` scaled by `weight`.
pub fn add_ortho_penalty(params: &Params, weight: f64, grads: &mut Gradients) -> Result<f64> {
    let mut total = 0.0;
    if weight == 0.0 {
        return Ok(total);
    }
    for (block, g) in params.blocks.iter().zip(grads.blocks.iter_mut()) {
        if let WeightBlock::Dense(phi) = block {
            if phi.is_square() {
                let (value, d) = ortho_penalty_grad(phi)?;
                total += value;
                for (gi, di) in g.values_mut().iter_mut().zip(d.as_slice()) {
                    *gi += weight * di;
                }
            }
        }
    }
    Ok(weight * total)
}

pub fn evaluate(arch: &Architecture, params: &Params, data: &Dataset) -> Result<(f64, f64)> {
    let h = forward(arch, params, &data.y)?.output;
    Ok((mse_loss(&h, &data.x)?, l2_loss(&h, &data.x)?))
}

fn record(
    epoch: usize,
    arch: &Architecture,
    params: &Params,
    train: &Dataset,
    test: &Dataset,
) -> Result<EpochRecord> {
    let (train_mse, train_l2) = evaluate(arch, params, train)?;
    let (test_mse, test_l2) = evaluate(arch, params, test)?;
    Ok(EpochRecord {
        epoch,
        train_mse,
        test_mse,
        train_l2,
        test_l2,
    })
}

/// Initializes from `config.seed` and trains.
pub fn train(
    arch: &Architecture,
    spec: &HypothesisClassSpec,
    train_set: &Dataset,
    test_set: &Dataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut rng = SeededRng::new(config.seed);
    let init = project_params(&init_params(arch, spec, &mut rng)?, spec)?;
    train_from(arch, spec, init, train_set, test_set, config, &mut rng)
}

/// Minibatch Adam on `mse + ortho_weight · penalty`, projecting after every
/// step. Batches are reshuffled each epoch from `rng`.
pub fn train_from(
    arch: &Architecture,
    spec: &HypothesisClassSpec,
    init: Params,
    train_set: &Dataset,
    test_set: &Dataset,
    config: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<TrainOutcome> {
    config.validate()?;
    spec.validate(arch.layers())?;
    init.validate(arch)?;
    let m = train_set.len();
    if m == 0 {
        return Err(Error::dims("empty training set"));
    }
    let batch = if m <= FULL_BATCH_LIMIT {
        m
    } else {
        config.batch_size.min(m)
    };
    let mut params = init.clone();
    let mut state = AdamState::new(&params);
    let mut history = vec![record(0, arch, &params, train_set, test_set)?];
    let mut order: Vec<usize> = (0..m).collect();
    for epoch in 1..=config.epochs {
        if batch < m {
            rng.shuffle(&mut order);
        }
        for chunk in order.chunks(batch) {
            let (y, x): (Matrix, Matrix) = if batch == m {
                (train_set.y.clone(), train_set.x.clone())
            } else {
                (train_set.y.select_columns(chunk), train_set.x.select_columns(chunk))
            };
            let (_, mut grads) = value_and_grad(arch, &params, &y, &x, LossKind::Mse)?;
            add_ortho_penalty(&params, config.ortho_weight, &mut grads)?;
            adam_step(&mut state, &mut params, &grads, config);
            params = project_params(&params, spec)?;
            if !params.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite parameters in epoch {epoch}"
                )));
            }
        }
        history.push(record(epoch, arch, &params, train_set, test_set)?);
    }
    Ok(TrainOutcome {
        initial: init,
        params,
        history,
    })
}
