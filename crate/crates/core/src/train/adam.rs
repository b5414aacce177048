use super::backward::Gradients;
use super::TrainConfig;
use crate::model::Params;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Params,
    v: Params,
    t: u64,
}

impl AdamState {
    pub fn new(params: &Params) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update of every trainable leaf. Stepsizes and
/// thresholds are skipped unless enabled in `config`.
pub fn adam_step(state: &mut AdamState, params: &mut Params, grads: &Gradients, config: &TrainConfig) {
    state.t += 1;
    let t = state.t as f64;
    let c1 = 1.0 - BETA1.powf(t);
    let c2 = 1.0 - BETA2.powf(t);
    let lr = config.learning_rate;
    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..p.len() {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    };
    for (j, block) in params.blocks.iter_mut().enumerate() {
        update(
            block.values_mut(),
            grads.blocks[j].values(),
            state.m.blocks[j].values_mut(),
            state.v.blocks[j].values_mut(),
        );
    }
    if config.train_tau {
        update(&mut params.tau, &grads.tau, &mut state.m.tau, &mut state.v.tau);
    }
    if config.train_lambda {
        update(
            &mut params.lambda,
            &grads.lambda,
            &mut state.m.lambda,
            &mut state.v.lambda,
        );
    }
}
