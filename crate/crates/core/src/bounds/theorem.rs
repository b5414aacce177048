use serde::{Deserialize, Serialize};

use super::constants::{class_constants, klmoq, z_sequence, AlphaMode, ClassConstants, Klmoq};
use crate::error::{Error, Result};
use crate::model::{Architecture, HypothesisClassSpec, Params};
use crate::numkit::psi;

/// Everything the Rademacher term depends on besides the class constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RademacherInputs {
    /// Total weight count `K`.
    pub weights: usize,
    pub layers: usize,
    pub m: usize,
    pub w_inf: f64,
    pub b_out: f64,
    pub r1: f64,
    pub r2: f64,
}

fn check_sample(m: usize, b_out: f64) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidSpec("sample size must be at least 1".into()));
    }
    if !(b_out > 0.0) {
        return Err(Error::InvalidSpec(format!("b_out must be positive, got {b_out}")));
    }
    Ok(())
}

/// Dudley-integral bound on the Rademacher complexity of the decoder class:
/// `2√2 B_out [√(K/m) Ψ(16W∞Q_L/(√m B_out)) + √(L/m) Ψ(8r₂O_L/(√m B_out))
/// + √(L/m) Ψ(8r₁M_L/(√m B_out))]`.
pub fn rademacher_bound(inp: &RademacherInputs, c: &Klmoq) -> Result<f64> {
    check_sample(inp.m, inp.b_out)?;
    let m = inp.m as f64;
    let scale = m.sqrt() * inp.b_out;
    let k_term = (inp.weights as f64 / m).sqrt() * psi(16.0 * inp.w_inf * c.q_l / scale);
    let l_root = (inp.layers as f64 / m).sqrt();
    let lambda_term = l_root * psi(8.0 * inp.r2 * c.o_l / scale);
    let tau_term = l_root * psi(8.0 * inp.r1 * c.m_l / scale);
    Ok(2.0 * std::f64::consts::SQRT_2 * inp.b_out * (k_term + lambda_term + tau_term))
}

/// `lemp + 2√2·rad + 4(B_in + B_out)·√(2 log(4/δ)/m)`.
pub fn generalization_bound(lemp: f64, rad: f64, b_in: f64, b_out: f64, delta: f64, m: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidSpec(format!("delta must lie in (0, 1), got {delta}")));
    }
    if m == 0 {
        return Err(Error::InvalidSpec("sample size must be at least 1".into()));
    }
    let conf = (2.0 * (4.0 / delta).ln() / m as f64).sqrt();
    Ok(lemp + 2.0 * std::f64::consts::SQRT_2 * rad + 4.0 * (b_in + b_out) * conf)
}

/// Closed-form Rademacher bound valid when `τ∞B∞² ≤ 1`, with
/// `‖Y‖_F ≤ √m B_in` substituted.
pub fn corollary_bound(
    arch: &Architecture,
    spec: &HypothesisClassSpec,
    c: &ClassConstants,
    m: usize,
    n_inf: usize,
) -> Result<f64> {
    check_sample(m, spec.b_out)?;
    if !c.small_stepsize() {
        return Err(Error::PreconditionViolated(format!(
            "corollary needs tau_inf * B_inf^2 <= 1, got {}",
            c.tau_inf * c.b_inf * c.b_inf
        )));
    }
    let layers = arch.layers() as f64;
    let mf = m as f64;
    let n = n_inf as f64;
    let root_m = mf.sqrt();
    let root_nm = (n * mf).sqrt();
    let (b_in, b_out) = (spec.b_in, spec.b_out);
    let log_arg = 1.0
        + 16.0 * layers * (layers + 1.0) * c.tau_inf * c.b_inf * c.w_inf * c.d_inf * b_in / b_out;
    let k_term = (arch.weight_count() as f64 / mf * (1.0 + log_arg.ln())).sqrt();
    let l_root = (layers / mf).sqrt();
    let lambda_term = l_root * psi(8.0 * spec.r2 * layers * c.tau_inf * root_nm / (root_m * b_out));
    let inner = c.lambda_inf * c.lambda_inf * n * root_m
        + b_in * (c.b_inf * c.lambda_inf * root_nm + (layers - 1.0) / 2.0);
    let tau_term = l_root * psi(8.0 * spec.r1 * layers * inner / b_out);
    Ok(2.0 * std::f64::consts::SQRT_2 * b_out * (k_term + lambda_term + tau_term))
}

/// Every intermediate constant of the generalization bound plus the inputs
/// it was evaluated at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub alpha: f64,
    pub alpha_mode: AlphaMode,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha_pointwise: Option<f64>,
    pub d_inf: f64,
    pub b_inf: f64,
    pub w_inf: f64,
    pub tau_inf: f64,
    pub lambda_inf: f64,
    pub z: Vec<f64>,
    pub k_l: f64,
    pub m_l: f64,
    pub o_l: f64,
    pub q_l: f64,
    pub rad_bound: f64,
    pub full_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub corollary_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub corollary_note: Option<String>,
    pub lemp: f64,
    pub m: usize,
    pub n_inf: usize,
    pub weights: usize,
    pub layers: usize,
    pub y_fro: f64,
    pub b_in: f64,
    pub b_out: f64,
    pub delta: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Evaluates the full bound for `m` training samples with measurement
/// Frobenius norm `y_fro` and empirical risk `lemp`.
pub fn bound_report(
    arch: &Architecture,
    spec: &HypothesisClassSpec,
    params: Option<&Params>,
    y_fro: f64,
    m: usize,
    lemp: f64,
) -> Result<BoundReport> {
    if !(y_fro >= 0.0 && y_fro.is_finite() && lemp >= 0.0 && lemp.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "need finite nonnegative ‖Y‖_F and empirical risk, got {y_fro} and {lemp}"
        )));
    }
    let c = class_constants(arch, spec, params)?;
    let layers = arch.layers();
    let n_inf = arch.max_hidden_width();
    let consts = klmoq(&c, layers, y_fro, m, n_inf)?;
    let inputs = RademacherInputs {
        weights: arch.weight_count(),
        layers,
        m,
        w_inf: spec.w_inf,
        b_out: spec.b_out,
        r1: spec.r1,
        r2: spec.r2,
    };
    let rad_bound = rademacher_bound(&inputs, &consts)?;
    let full_bound = generalization_bound(lemp, rad_bound, spec.b_in, spec.b_out, spec.delta, m)?;
    let (corollary_bound, corollary_note) = match corollary_bound(arch, spec, &c, m, n_inf) {
        Ok(v) => (Some(v), None),
        Err(Error::PreconditionViolated(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    Ok(BoundReport {
        alpha: c.alpha,
        alpha_mode: c.alpha_mode,
        alpha_pointwise: c.alpha_pointwise,
        d_inf: c.d_inf,
        b_inf: c.b_inf,
        w_inf: c.w_inf,
        tau_inf: c.tau_inf,
        lambda_inf: c.lambda_inf,
        z: z_sequence(c.alpha, c.tau_inf, c.b_inf, layers),
        k_l: consts.k_l,
        m_l: consts.m_l,
        o_l: consts.o_l,
        q_l: consts.q_l,
        rad_bound,
        full_bound,
        corollary_bound,
        corollary_note,
        lemp,
        m,
        n_inf,
        weights: inputs.weights,
        layers,
        y_fro,
        b_in: spec.b_in,
        b_out: spec.b_out,
        delta: spec.delta,
        r1: spec.r1,
        r2: spec.r2,
    })
}
