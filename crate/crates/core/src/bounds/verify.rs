use serde::{Deserialize, Serialize};

use super::constants::{contraction_norm, klmoq, z_sequence, AlphaMode, ClassConstants};
use crate::error::{Error, Result};
use crate::model::{forward, Architecture, Params};
use crate::numkit::{spectral_norm, Matrix};

/// Relative slack granted to the right-hand sides for roundoff in the
/// iterative norms.
pub const VERIFY_RTOL: f64 = 1e-9;
const VERIFY_ATOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Multiplies every left-hand side; values above one exercise the
    /// violation path.
    pub lhs_inflation: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { lhs_inflation: 1.0 }
    }
}

/// Outcome of one family of inequality checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub checks: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` seen (0 when both sides vanish).
    pub max_ratio: f64,
}

impl InequalityReport {
    /// Counts one check of `lhs ≤ rhs`.
    pub fn record(&mut self, lhs: f64, rhs: f64) {
        self.checks += 1;
        if lhs > rhs * (1.0 + VERIFY_RTOL) + VERIFY_ATOL || !lhs.is_finite() || !rhs.is_finite() {
            self.violations += 1;
        }
        let ratio = if lhs == 0.0 {
            0.0
        } else if rhs == 0.0 {
            f64::INFINITY
        } else {
            lhs / rhs
        };
        self.max_ratio = self.max_ratio.max(ratio);
    }

    pub fn merge(&mut self, other: &InequalityReport) {
        self.checks += other.checks;
        self.violations += other.violations;
        self.max_ratio = self.max_ratio.max(other.max_ratio);
    }
}

/// Per-layer output bounds: the sharp product form, the form with
/// `‖τ_k B_kᵀY‖ ≤ ‖Y‖ τ_k ‖B_k‖`, and the coarse `‖Y‖_F Z_l`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputBoundReport {
    pub product: InequalityReport,
    pub operator: InequalityReport,
    pub coarse: InequalityReport,
}

impl OutputBoundReport {
    pub fn violations(&self) -> usize {
        self.product.violations + self.operator.violations + self.coarse.violations
    }

    pub fn max_ratio(&self) -> f64 {
        self.product
            .max_ratio
            .max(self.operator.max_ratio)
            .max(self.coarse.max_ratio)
    }
}

pub fn verify_output_bound(arch: &Architecture, params: &Params, y: &Matrix) -> Result<OutputBoundReport> {
    verify_output_bound_with(arch, params, y, &VerifyOptions::default())
}

/// Checks `‖f^l(Y)‖_F` against its three upper bounds for `l = 1..=L`. In
/// the product, layer `i + 1` contributes `‖I − τ_{i+1} B_{i+1}ᵀB_{i+1}‖`.
/// The coarse bound uses the pointwise `α` clamped to at least one.
pub fn verify_output_bound_with(
    arch: &Architecture,
    params: &Params,
    y: &Matrix,
    opts: &VerifyOptions,
) -> Result<OutputBoundReport> {
    let trace = forward(arch, params, y)?;
    let layers = arch.layers();
    let y_fro = y.frobenius_norm();
    let ops = &trace.operators[..layers];
    let tau = &params.tau;
    let contraction = ops
        .iter()
        .zip(tau)
        .map(|(b, t)| contraction_norm(b, *t))
        .collect::<Result<Vec<f64>>>()?;
    let b_norms = ops.iter().map(spectral_norm).collect::<Result<Vec<f64>>>()?;
    let direct: Vec<f64> = ops
        .iter()
        .zip(tau)
        .map(|(b, t)| t * b.t_matmul(y).frobenius_norm())
        .collect();

    let alpha = contraction.iter().copied().fold(1.0, f64::max);
    let tau_inf = tau.iter().copied().fold(0.0, f64::max);
    let b_inf = b_norms.iter().copied().fold(0.0, f64::max);
    let z = z_sequence(alpha, tau_inf, b_inf, layers);

    let mut report = OutputBoundReport::default();
    for l in 1..=layers {
        let lhs = opts.lhs_inflation * trace.layer_outputs[l - 1].frobenius_norm();
        let (mut product, mut operator) = (0.0, 0.0);
        for k in 1..=l {
            let tail: f64 = (k..l).map(|i| contraction[i]).product();
            product += direct[k - 1] * tail;
            operator += y_fro * tau[k - 1] * b_norms[k - 1] * tail;
        }
        report.product.record(lhs, product);
        report.operator.record(lhs, operator);
        report.coarse.record(lhs, y_fro * z[l]);
    }
    Ok(report)
}

/// Sides of the parameter-perturbation inequalities for one pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    /// `‖f^L_1(Y) − f^L_2(Y)‖_F`.
    pub lhs_hidden: f64,
    /// `K_L max_{l≤L}‖ΔB_l‖ + M_L‖Δτ‖∞ + O_L‖Δλ‖∞`.
    pub rhs_hidden: f64,
    /// `‖h_1(Y) − h_2(Y)‖_F`.
    pub lhs_output: f64,
    /// `(B∞K_L + ‖Y‖_F Z_L) max_{l≤L+1}‖ΔB_l‖ + B∞(M_L‖Δτ‖∞ + O_L‖Δλ‖∞)`.
    pub rhs_output_operators: f64,
    /// `Q_L ‖ΔW‖_X + B∞(M_L‖Δτ‖∞ + O_L‖Δλ‖∞)`.
    pub rhs_output_weights: f64,
    pub constants: ClassConstants,
    pub checks: InequalityReport,
}

fn block_distance(p1: &Params, p2: &Params) -> Result<f64> {
    let mut worst = 0.0f64;
    for (a, b) in p1.blocks.iter().zip(&p2.blocks) {
        let mut d = a.clone();
        for (x, y) in d.values_mut().iter_mut().zip(b.values()) {
            *x -= y;
        }
        worst = worst.max(d.norm()?);
    }
    Ok(worst)
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn verify_perturbation_bound(
    arch: &Architecture,
    p1: &Params,
    p2: &Params,
    y: &Matrix,
) -> Result<PerturbationReport> {
    verify_perturbation_bound_with(arch, p1, p2, y, &VerifyOptions::default())
}

/// Evaluates the perturbation bounds with constants taken as suprema over
/// the two parameter points: `τ∞`, `λ∞`, `B∞` (over all `L + 1` operators)
/// and `α = max{1, pointwise α of either point}`.
pub fn verify_perturbation_bound_with(
    arch: &Architecture,
    p1: &Params,
    p2: &Params,
    y: &Matrix,
    opts: &VerifyOptions,
) -> Result<PerturbationReport> {
    let t1 = forward(arch, p1, y)?;
    let t2 = forward(arch, p2, y)?;
    let layers = arch.layers();
    if y.cols() == 0 {
        return Err(Error::dims("empty measurement batch"));
    }

    let mut b_inf = 0.0f64;
    let mut alpha = 1.0f64;
    let mut d_hidden = 0.0f64;
    let mut d_all = 0.0f64;
    for l in 0..=layers {
        let (b1, b2) = (&t1.operators[l], &t2.operators[l]);
        b_inf = b_inf.max(spectral_norm(b1)?).max(spectral_norm(b2)?);
        let gap = spectral_norm(&b1.sub(b2))?;
        d_all = d_all.max(gap);
        if l < layers {
            d_hidden = d_hidden.max(gap);
            alpha = alpha
                .max(contraction_norm(b1, p1.tau[l])?)
                .max(contraction_norm(b2, p2.tau[l])?);
        }
    }
    let d_l = (1..=layers + 1)
        .map(|l| arch.kind_of(l).lipschitz(l == layers + 1))
        .collect::<Result<Vec<f64>>>()?;
    let max_of = |a: &[f64], b: &[f64]| a.iter().chain(b).copied().fold(0.0, f64::max);
    let constants = ClassConstants {
        w_inf: crate::model::param_class_norm(p1)?.max(crate::model::param_class_norm(p2)?),
        d_inf: d_l.iter().copied().fold(0.0, f64::max),
        d_l,
        b_inf,
        tau_inf: max_of(&p1.tau, &p2.tau),
        lambda_inf: max_of(&p1.lambda, &p2.lambda),
        alpha,
        alpha_mode: AlphaMode::PointwiseLowerBound,
        alpha_pointwise: Some(alpha),
    };

    let y_fro = y.frobenius_norm();
    let c = klmoq(&constants, layers, y_fro, y.cols(), arch.max_hidden_width())?;
    let z_l = z_sequence(alpha, constants.tau_inf, b_inf, layers)[layers];
    let d_tau = sup_distance(&p1.tau, &p2.tau);
    let d_lambda = sup_distance(&p1.lambda, &p2.lambda);
    let d_w = block_distance(p1, p2)?;

    let box_terms = c.m_l * d_tau + c.o_l * d_lambda;
    let lhs_hidden = opts.lhs_inflation * t1.last_hidden().sub(t2.last_hidden()).frobenius_norm();
    let rhs_hidden = c.k_l * d_hidden + box_terms;
    let lhs_output = opts.lhs_inflation * t1.output.sub(&t2.output).frobenius_norm();
    let rhs_output_operators = (b_inf * c.k_l + y_fro * z_l) * d_all + b_inf * box_terms;
    let rhs_output_weights = c.q_l * d_w + b_inf * box_terms;

    let mut checks = InequalityReport::default();
    checks.record(lhs_hidden, rhs_hidden);
    checks.record(lhs_output, rhs_output_operators);
    checks.record(lhs_output, rhs_output_weights);
    Ok(PerturbationReport {
        lhs_hidden,
        rhs_hidden,
        lhs_output,
        rhs_output_operators,
        rhs_output_weights,
        constants,
        checks,
    })
}
