use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{materialize_all, Architecture, HypothesisClassSpec, Params};
use crate::numkit::{symmetric_eigen, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlphaMode {
    /// `max{1, τ∞B∞² − 1}`: an upper bound on the supremum over the class.
    AnalyticClassBound,
    /// `max_l ‖I − τ_l B_lᵀB_l‖` at one parameter point, which only bounds
    /// the class supremum from below.
    PointwiseLowerBound,
}

impl AlphaMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlphaMode::AnalyticClassBound => "analytic_class_bound",
            AlphaMode::PointwiseLowerBound => "pointwise_lower_bound",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassConstants {
    pub w_inf: f64,
    /// `D_1..D_{L+1}`.
    pub d_l: Vec<f64>,
    pub d_inf: f64,
    pub b_inf: f64,
    pub tau_inf: f64,
    pub lambda_inf: f64,
    pub alpha: f64,
    pub alpha_mode: AlphaMode,
    /// Pointwise value, when parameters were supplied.
    pub alpha_pointwise: Option<f64>,
}

impl ClassConstants {
    /// Whether `τ∞B∞² ≤ 1` (with a `1e-12` slack), where the closed-form bound applies.
    pub fn small_stepsize(&self) -> bool {
        self.tau_inf * self.b_inf * self.b_inf <= 1.0 + 1e-12
    }
}

/// `max{1, τ∞B∞² − 1}`. The spectrum of `I − τBᵀB` lies in
/// `[1 − τ‖B‖², 1]`, and `B = 0` belongs to every norm ball.
pub fn analytic_alpha(tau_inf: f64, b_inf: f64) -> f64 {
    (tau_inf * b_inf * b_inf - 1.0).max(1.0)
}

/// `‖I − τ BᵀB‖₂→₂` from the eigenvalues of `BᵀB`.
pub fn contraction_norm(b: &Matrix, tau: f64) -> Result<f64> {
    if tau == 0.0 {
        return Ok(1.0);
    }
    let (values, _) = symmetric_eigen(&b.t_matmul(b))?;
    Ok(values
        .iter()
        .map(|mu| (1.0 - tau * mu).abs())
        .fold(0.0, f64::max))
}

/// `max_{l ≤ L} ‖I − τ_l B_lᵀB_l‖` at the given parameters.
pub fn pointwise_alpha(arch: &Architecture, params: &Params) -> Result<f64> {
    params.validate(arch)?;
    let ops = materialize_all(arch, params)?;
    let mut alpha = 0.0f64;
    for (b, tau) in ops.iter().zip(&params.tau) {
        alpha = alpha.max(contraction_norm(b, *tau)?);
    }
    Ok(alpha)
}

/// Class constants of `spec` on `arch`. `B∞ = W∞ D∞` with `D_l` the
/// Lipschitz constant of each map kind, and `α` the analytic class bound.
/// Supplying `params` adds the pointwise `α` for comparison.
pub fn class_constants(
    arch: &Architecture,
    spec: &HypothesisClassSpec,
    params: Option<&Params>,
) -> Result<ClassConstants> {
    let layers = arch.layers();
    spec.validate(layers)?;
    let d_l = (1..=layers + 1)
        .map(|l| arch.kind_of(l).lipschitz(l == layers + 1))
        .collect::<Result<Vec<f64>>>()?;
    let d_inf = d_l.iter().copied().fold(0.0, f64::max);
    let b_inf = spec.w_inf * d_inf;
    let tau_inf = spec.tau_inf();
    let alpha_pointwise = params.map(|p| pointwise_alpha(arch, p)).transpose()?;
    let constants = ClassConstants {
        w_inf: spec.w_inf,
        d_l,
        d_inf,
        b_inf,
        tau_inf,
        lambda_inf: spec.lambda_inf(),
        alpha: analytic_alpha(tau_inf, b_inf),
        alpha_mode: AlphaMode::AnalyticClassBound,
        alpha_pointwise,
    };
    if spec.enforce_tau_b2_le_1 && !constants.small_stepsize() {
        return Err(Error::PreconditionViolated(format!(
            "tau_inf * B_inf^2 = {} exceeds 1",
            tau_inf * b_inf * b_inf
        )));
    }
    Ok(constants)
}

/// `Z_0..Z_L` with `Z_l = τ∞B∞ Σ_{k=1}^{l} α^k`, accumulated term by term.
pub fn z_sequence(alpha: f64, tau_inf: f64, b_inf: f64, layers: usize) -> Vec<f64> {
    let mut z = Vec::with_capacity(layers + 1);
    z.push(0.0);
    let (mut power, mut sum) = (1.0, 0.0);
    for _ in 0..layers {
        power *= alpha;
        sum += power;
        z.push(tau_inf * b_inf * sum);
    }
    z
}

/// Closed form of `Z_l`: `τ∞B∞ α(1 − α^l)/(1 − α)`, or `τ∞B∞ l` for `α = 1`.
pub fn z_closed_form(alpha: f64, tau_inf: f64, b_inf: f64, l: usize) -> f64 {
    if alpha == 1.0 {
        tau_inf * b_inf * l as f64
    } else {
        tau_inf * b_inf * alpha * (1.0 - alpha.powi(l as i32)) / (1.0 - alpha)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Klmoq {
    pub k_l: f64,
    pub m_l: f64,
    pub o_l: f64,
    pub q_l: f64,
}

/// Lipschitz constants of the depth-`L` network in its weights (`K_L`),
/// stepsizes (`M_L`), thresholds (`O_L`) and in `‖W‖_X` through the decoder
/// (`Q_L`).
pub fn klmoq(c: &ClassConstants, layers: usize, y_fro: f64, m: usize, n_inf: usize) -> Result<Klmoq> {
    if layers == 0 {
        return Err(Error::InvalidSpec("L must be at least 1".into()));
    }
    let z = z_sequence(c.alpha, c.tau_inf, c.b_inf, layers);
    let root_nm = ((n_inf * m) as f64).sqrt();
    let (mut k_l, mut m_l, mut o_l) = (0.0, 0.0, 0.0);
    for l in 1..=layers {
        let w = c.alpha.powi((layers - l) as i32);
        k_l += c.tau_inf * y_fro * (1.0 + 2.0 * c.b_inf * z[l - 1]) * w;
        m_l += (c.lambda_inf * root_nm + c.b_inf * y_fro * (c.b_inf * z[l - 1] + 1.0)) * w;
        o_l += c.tau_inf * root_nm * w;
    }
    let q_l = (c.b_inf * k_l + y_fro * z[layers]) * c.d_inf;
    Ok(Klmoq { k_l, m_l, o_l, q_l })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(alpha: f64) -> ClassConstants {
        ClassConstants {
            w_inf: 1.0,
            d_l: vec![1.0, 1.0],
            d_inf: 1.0,
            b_inf: 1.0,
            tau_inf: 1.0,
            lambda_inf: 1.0,
            alpha,
            alpha_mode: AlphaMode::AnalyticClassBound,
            alpha_pointwise: None,
        }
    }

    #[test]
    fn desk_values() {
        let k = klmoq(&unit(1.0), 1, 1.0, 1, 1).unwrap();
        assert_eq!((k.k_l, k.m_l, k.o_l, k.q_l), (1.0, 2.0, 1.0, 2.0));
    }

    #[test]
    fn zero_inputs_give_zero_constants() {
        let mut c = unit(1.0);
        c.tau_inf = 0.0;
        c.lambda_inf = 0.0;
        let k = klmoq(&c, 4, 0.0, 10, 3).unwrap();
        assert_eq!((k.k_l, k.m_l, k.o_l, k.q_l), (0.0, 0.0, 0.0, 0.0));
        assert!(klmoq(&c, 0, 1.0, 1, 1).is_err());
    }

    #[test]
    fn z_examples() {
        assert_eq!(z_sequence(1.0, 0.1, 2.0, 0), vec![0.0]);
        assert!((z_sequence(1.0, 0.1, 2.0, 3)[3] - 0.6).abs() < 1e-15);
        assert!((z_closed_form(1.0, 0.1, 2.0, 3) - 0.6).abs() < 1e-15);
        assert_eq!(z_sequence(0.5, 1.0, 1.0, 2)[2], 0.75);
        assert_eq!(z_closed_form(0.5, 1.0, 1.0, 2), 0.75);
    }

    #[test]
    fn analytic_alpha_examples() {
        assert_eq!(analytic_alpha(1.0, 1.0), 1.0);
        assert_eq!(analytic_alpha(1.0, 2.0), 3.0);
        assert_eq!(analytic_alpha(0.0, 5.0), 1.0);
    }

    #[test]
    fn contraction_examples() {
        let b = Matrix::identity(1);
        assert_eq!(contraction_norm(&b, 1.0).unwrap(), 0.0);
        assert_eq!(contraction_norm(&b, 0.0).unwrap(), 1.0);
        let wide = Matrix::from_rows(&[&[1.0, 0.0]]);
        assert!((contraction_norm(&wide, 1.0).unwrap() - 1.0).abs() < 1e-14);
        let big = Matrix::diag(&[2.0, 0.5]);
        assert!((contraction_norm(&big, 1.0).unwrap() - 3.0).abs() < 1e-12);
    }
}
