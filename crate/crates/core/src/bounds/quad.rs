use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::psi;

/// Absolute quadrature tolerance, relative to `a·Ψ(b/a)`.
pub const QUAD_TOL: f64 = 1e-10;
/// Relative slack on the comparison with `a·Ψ(b/a)`.
pub const PSI_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiCheck {
    pub a: f64,
    pub b: f64,
    pub integral: f64,
    pub error_estimate: f64,
    pub bound: f64,
    pub passed: bool,
}

/// `∫₀^a √log(1 + b/t) dt` compared against `a·Ψ(b/a)`.
///
/// The integrand has an integrable singularity at `t = 0` and changes scale
/// near `t = b`, so the range is split there and each piece is handled by
/// double-exponential quadrature, which clusters nodes at the endpoints.
pub fn psi_integral_check(a: f64, b: f64) -> Result<PsiCheck> {
    if !(a > 0.0 && a.is_finite() && b >= 0.0 && b.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "need a > 0 and b >= 0, got a = {a}, b = {b}"
        )));
    }
    let bound = a * psi(b / a);
    if b == 0.0 {
        return Ok(PsiCheck {
            a,
            b,
            integral: 0.0,
            error_estimate: 0.0,
            bound,
            passed: true,
        });
    }
    let f = |t: f64| if t <= 0.0 { 0.0 } else { (b / t).ln_1p().sqrt() };
    let target = QUAD_TOL * bound.max(f64::MIN_POSITIVE);
    let mut cuts = vec![0.0];
    let mut c = b.min(a);
    // Geometric breakpoints below b keep every piece well resolved when
    // b/a spans many decades.
    while c > a * 1e-8 && c > 0.0 {
        cuts.push(c);
        c *= 1e-3;
    }
    cuts.push(a);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let pieces = (cuts.len() - 1) as f64;
    let (mut integral, mut error_estimate) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let out = quadrature::integrate(f, w[0], w[1], target / pieces);
        if !out.integral.is_finite() {
            return Err(Error::QuadratureFailure(format!(
                "non-finite value on [{}, {}]",
                w[0], w[1]
            )));
        }
        integral += out.integral;
        error_estimate += out.error_estimate;
    }
    if error_estimate > target {
        return Err(Error::QuadratureFailure(format!(
            "error estimate {error_estimate:e} above tolerance {target:e} for a = {a}, b = {b}"
        )));
    }
    Ok(PsiCheck {
        a,
        b,
        integral,
        error_estimate,
        bound,
        passed: integral <= bound * (1.0 + PSI_SLACK),
    })
}
