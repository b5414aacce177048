use serde::{Deserialize, Serialize};

use super::arch::{Architecture, WeightBlock};
use crate::error::{Error, Result};

/// Trainable state `(W, τ, λ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub blocks: Vec<WeightBlock>,
    pub tau: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Params {
    pub fn new(blocks: Vec<WeightBlock>, tau: Vec<f64>, lambda: Vec<f64>) -> Self {
        Params { blocks, tau, lambda }
    }

    /// Checks block shapes against the architecture and positivity of the
    /// stepsizes and thresholds.
    pub fn validate(&self, arch: &Architecture) -> Result<()> {
        let layers = arch.layers();
        if self.blocks.len() != arch.spaces().len() {
            return Err(Error::dims(format!(
                "{} weight blocks for J = {}",
                self.blocks.len(),
                arch.spaces().len()
            )));
        }
        for (j, (block, kind)) in self.blocks.iter().zip(arch.spaces()).enumerate() {
            if block.shape() != kind.block_shape() {
                return Err(Error::dims(format!(
                    "block {j} has shape {:?}, expected {:?}",
                    block.shape(),
                    kind.block_shape()
                )));
            }
        }
        if self.tau.len() != layers || self.lambda.len() != layers {
            return Err(Error::dims(format!(
                "need {layers} stepsizes and thresholds, got {} and {}",
                self.tau.len(),
                self.lambda.len()
            )));
        }
        if let Some(t) = self.tau.iter().find(|t| !(**t > 0.0)) {
            return Err(Error::InvalidSpec(format!("stepsize {t} is not positive")));
        }
        if let Some(l) = self.lambda.iter().find(|l| !(**l > 0.0)) {
            return Err(Error::InvalidSpec(format!("threshold {l} is not positive")));
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Params {
        Params {
            blocks: self
                .blocks
                .iter()
                .map(|b| WeightBlock::zeros(b.shape()))
                .collect(),
            tau: vec![0.0; self.tau.len()],
            lambda: vec![0.0; self.lambda.len()],
        }
    }

    /// Every leaf as a slice, in the order blocks, τ, λ.
    pub fn leaves(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.blocks.iter().map(|b| b.values()).collect();
        out.push(&self.tau);
        out.push(&self.lambda);
        out
    }

    pub fn leaves_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.blocks.iter_mut().map(|b| b.values_mut()).collect();
        out.push(&mut self.tau);
        out.push(&mut self.lambda);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.leaves().iter().all(|l| l.iter().all(|x| x.is_finite()))
    }
}

/// `‖W‖_X = max_j ‖w^(j)‖^(j)` with the spectral norm on matrix blocks and the
/// Euclidean norm on kernels.
pub fn param_class_norm(params: &Params) -> Result<f64> {
    params
        .blocks
        .iter()
        .try_fold(0.0f64, |m, b| Ok(m.max(b.norm()?)))
}

/// Bounded parameter set the generalization bound is stated for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisClassSpec {
    /// Bound on `‖W‖_X`.
    pub w_inf: f64,
    /// Stepsize box center and radius.
    pub tau0: Vec<f64>,
    pub r1: f64,
    /// Threshold box center and radius.
    pub lambda0: Vec<f64>,
    pub r2: f64,
    /// Almost-sure bound on `‖y‖₂`.
    pub b_in: f64,
    /// Output clip radius.
    pub b_out: f64,
    /// Confidence parameter of the bound.
    pub delta: f64,
    /// Require `τ∞ B∞² ≤ 1`.
    #[serde(default)]
    pub enforce_tau_b2_le_1: bool,
}

impl HypothesisClassSpec {
    pub fn validate(&self, layers: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if !(self.w_inf > 0.0 && self.w_inf.is_finite()) {
            return bad(format!("w_inf must be positive, got {}", self.w_inf));
        }
        if self.tau0.len() != layers || self.lambda0.len() != layers {
            return bad(format!(
                "tau0/lambda0 need {layers} entries, got {} and {}",
                self.tau0.len(),
                self.lambda0.len()
            ));
        }
        if !(self.r1 >= 0.0 && self.r2 >= 0.0) {
            return bad("box radii must be nonnegative".into());
        }
        let tau_min = self.tau0.iter().copied().fold(f64::INFINITY, f64::min);
        let lambda_min = self.lambda0.iter().copied().fold(f64::INFINITY, f64::min);
        if !(self.r1 < tau_min) {
            return bad(format!("r1 = {} must be below min tau0 = {tau_min}", self.r1));
        }
        if !(self.r2 < lambda_min) {
            return bad(format!(
                "r2 = {} must be below min lambda0 = {lambda_min}",
                self.r2
            ));
        }
        if !(self.b_in > 0.0 && self.b_out > 0.0) {
            return bad("b_in and b_out must be positive".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        Ok(())
    }

    /// `τ∞ = max_l (τ0_l + r1)`.
    pub fn tau_inf(&self) -> f64 {
        self.tau0.iter().map(|t| t + self.r1).fold(0.0, f64::max)
    }

    /// `λ∞ = max_l (λ0_l + r2)`.
    pub fn lambda_inf(&self) -> f64 {
        self.lambda0.iter().map(|l| l + self.r2).fold(0.0, f64::max)
    }

    /// Whether the parameters lie in the class (boxes and `‖W‖_X ≤ W∞`, the
    /// latter with relative slack `rtol` for the iterative norm).
    pub fn contains(&self, params: &Params, rtol: f64) -> Result<bool> {
        let in_box = |v: &[f64], c: &[f64], r: f64| {
            v.iter().zip(c).all(|(x, c0)| *x >= c0 - r && *x <= c0 + r)
        };
        Ok(in_box(&params.tau, &self.tau0, self.r1)
            && in_box(&params.lambda, &self.lambda0, self.r2)
            && param_class_norm(params)? <= self.w_inf * (1.0 + rtol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{random_orthogonal, Matrix, SeededRng};

    fn spec(layers: usize) -> HypothesisClassSpec {
        HypothesisClassSpec {
            w_inf: 1.0,
            tau0: vec![1.0; layers],
            r1: 0.0,
            lambda0: vec![0.1; layers],
            r2: 0.05,
            b_in: 1.0,
            b_out: 1.0,
            delta: 0.05,
            enforce_tau_b2_le_1: false,
        }
    }

    #[test]
    fn class_norm_examples() {
        let mut rng = SeededRng::new(1);
        let q = random_orthogonal(&mut rng, 5);
        let p = Params::new(vec![WeightBlock::Dense(q)], vec![1.0], vec![0.1]);
        assert!((param_class_norm(&p).unwrap() - 1.0).abs() < 1e-8);

        let p = Params::new(
            vec![
                WeightBlock::Dense(Matrix::identity(3).scale(0.5)),
                WeightBlock::Kernel(vec![0.0, 2.0]),
            ],
            vec![1.0],
            vec![0.1],
        );
        assert!((param_class_norm(&p).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn class_norm_is_homogeneous() {
        let mut rng = SeededRng::new(2);
        for _ in 0..20 {
            let m = crate::numkit::random_gaussian_matrix(&mut rng, 4, 3);
            let k: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
            let p = Params::new(
                vec![WeightBlock::Dense(m), WeightBlock::Kernel(k)],
                vec![1.0],
                vec![1.0],
            );
            let c = 3.0 * rng.uniform();
            let mut scaled = p.clone();
            for b in &mut scaled.blocks {
                b.scale(c);
            }
            let base = param_class_norm(&p).unwrap();
            assert!((param_class_norm(&scaled).unwrap() - c * base).abs() <= 1e-8 * base.max(1.0));
        }
    }

    #[test]
    fn spec_validation() {
        assert!(spec(3).validate(3).is_ok());
        assert!(spec(3).validate(2).is_err());
        let mut s = spec(2);
        s.r2 = 0.1;
        assert!(s.validate(2).is_err());
        let mut s = spec(2);
        s.delta = 1.5;
        assert!(s.validate(2).is_err());
        let s = spec(2);
        assert!((s.tau_inf() - 1.0).abs() < 1e-15);
        assert!((s.lambda_inf() - 0.15).abs() < 1e-15);
    }
}
