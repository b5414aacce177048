use super::arch::{Architecture, Pooling};
use super::params::Params;
use crate::error::{Error, Result};
use crate::numkit::{clip_columns, soft_threshold, Matrix};

/// `B_l` for `l = 1..=L+1` (1-based; `L + 1` is the final transform).
pub fn materialize_b(arch: &Architecture, params: &Params, l: usize) -> Result<Matrix> {
    let layers = arch.layers();
    if l == 0 || l > layers + 1 {
        return Err(Error::dims(format!("layer index {l} outside 1..={}", layers + 1)));
    }
    let j = arch.schedule().space_of(l);
    let block = params
        .blocks
        .get(j)
        .ok_or_else(|| Error::dims(format!("missing weight block {j}")))?;
    arch.spaces()[j].materialize(block, l == layers + 1)
}

/// All `L + 1` operators; shared spaces are materialized once.
pub fn materialize_all(arch: &Architecture, params: &Params) -> Result<Vec<Matrix>> {
    let layers = arch.layers();
    let j_count = arch.spaces().len();
    let mut interior: Vec<Option<Matrix>> = vec![None; j_count];
    let mut ops = Vec::with_capacity(layers + 1);
    for l in 1..=layers {
        let j = arch.schedule().space_of(l);
        if interior[j].is_none() {
            interior[j] = Some(materialize_b(arch, params, l)?);
        }
        ops.push(interior[j].clone().unwrap());
    }
    ops.push(materialize_b(arch, params, layers + 1)?);
    Ok(ops)
}

fn apply_pooling(pool: &Pooling, m: Matrix) -> Matrix {
    match pool {
        Pooling::Identity => m,
        Pooling::FixedLinear(p) => p.matmul(&m),
    }
}

/// Single layer on one column: `P_l S_{τλ}[z + τ Bᵀ(y − B z)]`.
pub fn layer_forward(
    arch: &Architecture,
    params: &Params,
    l: usize,
    z: &[f64],
    y: &[f64],
) -> Result<Vec<f64>> {
    if l == 0 || l > arch.layers() {
        return Err(Error::dims(format!("layer index {l} outside 1..={}", arch.layers())));
    }
    params.validate(arch)?;
    let b = materialize_b(arch, params, l)?;
    if z.len() != b.cols() || y.len() != b.rows() {
        return Err(Error::dims(format!(
            "layer {l} expects z of length {} and y of length {}, got {} and {}",
            b.cols(),
            b.rows(),
            z.len(),
            y.len()
        )));
    }
    let tau = params.tau[l - 1];
    let theta = tau * params.lambda[l - 1];
    let bz = b.matvec(z);
    let r: Vec<f64> = y.iter().zip(&bz).map(|(yi, bi)| yi - bi).collect();
    let btr = b.t_matvec(&r);
    let s: Vec<f64> = z
        .iter()
        .zip(&btr)
        .map(|(zi, gi)| soft_threshold(zi + tau * gi, theta))
        .collect();
    Ok(match &arch.pooling()[l - 1] {
        Pooling::Identity => s,
        Pooling::FixedLinear(p) => p.matvec(&s),
    })
}

/// Everything the forward pass produced, kept for backpropagation and the
/// bound verifiers.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// `B_1..B_{L+1}`.
    pub operators: Vec<Matrix>,
    /// `Y − B_l f^{l−1}` for each layer.
    pub residuals: Vec<Matrix>,
    /// Soft-threshold inputs `f^{l−1} + τ_l B_lᵀ R_l`.
    pub pre_activations: Vec<Matrix>,
    /// `f^1..f^L`.
    pub layer_outputs: Vec<Matrix>,
    /// `B_{L+1} f^L` before clipping.
    pub final_linear: Matrix,
    /// Decoder output `σ(B_{L+1} f^L)`.
    pub output: Matrix,
}

impl ForwardTrace {
    /// `f^l` for `l = 0..=L`, where `f^0 = 0`.
    pub fn f(&self, l: usize) -> Option<&Matrix> {
        if l == 0 {
            None
        } else {
            self.layer_outputs.get(l - 1)
        }
    }

    pub fn last_hidden(&self) -> &Matrix {
        self.layer_outputs.last().expect("at least one layer")
    }
}

/// Column-wise decoder `h(Y) = σ(B_{L+1} f^L(Y))` with all intermediates.
pub fn forward(arch: &Architecture, params: &Params, y: &Matrix) -> Result<ForwardTrace> {
    params.validate(arch)?;
    if y.rows() != arch.input_dim() {
        return Err(Error::dims(format!(
            "measurements have {} rows, architecture expects {}",
            y.rows(),
            arch.input_dim()
        )));
    }
    let layers = arch.layers();
    let m = y.cols();
    let operators = materialize_all(arch, params)?;
    let mut residuals = Vec::with_capacity(layers);
    let mut pre_activations = Vec::with_capacity(layers);
    let mut layer_outputs: Vec<Matrix> = Vec::with_capacity(layers);
    for l in 1..=layers {
        let b = &operators[l - 1];
        let tau = params.tau[l - 1];
        let theta = tau * params.lambda[l - 1];
        let (residual, mut u) = match layer_outputs.last() {
            None => (y.clone(), Matrix::zeros(arch.widths()[0], m)),
            Some(prev) => (y.sub(&b.matmul(prev)), prev.clone()),
        };
        u.add_scaled(tau, &b.t_matmul(&residual));
        let s = u.map(|x| soft_threshold(x, theta));
        residuals.push(residual);
        pre_activations.push(u);
        layer_outputs.push(apply_pooling(&arch.pooling()[l - 1], s));
    }
    let final_linear = operators[layers].matmul(layer_outputs.last().expect("L >= 1"));
    let output = clip_columns(&final_linear, arch.b_out());
    Ok(ForwardTrace {
        operators,
        residuals,
        pre_activations,
        layer_outputs,
        final_linear,
        output,
    })
}

/// Decoder output only.
pub fn decode(arch: &Architecture, params: &Params, y: &Matrix) -> Result<Matrix> {
    forward(arch, params, y).map(|t| t.output)
}
