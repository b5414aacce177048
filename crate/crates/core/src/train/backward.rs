use super::loss::{loss_and_grad, LossKind};
use crate::error::{Error, Result};
use crate::model::{forward, Architecture, ForwardTrace, Params, Pooling, WeightBlock};
use crate::numkit::Matrix;

/// Gradient with respect to every leaf; same layout as [`Params`].
pub type Gradients = Params;

/// Pulls `grad` (with respect to the clipped output) back through the radial
/// projection `σ`, column by column.
fn clip_backward(pre: &Matrix, grad: &Matrix, b_out: f64) -> Matrix {
    let norms = pre.column_norms();
    let mut out = grad.clone();
    for (j, norm) in norms.iter().enumerate() {
        if *norm <= b_out {
            continue;
        }
        let mut proj = 0.0;
        for i in 0..pre.rows() {
            proj += pre[(i, j)] * grad[(i, j)];
        }
        proj /= norm * norm;
        let s = b_out / norm;
        for i in 0..pre.rows() {
            out[(i, j)] = s * (grad[(i, j)] - pre[(i, j)] * proj);
        }
    }
    out
}

/// Reverse-mode pass of the loss `kind` through a recorded forward pass.
/// Returns the loss value and the gradient of every leaf.
pub fn backward(
    arch: &Architecture,
    params: &Params,
    y: &Matrix,
    x: &Matrix,
    kind: LossKind,
    trace: &ForwardTrace,
) -> Result<(f64, Gradients)> {
    let layers = arch.layers();
    if trace.layer_outputs.len() != layers || trace.operators.len() != layers + 1 {
        return Err(Error::dims("forward trace does not match the architecture"));
    }
    if y.cols() != x.cols() {
        return Err(Error::dims(format!(
            "{} measurements for {} targets",
            y.cols(),
            x.cols()
        )));
    }
    let (value, d_h) = loss_and_grad(kind, &trace.output, x)?;
    let d_out = clip_backward(&trace.final_linear, &d_h, arch.b_out());

    let j_count = arch.spaces().len();
    let mut d_interior: Vec<Option<Matrix>> = vec![None; j_count];
    let mut d_tau = vec![0.0; layers];
    let mut d_lambda = vec![0.0; layers];

    let f_last = trace.last_hidden();
    let d_b_final = d_out.matmul_t(f_last);
    let mut d_f = trace.operators[layers].t_matmul(&d_out);

    for l in (1..=layers).rev() {
        let b = &trace.operators[l - 1];
        let tau = params.tau[l - 1];
        let lam = params.lambda[l - 1];
        let theta = tau * lam;
        let u = &trace.pre_activations[l - 1];
        let r = &trace.residuals[l - 1];

        let d_s = match &arch.pooling()[l - 1] {
            Pooling::Identity => d_f,
            Pooling::FixedLinear(p) => p.t_matmul(&d_f),
        };
        let mut d_theta = 0.0;
        let mut d_u = d_s;
        for (g, ui) in d_u.as_mut_slice().iter_mut().zip(u.as_slice()) {
            if *ui > theta {
                d_theta -= *g;
            } else if *ui < -theta {
                d_theta += *g;
            } else {
                *g = 0.0;
            }
        }
        let bt_r = b.t_matmul(r);
        let direct: f64 = d_u.as_slice().iter().zip(bt_r.as_slice()).map(|(a, c)| a * c).sum();
        d_tau[l - 1] = direct + lam * d_theta;
        d_lambda[l - 1] = tau * d_theta;

        // U = F + τ Bᵀ(Y − B F): both the explicit Bᵀ and the residual depend on B.
        let b_du = b.matmul(&d_u);
        let mut d_b = r.matmul_t(&d_u).scale(tau);
        let d_prev = if l > 1 {
            let f_prev = &trace.layer_outputs[l - 2];
            d_b.add_scaled(-tau, &b_du.matmul_t(f_prev));
            let mut dp = d_u;
            dp.add_scaled(-tau, &b.t_matmul(&b_du));
            dp
        } else {
            Matrix::zeros(0, 0)
        };
        let j = arch.schedule().space_of(l);
        match &mut d_interior[j] {
            Some(acc) => acc.add_scaled(1.0, &d_b),
            slot @ None => *slot = Some(d_b),
        }
        d_f = d_prev;
    }

    let mut blocks: Vec<WeightBlock> = params
        .blocks
        .iter()
        .map(|b| WeightBlock::zeros(b.shape()))
        .collect();
    for (j, acc) in d_interior.iter().enumerate() {
        if let Some(d_b) = acc {
            let pulled = arch.spaces()[j].pullback(d_b, false);
            add_block(&mut blocks[j], &pulled);
        }
    }
    let j_final = arch.schedule().space_of(layers + 1);
    let pulled = arch.spaces()[j_final].pullback(&d_b_final, true);
    add_block(&mut blocks[j_final], &pulled);

    Ok((
        value,
        Params {
            blocks,
            tau: d_tau,
            lambda: d_lambda,
        },
    ))
}

fn add_block(acc: &mut WeightBlock, other: &WeightBlock) {
    for (a, b) in acc.values_mut().iter_mut().zip(other.values()) {
        *a += b;
    }
}

/// Forward and backward in one call.
pub fn value_and_grad(
    arch: &Architecture,
    params: &Params,
    y: &Matrix,
    x: &Matrix,
    kind: LossKind,
) -> Result<(f64, Gradients)> {
    let trace = forward(arch, params, y)?;
    backward(arch, params, y, x, kind, &trace)
}
