use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{symmetric_eigen, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean squared column error (training objective).
    Mse,
    /// Mean unsquared column error (generalization reporting).
    L2,
}

fn check_shapes(h: &Matrix, x: &Matrix) -> Result<()> {
    if h.shape() != x.shape() {
        return Err(Error::dims(format!(
            "outputs are {:?}, targets are {:?}",
            h.shape(),
            x.shape()
        )));
    }
    if h.cols() == 0 {
        return Err(Error::dims("empty batch"));
    }
    Ok(())
}

fn column_errors(h: &Matrix, x: &Matrix) -> Vec<f64> {
    let mut sq = vec![0.0; h.cols()];
    for i in 0..h.rows() {
        for ((s, a), b) in sq.iter_mut().zip(h.row(i)).zip(x.row(i)) {
            *s += (a - b) * (a - b);
        }
    }
    sq
}

/// `(1/m) Σ_i ‖h_i − x_i‖₂`.
pub fn l2_loss(h: &Matrix, x: &Matrix) -> Result<f64> {
    check_shapes(h, x)?;
    let m = h.cols() as f64;
    Ok(column_errors(h, x).iter().map(|s| s.sqrt()).sum::<f64>() / m)
}

/// `(1/m) Σ_i ‖h_i − x_i‖₂²`.
pub fn mse_loss(h: &Matrix, x: &Matrix) -> Result<f64> {
    check_shapes(h, x)?;
    let m = h.cols() as f64;
    Ok(column_errors(h, x).iter().sum::<f64>() / m)
}

pub fn loss(kind: LossKind, h: &Matrix, x: &Matrix) -> Result<f64> {
    match kind {
        LossKind::Mse => mse_loss(h, x),
        LossKind::L2 => l2_loss(h, x),
    }
}

/// Loss value and its gradient with respect to `h`.
pub fn loss_and_grad(kind: LossKind, h: &Matrix, x: &Matrix) -> Result<(f64, Matrix)> {
    check_shapes(h, x)?;
    let m = h.cols() as f64;
    let diff = h.sub(x);
    match kind {
        LossKind::Mse => {
            let value = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / m;
            Ok((value, diff.scale(2.0 / m)))
        }
        LossKind::L2 => {
            let norms = diff.column_norms();
            let value = norms.iter().sum::<f64>() / m;
            let mut grad = diff;
            for i in 0..grad.rows() {
                for (j, norm) in norms.iter().enumerate() {
                    grad[(i, j)] = if *norm > 0.0 {
                        grad[(i, j)] / (m * norm)
                    } else {
                        0.0
                    };
                }
            }
            Ok((value, grad))
        }
    }
}

/// `‖I − ΦᵀΦ‖₂→₂`.
pub fn ortho_penalty(phi: &Matrix) -> Result<f64> {
    ortho_penalty_grad(phi).map(|(v, _)| v)
}

/// Penalty and a subgradient. With `M = I − ΦᵀΦ = Σ μ_i v_i v_iᵀ` and `μ*` the
/// eigenvalue of largest modulus, the penalty is `|μ*|` and its gradient is
/// `−2 sign(μ*) Φ v* v*ᵀ`. The symmetric eigensolve keeps the eigenvector
/// accurate to roundoff, which the gradient needs.
pub fn ortho_penalty_grad(phi: &Matrix) -> Result<(f64, Matrix)> {
    if !phi.is_square() {
        return Err(Error::dims(format!(
            "orthogonality penalty needs a square matrix, got {:?}",
            phi.shape()
        )));
    }
    if !phi.is_finite() {
        return Err(Error::NonConvergence { iterations: 0 });
    }
    let k = phi.cols();
    let mut m = Matrix::identity(k);
    m.add_scaled(-1.0, &phi.t_matmul(phi));
    let (values, vectors) = symmetric_eigen(&m)?;
    let (best, mu) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1.abs() { (i, v) } else { acc });
    let v = vectors.column(best);
    let phi_v = phi.matvec(&v);
    let c = -2.0 * mu.signum();
    let grad = Matrix::from_fn(k, k, |i, j| c * phi_v[i] * v[j]);
    Ok((mu.abs(), grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{random_gaussian_matrix, random_orthogonal, SeededRng};

    #[test]
    fn loss_examples() {
        let x = Matrix::from_rows(&[&[1.0], &[2.0]]);
        assert_eq!(l2_loss(&x, &x).unwrap(), 0.0);
        assert_eq!(mse_loss(&x, &x).unwrap(), 0.0);
        let h = Matrix::from_rows(&[&[4.0], &[6.0]]);
        assert_eq!(l2_loss(&h, &x).unwrap(), 5.0);
        assert_eq!(mse_loss(&h, &x).unwrap(), 25.0);
        assert!(l2_loss(&h, &Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn losses_match_column_loop() {
        let mut rng = SeededRng::new(10);
        let h = random_gaussian_matrix(&mut rng, 7, 13);
        let x = random_gaussian_matrix(&mut rng, 7, 13);
        let (mut l2, mut mse) = (0.0, 0.0);
        for j in 0..13 {
            let s: f64 = h.column(j).iter().zip(x.column(j)).map(|(a, b)| (a - b).powi(2)).sum();
            l2 += s.sqrt();
            mse += s;
        }
        assert!((l2_loss(&h, &x).unwrap() - l2 / 13.0).abs() < 1e-12);
        assert!((mse_loss(&h, &x).unwrap() - mse / 13.0).abs() < 1e-12);
    }

    #[test]
    fn ortho_examples() {
        let mut rng = SeededRng::new(3);
        let g = random_gaussian_matrix(&mut rng, 5, 5);
        let mut m = Matrix::identity(5);
        m.add_scaled(-1.0, &g.t_matmul(&g));
        let via_norm = crate::numkit::spectral_norm(&m).unwrap();
        assert!((ortho_penalty(&g).unwrap() - via_norm).abs() <= 1e-9 * via_norm);
        assert!(ortho_penalty(&random_orthogonal(&mut rng, 6)).unwrap() < 1e-8);
        assert!((ortho_penalty(&Matrix::identity(2).scale(2.0)).unwrap() - 3.0).abs() < 1e-10);
        assert!(ortho_penalty(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn ortho_matches_3x3_eigensolve() {
        // Eigenvalues of the symmetric 3x3 matrix ΦᵀΦ via the trigonometric
        // closed form of the characteristic cubic.
        fn eig3(a: &Matrix) -> [f64; 3] {
            let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
            let q = (a[(0, 0)] + a[(1, 1)] + a[(2, 2)]) / 3.0;
            let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2)
                + 2.0 * p1;
            let p = (p2 / 6.0).sqrt();
            let mut b = a.clone();
            for i in 0..3 {
                b[(i, i)] -= q;
            }
            let b = b.scale(1.0 / p);
            let det = b[(0, 0)] * (b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)])
                - b[(0, 1)] * (b[(1, 0)] * b[(2, 2)] - b[(1, 2)] * b[(2, 0)])
                + b[(0, 2)] * (b[(1, 0)] * b[(2, 1)] - b[(1, 1)] * b[(2, 0)]);
            let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
            let e1 = q + 2.0 * p * phi.cos();
            let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
            [e1, 3.0 * q - e1 - e3, e3]
        }
        let mut rng = SeededRng::new(21);
        for _ in 0..50 {
            let phi = random_gaussian_matrix(&mut rng, 3, 3);
            let want = eig3(&phi.t_matmul(&phi))
                .iter()
                .map(|e| (1.0 - e).abs())
                .fold(0.0, f64::max);
            let got = ortho_penalty(&phi).unwrap();
            assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn loss_gradients_match_differences() {
        let mut rng = SeededRng::new(4);
        let h = random_gaussian_matrix(&mut rng, 3, 4);
        let x = random_gaussian_matrix(&mut rng, 3, 4);
        for kind in [LossKind::Mse, LossKind::L2] {
            let (_, g) = loss_and_grad(kind, &h, &x).unwrap();
            for k in 0..12 {
                let (mut hp, mut hm) = (h.clone(), h.clone());
                hp.as_mut_slice()[k] += 1e-6;
                hm.as_mut_slice()[k] -= 1e-6;
                let num = (loss(kind, &hp, &x).unwrap() - loss(kind, &hm, &x).unwrap()) / 2e-6;
                assert!((num - g.as_slice()[k]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn ortho_gradient_matches_differences() {
        let mut rng = SeededRng::new(8);
        let phi = random_gaussian_matrix(&mut rng, 4, 4).scale(0.6);
        let (_, g) = ortho_penalty_grad(&phi).unwrap();
        for k in 0..16 {
            let (mut p, mut q) = (phi.clone(), phi.clone());
            p.as_mut_slice()[k] += 1e-6;
            q.as_mut_slice()[k] -= 1e-6;
            let num = (ortho_penalty(&p).unwrap() - ortho_penalty(&q).unwrap()) / 2e-6;
            assert!((num - g.as_slice()[k]).abs() < 1e-8, "{num} vs {}", g.as_slice()[k]);
        }
    }
}
