use crate::error::{Error, Result};
use crate::numkit::{soft_threshold, Matrix};

/// Classical ISTA `z ← S_{τλ}[z + τ(AΦ)ᵀ(y − AΦz)]` started from `z = 0`.
pub fn ista_reference(
    a: &Matrix,
    phi: &Matrix,
    tau: f64,
    lambda: f64,
    y: &[f64],
    iters: usize,
) -> Result<Vec<f64>> {
    let b = operator(a, phi, y)?;
    let mut z = vec![0.0; b.cols()];
    let theta = tau * lambda;
    for _ in 0..iters {
        let bz = b.matvec(&z);
        let r: Vec<f64> = y.iter().zip(&bz).map(|(yi, bi)| yi - bi).collect();
        let g = b.t_matvec(&r);
        for (zi, gi) in z.iter_mut().zip(&g) {
            *zi = soft_threshold(*zi + tau * gi, theta);
        }
    }
    Ok(z)
}

/// LASSO objective `½‖AΦz − y‖² + λ‖z‖₁`.
pub fn l1_objective(z: &[f64], a: &Matrix, phi: &Matrix, y: &[f64], lambda: f64) -> Result<f64> {
    let b = operator(a, phi, y)?;
    if z.len() != b.cols() {
        return Err(Error::dims(format!(
            "code has length {}, dictionary has {} atoms",
            z.len(),
            b.cols()
        )));
    }
    let bz = b.matvec(z);
    let fit: f64 = bz.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok(0.5 * fit + lambda * z.iter().map(|x| x.abs()).sum::<f64>())
}

fn operator(a: &Matrix, phi: &Matrix, y: &[f64]) -> Result<Matrix> {
    if a.cols() != phi.rows() || a.rows() != y.len() {
        return Err(Error::dims(format!(
            "A is {:?}, Phi is {:?}, y has length {}",
            a.shape(),
            phi.shape(),
            y.len()
        )));
    }
    Ok(a.matmul(phi))
}
