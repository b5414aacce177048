//! Operator norms and orthogonal sampling.

use super::matrix::{dot, norm2, Matrix};
use super::rng::{random_gaussian_matrix, SeededRng};
use crate::error::{Error, Result};

pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITERS: usize = 5000;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Leading singular triple `M v = sigma u`, `‖u‖ = ‖v‖ = 1`.
#[derive(Clone, Debug)]
pub struct SingularPair {
    pub sigma: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// `‖M‖_{2→2}`.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    dominant_singular_pair(m).map(|p| p.sigma)
}

/// Power iteration on `MᵀM` from a perturbed all-ones start, stopping once the
/// Rayleigh quotient changes by at most `POWER_TOL` (relative). If the
/// iteration stalls (clustered leading singular values) the pair is taken
/// from a Jacobi eigendecomposition of the Gram matrix instead.
pub fn dominant_singular_pair(m: &Matrix) -> Result<SingularPair> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::dims("spectral norm of an empty matrix"));
    }
    if !m.is_finite() {
        return Err(Error::NonConvergence { iterations: 0 });
    }
    if m.max_abs() == 0.0 {
        let mut u = vec![0.0; rows];
        u[0] = 1.0;
        let mut v = vec![0.0; cols];
        v[0] = 1.0;
        return Ok(SingularPair { sigma: 0.0, u, v });
    }

    let mut v: Vec<f64> = (0..cols)
        .map(|i| 1.0 + 1e-6 * ((i * 7919) % 101) as f64 / 101.0)
        .collect();
    normalize(&mut v);
    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITERS {
        let w = m.matvec(&v);
        let rq = dot(&w, &w);
        if rq == 0.0 {
            break;
        }
        let mut next = m.t_matvec(&w);
        if normalize(&mut next) == 0.0 {
            break;
        }
        if (rq - prev).abs() <= POWER_TOL * rq {
            let sigma = rq.sqrt();
            let u = w.iter().map(|x| x / sigma).collect();
            return Ok(SingularPair { sigma, u, v });
        }
        prev = rq;
        v = next;
    }
    jacobi_pair(m)
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

fn jacobi_pair(m: &Matrix) -> Result<SingularPair> {
    let gram = m.t_matmul(m);
    let (values, vectors) = symmetric_eigen(&gram)?;
    let (best, lambda) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, l)| if l > acc.1 { (i, l) } else { acc });
    let v = vectors.column(best);
    let sigma = lambda.max(0.0).sqrt();
    let w = m.matvec(&v);
    let u = if sigma > 0.0 {
        w.iter().map(|x| x / sigma).collect()
    } else {
        let mut e = vec![0.0; m.rows()];
        e[0] = 1.0;
        e
    };
    Ok(SingularPair { sigma, u, v })
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
/// eigenvalues and a matrix whose columns are the matching eigenvectors.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    assert!(a.is_square());
    let n = a.rows();
    let mut a = a.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            let values = (0..n).map(|i| a[(i, i)]).collect();
            return Ok((values, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: JACOBI_MAX_SWEEPS,
    })
}

/// Householder QR of a square matrix with the signs fixed so that `R` has a
/// positive diagonal. Returns `Q`.
pub fn orthogonal_factor(g: &Matrix) -> Matrix {
    assert!(g.is_square());
    let n = g.rows();
    let mut r = g.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let x: Vec<f64> = (k..n).map(|i| r[(i, k)]).collect();
        let xnorm = norm2(&x);
        if xnorm == 0.0 {
            reflectors.push(vec![0.0; n - k]);
            continue;
        }
        let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
        let mut v = x;
        v[0] -= alpha;
        normalize(&mut v);
        for j in k..n {
            let proj: f64 = (k..n).map(|i| v[i - k] * r[(i, j)]).sum();
            for i in k..n {
                r[(i, j)] -= 2.0 * v[i - k] * proj;
            }
        }
        reflectors.push(v);
    }
    let mut q = Matrix::identity(n);
    for k in (0..n).rev() {
        let v = &reflectors[k];
        for j in 0..n {
            let proj: f64 = (k..n).map(|i| v[i - k] * q[(i, j)]).sum();
            if proj != 0.0 {
                for i in k..n {
                    q[(i, j)] -= 2.0 * v[i - k] * proj;
                }
            }
        }
    }
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Haar-distributed orthogonal matrix: `Q` from the sign-normalized QR of an
/// `n x n` Gaussian matrix.
pub fn random_orthogonal(rng: &mut SeededRng, n: usize) -> Matrix {
    let g = random_gaussian_matrix(rng, n, n);
    orthogonal_factor(&g)
}
