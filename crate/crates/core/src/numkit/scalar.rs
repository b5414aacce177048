use super::matrix::{norm2, Matrix};

/// Soft thresholding `sign(x) * max(0, |x| - theta)`.
#[inline]
pub fn soft_threshold(x: f64, theta: f64) -> f64 {
    debug_assert!(theta >= 0.0);
    if x > theta {
        x - theta
    } else if x < -theta {
        x + theta
    } else {
        0.0
    }
}

pub fn soft_threshold_map(m: &Matrix, theta: f64) -> Matrix {
    m.map(|x| soft_threshold(x, theta))
}

/// Radial projection onto the Euclidean ball of radius `b_out`.
pub fn clip_to_ball(v: &[f64], b_out: f64) -> Vec<f64> {
    debug_assert!(b_out > 0.0);
    let norm = norm2(v);
    if norm <= b_out {
        v.to_vec()
    } else {
        let s = b_out / norm;
        v.iter().map(|x| s * x).collect()
    }
}

/// Applies [`clip_to_ball`] to every column.
pub fn clip_columns(m: &Matrix, b_out: f64) -> Matrix {
    let norms = m.column_norms();
    let mut out = m.clone();
    for i in 0..m.rows() {
        for (j, norm) in norms.iter().enumerate() {
            if *norm > b_out {
                out[(i, j)] *= b_out / norm;
            }
        }
    }
    out
}

/// Entropy-integral envelope `sqrt(log(1+t) + t(log(1+t) - log t))`,
/// extended by `psi(0) = 0`.
pub fn psi(t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t < 1e-300 {
        return 0.0;
    }
    // t * (log(1+t) - log t) == t * log1p(1/t), stable for large t.
    (t.ln_1p() + t * (1.0 / t).ln_1p()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::rng::{random_gaussian_matrix, SeededRng};
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(2.0, 1.5), 0.5);
        assert_eq!(soft_threshold(0.0, 0.7), 0.0);
        assert_eq!(soft_threshold(0.0, 0.0), 0.0);
        assert_eq!(soft_threshold(-0.3, 0.5), 0.0);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
    }

    #[test]
    fn threshold_map_examples() {
        assert_eq!(
            soft_threshold_map(&Matrix::zeros(3, 4), 0.3),
            Matrix::zeros(3, 4)
        );
        let m = Matrix::from_rows(&[&[2.0]]);
        assert_eq!(soft_threshold_map(&m, 1.5), Matrix::from_rows(&[&[0.5]]));
    }

    #[test]
    fn threshold_map_shrinks_frobenius_norm() {
        let mut rng = SeededRng::new(99);
        for k in 0..100 {
            let m = random_gaussian_matrix(&mut rng, 1 + k % 7, 1 + k % 5);
            let theta = rng.uniform() * 2.0;
            let s = soft_threshold_map(&m, theta);
            assert_eq!(s.shape(), m.shape());
            assert!(s.frobenius_norm() <= m.frobenius_norm());
        }
    }

    #[test]
    fn clip_examples() {
        let v = [0.3, 0.4];
        assert_eq!(clip_to_ball(&v, 1.0), v.to_vec());
        let c = clip_to_ball(&[3.0, 4.0], 1.0);
        assert!((c[0] - 0.6).abs() < 1e-15 && (c[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn clip_is_nonexpansive_on_samples() {
        let mut rng = SeededRng::new(5);
        for _ in 0..2000 {
            let d = 1 + rng.below(6);
            let v1: Vec<f64> = (0..d).map(|_| 3.0 * rng.normal()).collect();
            let v2: Vec<f64> = (0..d).map(|_| 3.0 * rng.normal()).collect();
            let b = 0.1 + 4.0 * rng.uniform();
            let (c1, c2) = (clip_to_ball(&v1, b), clip_to_ball(&v2, b));
            let diff: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| a - b).collect();
            let orig: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a - b).collect();
            assert!(norm2(&diff) <= norm2(&orig) * (1.0 + 1e-14));
            assert!(norm2(&c1) <= norm2(&v1).min(b) * (1.0 + 1e-14));
        }
    }

    #[test]
    fn clip_columns_matches_per_column() {
        let mut rng = SeededRng::new(6);
        let m = random_gaussian_matrix(&mut rng, 4, 9);
        let c = clip_columns(&m, 1.5);
        for j in 0..9 {
            assert_eq!(c.column(j), clip_to_ball(&m.column(j), 1.5));
        }
    }

    #[test]
    fn psi_values() {
        assert_eq!(psi(0.0), 0.0);
        assert_eq!(psi(1e-301), 0.0);
        // sqrt(2 ln 2) evaluated independently.
        assert!((psi(1.0) - 1.177_410_022_515_474_7).abs() < 1e-14);
    }

    #[test]
    fn psi_below_log_envelope_and_monotone() {
        let mut prev = 0.0;
        for k in 0..=900 {
            let t = 10f64.powf(-6.0 + 9.0 * k as f64 / 900.0);
            let p = psi(t);
            assert!(p <= (1.0 + t.ln_1p()).sqrt(), "t={t}");
            assert!(p >= prev, "not monotone at t={t}");
            prev = p;
        }
        assert!(psi(1e-12) < 1e-5);
    }

    proptest! {
        #[test]
        fn soft_threshold_is_one_lipschitz(x in -10.0..10.0f64, y in -10.0..10.0f64, th in 0.0..5.0f64) {
            prop_assert!((soft_threshold(x, th) - soft_threshold(y, th)).abs() <= (x - y).abs() + 4.0 * f64::EPSILON * (1.0 + x.abs() + y.abs()));
        }

        #[test]
        fn threshold_perturbation(x in -10.0..10.0f64, t1 in 0.01..2.0f64, l1 in 0.01..2.0f64,
                                  t2 in 0.01..2.0f64, l2 in 0.01..2.0f64) {
            let d = (soft_threshold(x, t2 * l2) - soft_threshold(x, t1 * l1)).abs();
            prop_assert!(d <= (t2 * l2 - t1 * l1).abs() + 4.0 * f64::EPSILON * (1.0 + x.abs()));
        }
    }
}
