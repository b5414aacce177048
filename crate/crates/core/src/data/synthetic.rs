use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{random_gaussian_matrix, random_orthogonal, spectral_norm, Matrix, SeededRng};

/// Spectral norm the measurement matrix is rescaled to.
pub const MEASUREMENT_NORM: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictKind {
    Orthogonal,
    GaussianNonOrthogonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Signal dimension `N`.
    #[serde(rename = "N")]
    pub big_n: usize,
    /// Measurement dimension `n`.
    pub n: usize,
    /// Exact support size of every code vector.
    pub s: usize,
    pub m_train: usize,
    pub m_test: usize,
    pub dict_kind: DictKind,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.big_n == 0 || self.n == 0 {
            return Err(Error::InvalidSpec("dimensions must be positive".into()));
        }
        if self.s == 0 || self.s > self.big_n {
            return Err(Error::InvalidSpec(format!(
                "sparsity {} outside 1..={}",
                self.s, self.big_n
            )));
        }
        if self.n > self.big_n {
            return Err(Error::InvalidSpec(format!(
                "n = {} exceeds N = {}",
                self.n, self.big_n
            )));
        }
        Ok(())
    }
}

/// Signals `X` (columns), measurements `Y = A X`, and the generating matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub a: Matrix,
    pub x: Matrix,
    pub y: Matrix,
    pub phi0: Option<Matrix>,
}

impl Dataset {
    pub fn new(a: Matrix, x: Matrix, phi0: Option<Matrix>) -> Result<Self> {
        if a.cols() != x.rows() {
            return Err(Error::dims(format!(
                "A is {:?} but signals have {} rows",
                a.shape(),
                x.rows()
            )));
        }
        let y = a.matmul(&x);
        Ok(Dataset { a, x, y, phi0 })
    }

    pub fn len(&self) -> usize {
        self.x.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `B_in = max_i ‖y_i‖₂`.
    pub fn input_bound(&self) -> f64 {
        self.y.column_norms().into_iter().fold(0.0, f64::max)
    }

    /// `max_i ‖x_i‖₂`.
    pub fn output_bound(&self) -> f64 {
        self.x.column_norms().into_iter().fold(0.0, f64::max)
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            a: self.a.clone(),
            x: self.x.select_columns(idx),
            y: self.y.select_columns(idx),
            phi0: self.phi0.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTest {
    pub train: Dataset,
    pub test: Dataset,
}

/// Rescales `A` to spectral norm [`MEASUREMENT_NORM`].
pub fn normalize_measurement(a: &Matrix) -> Result<Matrix> {
    let norm = spectral_norm(a)?;
    if norm == 0.0 {
        return Err(Error::InvalidSpec("measurement matrix is zero".into()));
    }
    Ok(a.scale(MEASUREMENT_NORM / norm))
}

/// Code matrix with `s`-sparse standard-normal columns.
pub fn sparse_codes(rng: &mut SeededRng, big_n: usize, s: usize, m: usize) -> Matrix {
    let mut z = Matrix::zeros(big_n, m);
    for i in 0..m {
        for k in rng.sample_subset(big_n, s) {
            z[(k, i)] = rng.normal();
        }
    }
    z
}

/// Draws `A`, then `Φ₀`, then the training codes, then the test codes, all
/// from one stream seeded by `spec.seed`.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<TrainTest> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let a = normalize_measurement(&random_gaussian_matrix(&mut rng, spec.n, spec.big_n))?;
    let phi0 = match spec.dict_kind {
        DictKind::Orthogonal => random_orthogonal(&mut rng, spec.big_n),
        DictKind::GaussianNonOrthogonal => {
            random_gaussian_matrix(&mut rng, spec.big_n, spec.big_n)
                .scale(1.0 / (spec.big_n as f64).sqrt())
        }
    };
    let z_train = sparse_codes(&mut rng, spec.big_n, spec.s, spec.m_train);
    let z_test = sparse_codes(&mut rng, spec.big_n, spec.s, spec.m_test);
    let train = Dataset::new(a.clone(), phi0.matmul(&z_train), Some(phi0.clone()))?;
    let test = Dataset::new(a, phi0.matmul(&z_test), Some(phi0))?;
    Ok(TrainTest { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            big_n: 10,
            n: 6,
            s: 3,
            m_train: 20,
            m_test: 7,
            dict_kind: DictKind::Orthogonal,
            seed,
        }
    }

    #[test]
    fn normalize_examples() {
        let a = Matrix::identity(2).scale(2.0);
        let b = normalize_measurement(&a).unwrap();
        assert!((b[(0, 0)] - 0.99).abs() < 1e-12 && b[(0, 1)] == 0.0);
        let mut rng = SeededRng::new(3);
        let g = random_gaussian_matrix(&mut rng, 5, 9);
        let n1 = normalize_measurement(&g).unwrap();
        assert!((spectral_norm(&n1).unwrap() - 0.99).abs() < 1e-8);
        let n2 = normalize_measurement(&n1).unwrap();
        assert!(n1.sub(&n2).max_abs() < 1e-8);
        assert!(normalize_measurement(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn synthetic_is_deterministic_and_consistent() {
        let a = gen_synthetic(&spec(5)).unwrap();
        let b = gen_synthetic(&spec(5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_synthetic(&spec(6)).unwrap());
        for d in [&a.train, &a.test] {
            let r = d.y.sub(&d.a.matmul(&d.x)).frobenius_norm();
            assert!(r <= 1e-12 * d.y.frobenius_norm());
            // Orthogonal Φ₀ recovers the codes exactly enough to count support.
            let z = d.phi0.as_ref().unwrap().t_matmul(&d.x);
            for j in 0..d.len() {
                let nnz = z.column(j).iter().filter(|v| v.abs() > 1e-9).count();
                assert_eq!(nnz, 3);
            }
        }
        assert_eq!((a.train.len(), a.test.len()), (20, 7));
    }

    #[test]
    fn shrinking_test_split_keeps_train() {
        let full = gen_synthetic(&spec(9)).unwrap();
        let mut small = spec(9);
        small.m_test = 1;
        assert_eq!(gen_synthetic(&small).unwrap().train, full.train);
    }

    #[test]
    fn full_support() {
        let mut rng = SeededRng::new(1);
        let z = sparse_codes(&mut rng, 5, 5, 1);
        assert!(z.as_slice().iter().all(|v| *v != 0.0));
    }

    #[test]
    fn support_frequencies_are_uniform() {
        let mut rng = SeededRng::new(77);
        let z = sparse_codes(&mut rng, 10, 2, 10_000);
        for k in 0..10 {
            let hits = z.row(k).iter().filter(|v| **v != 0.0).count() as f64;
            let freq = hits / 10_000.0;
            assert!((freq - 0.2).abs() <= 0.02, "index {k}: {freq}");
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = spec(1);
        s.s = 11;
        assert!(gen_synthetic(&s).is_err());
        let mut s = spec(1);
        s.n = 11;
        assert!(s.validate().is_err());
    }
}
