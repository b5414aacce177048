//! Dense numerics: matrices, norms, seeded sampling, and the scalar maps
//! (soft thresholding, output clipping, the entropy envelope `psi`).

mod matrix;
mod rng;
mod scalar;
mod spectral;

pub use matrix::{axpy, dot, frobenius_norm, norm2, Matrix};
pub use rng::{random_gaussian_matrix, SeededRng, RNG_ALGORITHM};
pub use scalar::{clip_columns, clip_to_ball, psi, soft_threshold, soft_threshold_map};
pub use spectral::{
    dominant_singular_pair, orthogonal_factor, random_orthogonal, spectral_norm, symmetric_eigen,
    SingularPair, POWER_MAX_ITERS, POWER_TOL,
};
