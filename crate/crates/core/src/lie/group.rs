use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use super::closure::MatrixLieAlgebra;
use crate::linalg;

/// Group element produced by sampling, with the exponent coefficients that
/// produced it.
#[derive(Clone, Debug)]
pub struct GroupElement {
    pub matrix: DMatrix<f64>,
    /// Coefficients of each exponential factor in the algebra basis.
    pub word: Vec<Vec<f64>>,
}

impl GroupElement {
    pub fn identity(k: usize) -> Self {
        Self { matrix: DMatrix::identity(k, k), word: Vec::new() }
    }

    pub fn from_coefficients(alg: &MatrixLieAlgebra, word: Vec<Vec<f64>>) -> Self {
        let k = alg.space_dim;
        let mut m = DMatrix::identity(k, k);
        for coeffs in &word {
            let mut x = DMatrix::zeros(k, k);
            for (c, b) in coeffs.iter().zip(&alg.basis) {
                x += b * *c;
            }
            m *= linalg::expm(&x);
        }
        Self { matrix: m, word }
    }
}

/// Number of exponential factors per sample.
pub const HAAR_FACTORS: usize = 3;

/// Approximately Haar-distributed samples of the connected group of `alg`.
///
/// Each sample is a product of three exponentials with coefficients drawn
/// uniformly from `[-pi, pi]`. For a one-dimensional torus this is exactly
/// Haar; for larger groups it mixes quickly and is sufficient for averaging.
pub fn haar_sample(alg: &MatrixLieAlgebra, count: usize, seed: u64) -> Vec<GroupElement> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            if alg.dim() == 0 {
                return GroupElement::identity(alg.space_dim);
            }
            let word = (0..HAAR_FACTORS)
                .map(|_| (0..alg.dim()).map(|_| rng.random_range(-PI..PI)).collect())
                .collect();
            GroupElement::from_coefficients(alg, word)
        })
        .collect()
}
