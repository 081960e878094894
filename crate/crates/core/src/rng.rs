//! Seeded random helpers. Every routine that samples takes an explicit seed
//! or generator so that runs are reproducible.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream seed from a base seed and a tag.
pub fn derive(seed: u64, tag: u64) -> u64 {
    let mut x = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 33;
    x = x.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    x ^= x >> 33;
    x
}

pub fn gaussian_vector(rng: &mut Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Uniformly distributed unit vector in the span of orthonormal columns.
pub fn unit_in_span(rng: &mut Rng, basis: &DMatrix<f64>) -> DVector<f64> {
    let c = gaussian_vector(rng, basis.ncols());
    let v = basis * c;
    let n = v.norm();
    if n == 0.0 {
        v
    } else {
        v / n
    }
}
