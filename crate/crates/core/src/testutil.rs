use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use crate::toy::random_integrals;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_symmetric(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng(seed);
    let mut m = DMatrix::zeros(d, d);
    for r in 0..d {
        for c in 0..=r {
            let v: f64 = rng.random_range(-1.0..1.0);
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
    m
}

/// Projector onto `k` random orthonormal directions.
pub fn random_idempotent(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let q = crate::linalg::haar_orthogonal(n, &mut rng(seed));
    let c = q.columns(0, k);
    c * c.transpose()
}
