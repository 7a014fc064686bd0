//! Seeded random sampling used by every stochastic check.
//!
//! All sampling goes through [`rng`], so an identical seed reproduces an
//! identical sample stream regardless of platform.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::prelude::*;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut SampleRng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Uniform direction on the unit sphere.
pub fn unit_vector(rng: &mut SampleRng, dim: usize) -> DVector<f64> {
    loop {
        let g = gaussian(rng, dim);
        let n = g.norm();
        if n > 1e-12 {
            return g / n;
        }
    }
}

/// Uniform point in the closed ball `B(0, radius)`.
pub fn in_ball(rng: &mut SampleRng, dim: usize, radius: f64) -> DVector<f64> {
    let dir = unit_vector(rng, dim);
    let u: f64 = rng.random();
    dir * (radius * u.powf(1.0 / dim as f64))
}

/// Pairs `(u, u')` in `B(0, radius)` for the sampled monotonicity checks.
///
/// Pair separations cycle through `radius`, `radius/10` and `radius/1000`, so
/// both global and local violations are exercised.
pub fn ball_pairs(
    seed: u64,
    dim: usize,
    radius: f64,
    count: usize,
) -> Vec<(DVector<f64>, DVector<f64>)> {
    const SCALES: [f64; 3] = [1.0, 0.1, 1e-3];
    let mut rng = rng(seed);
    (0..count)
        .map(|k| {
            let u = in_ball(&mut rng, dim, radius);
            let offset = in_ball(&mut rng, dim, radius * SCALES[k % 3]);
            let mut v = &u + offset;
            let nv = v.norm();
            if nv > radius {
                v *= radius / nv;
            }
            (u, v)
        })
        .collect()
}

/// Radical inverse of `index` in `base`, the building block of a Halton
/// sequence.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut factor = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % base) as f64 * factor;
        index /= base;
        factor *= inv;
    }
    acc
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Halton point number `index` (1-based recommended) in `[0, 1)^dim`.
/// Dimensions above 16 repeat bases, which weakens but does not break the
/// low-discrepancy property.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|d| radical_inverse(index, PRIMES[d % PRIMES.len()]))
        .collect()
}
