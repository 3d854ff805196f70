//! Seed derivation and complex Gaussian sampling.
//!
//! Every stochastic stage takes an explicit seed. Child seeds are derived
//! from a master seed with a counter-based SplitMix64 mix so that results
//! never depend on scheduling order or thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use nalgebra::DVector;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of stream `index` from `master`.
pub fn split_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One draw of CN(0, variance): independent real and imaginary parts, each
/// with variance `variance / 2`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// A vector with i.i.d. CN(0, variance) entries.
pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, dim: usize, variance: f64) -> DVector<Complex64> {
    DVector::from_fn(dim, |_, _| complex_gaussian(rng, variance))
}
