//! Seeded random fields.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::{Domain, SpectralField};

/// Independent stream seed for task `stream` under `seed` (splitmix64).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

/// A random low-mode mixture: Gaussian weights on the first `K` modes
/// (`K` uniform in `1..=max_modes`), damped by `λ_k^{-decay/2}`.
pub fn random_low_mode(domain: &Domain, rng: &mut ChaCha8Rng, max_modes: usize, decay: f64) -> SpectralField {
    let n = domain.n_modes();
    let k_max = rng.random_range(1..=max_modes.min(n).max(1));
    let mut c = vec![0.0; n];
    let eig = domain.eigenvalues();
    for (k, v) in c.iter_mut().enumerate().take(k_max) {
        let g: f64 = rng.sample(StandardNormal);
        *v = g * (eig[k] / eig[0]).powf(-0.5 * decay);
    }
    if c.iter().all(|v| *v == 0.0) {
        c[0] = 1.0;
    }
    SpectralField::from_vec_unchecked(c)
}

/// A random field with a random spectral decay rate and log-uniform H₀¹ norm
/// in `[norm_lo, norm_hi]`.
pub fn random_field(domain: &Domain, rng: &mut ChaCha8Rng, norm_lo: f64, norm_hi: f64) -> SpectralField {
    let decay = rng.random_range(1.0..4.0);
    let max_modes = rng.random_range(1..=domain.n_modes().min(24));
    let dir = random_low_mode(domain, rng, max_modes, decay);
    let target = (norm_lo.ln() + rng.random::<f64>() * (norm_hi.ln() - norm_lo.ln())).exp();
    let n = domain.norm_h1(&dir);
    dir.scaled(target / n)
}
