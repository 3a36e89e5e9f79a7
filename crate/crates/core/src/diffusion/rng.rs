use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::LatentVideo;
use crate::error::Result;

/// Seeded standard-normal source. Equal seeds and equal call sequences give
/// bit-identical draws on every platform.
#[derive(Debug, Clone)]
pub struct NoiseRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl NoiseRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent child generator keyed by `key`.
    pub fn split(&self, key: u64) -> NoiseRng {
        NoiseRng::new(mix_seed(self.seed, key))
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn normal_video(&mut self, frames: usize, dim: usize) -> Result<LatentVideo> {
        let data = (0..frames * dim).map(|_| self.standard_normal()).collect();
        LatentVideo::from_vec(frames, dim, data)
    }
}

/// SplitMix64 finalizer over `seed ^ rotated key`.
pub(crate) fn mix_seed(seed: u64, key: u64) -> u64 {
    let mut z = seed ^ key.rotate_left(32) ^ 0x9E37_79B9_7F4A_7C15;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
