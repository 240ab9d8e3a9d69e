//! Reproducible random streams.
//!
//! Backed by ChaCha8 (`rand_chacha`), whose output is specified
//! independently of platform and word size. A run seed plus a key such as
//! `(epoch, batch, purpose)` selects one of 2^64 independent ChaCha streams,
//! so dropout and modality-dropout draws never share a stream and can be
//! regenerated in isolation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_probability, Result};

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream of `seed` selected by `key`.
    pub fn stream(seed: u64, key: &[u64]) -> Self {
        let id = key
            .iter()
            .fold(0x6a09_e667_f3bc_c908u64, |h, &k| splitmix64(h ^ k));
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(id);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random::<u64>()
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// `true` with probability `p`. `p = 1` is always `true`, `p = 0` never.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// `n` independent keep decisions, each `true` with probability `p_keep`.
pub fn bernoulli_mask(rng: &mut SeededRng, n: usize, p_keep: f64) -> Result<Vec<bool>> {
    check_probability("p_keep", p_keep)?;
    Ok((0..n).map(|_| rng.bernoulli(p_keep)).collect())
}
