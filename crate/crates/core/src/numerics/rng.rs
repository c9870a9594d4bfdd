//! Deterministic random source with explicit seeding and seed-splitting.

use rand::distributions::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, StandardNormal};

use crate::error::{Error, Result};

/// SplitMix64 finalizer. Used to derive child seeds so that every worker
/// gets a stream that is a pure function of `(parent seed, index)`.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded random source backed by the ChaCha8 stream cipher.
///
/// ChaCha8 is a fixed, portable algorithm: identical seeds produce identical
/// sample streams across runs and platforms. A `RandomSource` is single-owner;
/// parallel workers each derive an independent child via [`RandomSource::child`].
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent child source. The child seed is
    /// `splitmix64(parent_seed ^ splitmix64(index))`, a pure function of the
    /// parent seed and the index — it does not depend on how much of the
    /// parent stream has been consumed.
    pub fn child(&self, index: u64) -> RandomSource {
        RandomSource::new(splitmix64(self.seed ^ splitmix64(index)))
    }

    /// One draw from N(0, 1).
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// One draw from Unif(lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    /// One draw from a chi-squared distribution with `dof` degrees of freedom
    /// (`dof` may be non-integer).
    pub fn chi_squared(&mut self, dof: f64) -> Result<f64> {
        let dist = ChiSquared::new(dof)
            .map_err(|_| Error::InvalidParameter(format!("chi-squared dof must be > 0, got {dof}")))?;
        Ok(dist.sample(&mut self.rng))
    }

    /// Uniform index in `0..bound`.
    pub fn index(&mut self, bound: usize) -> usize {
        self.rng.gen_range(0..bound)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.rng);
    }

    /// `k` indices sampled without replacement from `0..n`, returned sorted.
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        pool.shuffle(&mut self.rng);
        pool.truncate(k);
        pool.sort_unstable();
        pool
    }
}
