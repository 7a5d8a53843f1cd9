//! Deterministic chunked Monte Carlo.
//!
//! The sample range `0..n` is cut into fixed-size chunks. Chunk `i` draws from
//! its own ChaCha8 stream seeded with `mix(seed ^ i)`, and per-chunk
//! accumulators are merged in chunk order, so results are bit-identical for any
//! worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per chunk.
pub const CHUNK_SIZE: usize = 1 << 16;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of chunk `index` under the master `seed`.
pub fn chunk_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index))
}

pub fn chunk_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(chunk_seed(seed, index as u64))
}

/// Single-pass mean/variance accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise merge.
    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / n as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.count as f64 * w;
        self.count = n;
    }

    /// Sample variance (n - 1 denominator).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Runs `work(chunk_index, count, rng)` for every chunk of `0..n` and returns
/// the results in chunk order.
pub fn for_each_chunk<T, F>(n: usize, seed: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize, &mut ChaCha8Rng) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK_SIZE);
    (0..chunks)
        .into_par_iter()
        .map(|i| {
            let count = CHUNK_SIZE.min(n - i * CHUNK_SIZE);
            let mut rng = chunk_rng(seed, i);
            work(i, count, &mut rng)
        })
        .collect()
}
