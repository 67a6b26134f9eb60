//! Seedable, platform-stable random streams.
//!
//! Every stream is a ChaCha8 generator. Independent sub-streams (per round,
//! per client, per purpose) are derived by hashing the base seed with a tag
//! sequence, so the draws made for one client never depend on how many draws
//! another consumer made.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a tag path.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix(base), |acc, &t| mix(acc ^ mix(t)))
}

#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// An independent stream keyed by `tags`.
    pub fn derive(seed: u64, tags: &[u64]) -> Self {
        Self::new(derive_seed(seed, tags))
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Standard normal via Box-Muller (one value per pair of uniforms).
    pub fn standard_normal(&mut self) -> f64 {
        // 1 - u lies in (0, 1], so the log is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    /// Index drawn by inverse CDF over `weights` (nonnegative, positive sum).
    /// Zero-weight entries are never returned.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            acc += w;
            cumulative.push(acc);
        }
        self.categorical_cumulative(&cumulative)
    }

    /// Inverse-CDF draw from precomputed cumulative sums.
    pub fn categorical_cumulative(&mut self, cumulative: &[f64]) -> usize {
        let total = *cumulative.last().expect("categorical over empty support");
        let u = self.uniform() * total;
        let idx = cumulative.partition_point(|&c| c <= u);
        // u < total up to rounding; fall back to the last positive-mass entry.
        idx.min(last_positive(cumulative))
    }

    /// `k` distinct indices from `0..n`, uniformly.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.inner, n, k).into_vec()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

fn last_positive(cumulative: &[f64]) -> usize {
    let total = cumulative[cumulative.len() - 1];
    cumulative.partition_point(|&c| c < total)
}
