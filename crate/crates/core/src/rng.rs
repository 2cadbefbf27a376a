//! Deterministic, splittable random streams.
//!
//! Every Monte Carlo task draws from its own ChaCha12 stream. The 256-bit
//! ChaCha key is derived from `(master seed, domain tag, stream index)` with
//! the SplitMix64 finalizer, so the stream for a given task is a pure
//! function of those three integers: the same run produces bit-identical
//! output no matter how tasks are scheduled across worker threads, and the
//! same holds across platforms because ChaCha and the derivation below are
//! integer-only.
//!
//! Pinned algorithms:
//! - generator: ChaCha12 (`rand_chacha::ChaCha12Rng`),
//! - key derivation: SplitMix64 finalizer chain (see [`stream_seed`]),
//! - uniforms: 53-bit mantissa from the top bits of `next_u64`,
//! - normals: Box-Muller transform,
//! - exponentials: inverse CDF,
//! - Poisson: exponential-race counting.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Domain tags keep streams for different purposes disjoint even when their
/// indices collide.
pub mod tags {
    /// Loop-soup sampling (one stream per replica attempt).
    pub const SOUP: u64 = 0x01;
    /// Stable-process paths (one stream per path or path pair).
    pub const LEVY: u64 = 0x02;
    /// Metric-sample pair selection.
    pub const PAIRS: u64 = 0x03;
    /// Bootstrap resampling.
    pub const BOOTSTRAP: u64 = 0x04;
    /// Scratch streams for self tests.
    pub const SELFTEST: u64 = 0x05;
    /// Independent stable-process pairs.
    pub const LEVY_PAIR: u64 = 0x06;
    /// Jump-sum path batteries.
    pub const LEVY_JUMPS: u64 = 0x07;
    /// Infimum-moment path pairs.
    pub const LEVY_MOMENTS: u64 = 0x08;
    /// Positivity-estimate chunks.
    pub const LEVY_POSITIVITY: u64 = 0x09;
    /// Quantile replica attempts.
    pub const REPLICA: u64 = 0x0a;
}

/// SplitMix64 finalizer (Vigna); bijective on `u64`.
#[inline]
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// 256-bit ChaCha12 key for stream `(master, tag, index)`.
///
/// `base = mix(mix(master ^ mix(tag)) ^ mix(index))`, then the four key
/// words are `mix(base + k * GOLDEN)` for `k = 1..=4`, serialized
/// little-endian.
pub fn stream_seed(master: u64, tag: u64, index: u64) -> [u8; 32] {
    let base = mix(mix(master ^ mix(tag)) ^ mix(index));
    let mut seed = [0u8; 32];
    for k in 0..4u64 {
        let word = mix(base.wrapping_add((k + 1).wrapping_mul(GOLDEN)));
        seed[8 * k as usize..8 * (k + 1) as usize].copy_from_slice(&word.to_le_bytes());
    }
    seed
}

/// A single deterministic stream.
#[derive(Debug, Clone)]
pub struct RunRng {
    inner: ChaCha12Rng,
}

impl RunRng {
    pub fn from_stream(master: u64, tag: u64, index: u64) -> Self {
        RunRng {
            inner: ChaCha12Rng::from_seed(stream_seed(master, tag, index)),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random mantissa bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`; safe to feed to `ln`.
    #[inline]
    pub fn uniform_pos(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[0, n)` by scaled mantissa; fine for the modest
    /// `n` used here (index selection, not cryptography).
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let i = (self.uniform() * n as f64) as usize;
        i.min(n - 1)
    }

    /// Standard normal pair via Box-Muller.
    #[inline]
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let r = libm::sqrt(-2.0 * libm::log(self.uniform_pos()));
        let theta = 2.0 * core::f64::consts::PI * self.uniform();
        (r * libm::cos(theta), r * libm::sin(theta))
    }

    /// Exponential with unit mean.
    #[inline]
    pub fn exp(&mut self) -> f64 {
        -libm::log(self.uniform_pos())
    }

    /// Poisson count by summing unit exponentials until they exceed `mean`.
    /// Exact for any mean; cost is O(mean) draws.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        debug_assert!(mean >= 0.0 && mean.is_finite());
        let mut acc = self.exp();
        let mut count = 0u64;
        while acc <= mean {
            count += 1;
            acc += self.exp();
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = RunRng::from_stream(7, tags::SOUP, 0);
        let mut b = RunRng::from_stream(7, tags::SOUP, 0);
        let mut c = RunRng::from_stream(7, tags::SOUP, 1);
        let mut d = RunRng::from_stream(7, tags::LEVY, 0);
        let xs: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs[0], c.next_u64());
        assert_ne!(xs[0], d.next_u64());
    }

    #[test]
    fn tag_and_index_do_not_commute() {
        assert_ne!(stream_seed(1, 2, 3), stream_seed(1, 3, 2));
    }

    #[test]
    fn uniform_in_range() {
        let mut rng = RunRng::from_stream(1, tags::SELFTEST, 0);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
            let v = rng.uniform_pos();
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn normal_moments() {
        let mut rng = RunRng::from_stream(2, tags::SELFTEST, 0);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n / 2 {
            let (a, b) = rng.normal_pair();
            sum += a + b;
            sum_sq += a * a + b * b;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn poisson_mean_and_variance() {
        let mut rng = RunRng::from_stream(3, tags::SELFTEST, 0);
        for &mean in &[0.3, 4.0, 200.0] {
            let n = 20_000;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n {
                let k = rng.poisson(mean) as f64;
                sum += k;
                sum_sq += k * k;
            }
            let m = sum / n as f64;
            let v = sum_sq / n as f64 - m * m;
            let tol = 4.0 * libm::sqrt(mean / n as f64) + 0.01 * mean;
            assert!((m - mean).abs() < tol, "mean {m} vs {mean}");
            assert!((v - mean).abs() < 6.0 * mean / libm::sqrt(n as f64) + 0.05 * mean);
        }
    }
}
