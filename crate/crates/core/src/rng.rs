//! Counter-based deterministic random streams.
//!
//! Every generated value is a pure function of `(seed, stream words, counter)`,
//! so independent streams can be handed to independent work items (one per UE,
//! one per sample, ...) and the aggregate output does not depend on evaluation
//! order or thread count. The generator is the SplitMix64 finalizer applied to
//! a keyed counter.

use crate::C64;

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Domain tags keeping unrelated consumers of one seed statistically disjoint.
pub mod domain {
    /// Per-UE path synthesis.
    pub const CHANNEL: u64 = 1;
    /// Per-sample measurement noise.
    pub const NOISE: u64 = 2;
    /// Model weight initialization.
    pub const WEIGHT_INIT: u64 = 3;
    /// Epoch shuffling during training.
    pub const SHUFFLE: u64 = 4;
    /// Locality-sensitive hash projections.
    pub const LSH: u64 = 5;
    /// Evaluation-time re-measurement (noise grids, baselines).
    pub const EVAL: u64 = 6;
}

/// A keyed counter-based random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    counter: u64,
    cached_normal: Option<f64>,
}

impl RngStream {
    /// Stream identified by a seed and a single stream word.
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::keyed(seed, &[stream])
    }

    /// Stream identified by a seed and a list of words (domain tag, index, ...).
    pub fn keyed(seed: u64, words: &[u64]) -> Self {
        let mut key = mix64(seed ^ GAMMA);
        for &w in words {
            key = mix64(key ^ w.wrapping_mul(GAMMA));
        }
        RngStream {
            key,
            counter: 0,
            cached_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform in [0, 1), 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n). `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        // Modulo bias is < 2^-53 for any n this crate uses.
        (self.uniform() * n as f64) as usize % n
    }

    /// Standard normal via Box-Muller; second draw of each pair is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = core::f64::consts::TAU * u2;
        self.cached_normal = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    /// Circularly-symmetric complex Gaussian with total power `variance`.
    pub fn complex_gaussian(&mut self, variance: f64) -> C64 {
        let s = libm::sqrt(variance / 2.0);
        C64::new(s * self.normal(), s * self.normal())
    }

    /// Rayleigh-distributed amplitude with the given mean.
    pub fn rayleigh_with_mean(&mut self, mean: f64) -> f64 {
        // Rayleigh(scale s) has mean s*sqrt(pi/2).
        let scale = mean / libm::sqrt(core::f64::consts::PI / 2.0);
        let u = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        scale * libm::sqrt(-2.0 * libm::log(u))
    }

    /// Unit-magnitude complex number with uniform phase.
    pub fn unit_phase(&mut self) -> C64 {
        let theta = core::f64::consts::TAU * self.uniform();
        C64::new(libm::cos(theta), libm::sin(theta))
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
