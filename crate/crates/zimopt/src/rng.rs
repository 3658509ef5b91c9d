//! Deterministic random source.
//!
//! Everything stochastic in this crate draws from [`RngState`]: ChaCha12
//! keyed by a 64-bit seed. ChaCha is a counter-based stream generator with
//! published reference outputs; its output is identical on every platform,
//! so a (seed, stream) pair pins an experiment bit-for-bit. Stream ids
//! separate decoupled uses (weight init, batch order, update sampling) so
//! consuming one stream never perturbs another.
//!
//! Binomial draws go through exact algorithms only: inversion for small
//! `n * p` and the BTPE rejection method otherwise, never a normal
//! approximation, so moment tests see the true distribution.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, Normal};

/// Seeded, platform-independent generator state.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    rng: ChaCha12Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// A decoupled stream under the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        self.rng.random()
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        Normal::new(mean, std_dev)
            .expect("normal parameters must be finite with std_dev >= 0")
            .sample(&mut self.rng)
    }

    /// Exact Binomial(n, p) draw.
    pub fn binomial(&mut self, n: u64, p: f64) -> u64 {
        debug_assert!((0.0..=1.0).contains(&p), "binomial p out of range: {p}");
        if n == 0 || p <= 0.0 {
            return 0;
        }
        if p >= 1.0 {
            return n;
        }
        Binomial::new(n, p)
            .expect("binomial parameters validated above")
            .sample(&mut self.rng)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        xs.shuffle(&mut self.rng);
    }
}
