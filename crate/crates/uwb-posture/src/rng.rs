//! Deterministic random number generation.
//!
//! Every random decision in this crate flows from a single `u64` seed through
//! ChaCha8 streams, so results are reproducible bit for bit across platforms
//! and across runs. Each independent consumer (a simulated sample, a tree's
//! feature subset, a per-class shuffle) gets its own stream index, which keeps
//! draw sequences independent of the order in which consumers run.
//!
//! Stream index ranges, so unrelated consumers can never collide:
//!
//! * `1_000 + subject`            simulator subject geometry
//! * `10_000 + sample`            simulator per-sample draws
//! * `90_000`                     simulator out-of-distribution sessions
//! * `2_000_000 + class`          dataset stratified split
//! * `3_000_000 + class`          trainer validation split
//! * `4_000_000 + tree`           trainer per-tree feature subsets
//! * `5_000_000 + class`          out-of-distribution fitting subsample
//!
//! Helper distributions (uniform, Gaussian, shuffling) are written out
//! explicitly rather than pulled from a distributions crate so the exact
//! algorithm is part of this crate's contract.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Creates a ChaCha8 generator on the given stream of the given seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw in `[0, 1)` using the top 53 bits of one `u64`.
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in `[lo, hi)`.
pub fn uniform_range(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

/// One pair of independent standard Gaussian draws via the Box-Muller
/// transform. `1 - u` keeps the logarithm away from zero.
pub fn normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1 = uniform(rng);
    let u2 = uniform(rng);
    let r = (-2.0 * (1.0 - u1).ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

/// One standard Gaussian draw. Consumes a full Box-Muller pair and discards
/// the second value, trading a draw for a fixed consumption pattern.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    normal_pair(rng).0
}

/// In-place Fisher-Yates shuffle. Index selection uses `next_u64 % n`; the
/// modulo bias is far below anything observable at the sizes shuffled here
/// and keeps the algorithm one line.
pub fn shuffle<T>(rng: &mut ChaCha8Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// Draws `k` distinct indices from `0..n`, returned in ascending order.
pub fn sample_indices(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    let k = k.min(n);
    // Partial Fisher-Yates: after i swaps the first i entries are a uniform
    // sample without replacement.
    for i in 0..k {
        let j = i + (rng.next_u64() % (n - i) as u64) as usize;
        all.swap(i, j);
    }
    let mut picked = all[..k].to_vec();
    picked.sort_unstable();
    picked
}
