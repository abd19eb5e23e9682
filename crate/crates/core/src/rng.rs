//! Seeded, splittable random streams.
//!
//! A stream is the pair `(seed, stream)`. The generator is ChaCha8 whose
//! 256-bit key is expanded from `seed` (PCG32 expansion, `SeedableRng::seed_from_u64`)
//! and whose 64-bit nonce is `stream`. The sequence depends only on the pair,
//! so it replays bit-for-bit on every platform. Normal draws use the ziggurat
//! sampler from `rand_distr`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub type Generator = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// A child stream under the same seed. Distinct tags give distinct nonces.
    pub fn fork(&self, tag: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(tag)),
        }
    }

    /// Fork keyed by a string label, for readability at call sites.
    pub fn fork_named(&self, label: &str) -> RngStream {
        // FNV-1a; stable across platforms and toolchains.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        self.fork(h)
    }

    pub fn generator(&self) -> Generator {
        let mut g = ChaCha8Rng::seed_from_u64(self.seed);
        g.set_stream(self.stream);
        g
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn fill_standard_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}

/// `n` i.i.d. N(0, 1) draws from a fresh generator for `stream`.
pub fn sample_standard_normal(stream: &RngStream, n: usize) -> Vec<f64> {
    let mut g = stream.generator();
    let mut out = vec![0.0; n];
    fill_standard_normal(&mut g, &mut out);
    out
}

/// Uniformly random `k`-subset of `0..n`, in draw order (partial Fisher-Yates).
pub fn sample_without_replacement<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot draw {k} of {n}");
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

pub fn shuffle<T, R: Rng + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}
