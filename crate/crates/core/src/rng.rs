//! Deterministic random source.
//!
//! Every stochastic decision in the crate draws from a [`Prng`], a PCG32
//! (`XSH RR`, 64-bit state, 32-bit output) generator. The LCG constants are
//! the reference ones:
//!
//! ```text
//! multiplier = 6364136223846793005
//! increment  = (stream << 1) | 1
//! ```
//!
//! A root generator is built from a 64-bit seed with the default PCG stream
//! `0xa02bdbf7bb3c0a7`. Named substreams keep independent consumers (data
//! generation, weight init, policy sampling) from perturbing one another:
//! the substream's stream id is the FNV-1a hash of its name folded into the
//! parent stream id, and its starting state is `splitmix64(seed ^ stream)`.
//!
//! Derived draws are fixed so other implementations can reproduce them:
//! `uniform` is `(next_u64 >> 11) * 2^-53`, `normal` is one Box-Muller
//! cosine branch per call, `below(n)` is `floor(uniform * n)`.

use rand_core::Rng;
use rand_pcg::Pcg32;

const DEFAULT_STREAM: u64 = 0x0a02_bdbf_7bb3_c0a7;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded PCG32 generator with named substreams.
#[derive(Clone, Debug)]
pub struct Prng {
    seed: u64,
    stream: u64,
    inner: Pcg32,
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, DEFAULT_STREAM)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        Self {
            seed,
            stream,
            inner: Pcg32::new(splitmix64(seed ^ stream), stream),
        }
    }

    /// Independent generator named `name`, derived from this generator's
    /// seed and stream only (not from how far it has advanced).
    pub fn substream(&self, name: &str) -> Self {
        let stream = fnv1a(fnv1a(FNV_OFFSET, &self.stream.to_le_bytes()), name.as_bytes());
        Self::with_stream(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let i = (self.uniform() * n as f64) as usize;
        i.min(n - 1)
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    /// Fisher-Yates shuffle, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Prng::new(42);
        let mut b = Prng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_differ_and_ignore_parent_position() {
        let root = Prng::new(7);
        let mut advanced = root.clone();
        advanced.next_u64();
        let mut d1 = root.substream("data");
        let mut d2 = advanced.substream("data");
        let mut p = root.substream("policy");
        let x = d1.next_u64();
        assert_eq!(x, d2.next_u64());
        assert_ne!(x, p.next_u64());
    }

    #[test]
    fn uniform_and_below_ranges() {
        let mut r = Prng::new(1);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            assert!(r.below(3) < 3);
        }
    }

    #[test]
    fn normal_moments() {
        let mut r = Prng::new(3);
        let n = 100_000;
        let xs: std::vec::Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        // 3 standard errors
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut r = Prng::new(9);
        let mut v: std::vec::Vec<usize> = (0..50).collect();
        r.shuffle(&mut v);
        let mut s = v.clone();
        s.sort_unstable();
        assert_eq!(s, (0..50).collect::<std::vec::Vec<_>>());
    }
}
