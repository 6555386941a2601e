//! Seeded randomness with a pinned, portable algorithm.
//!
//! Every random choice in the crate (splits, negative sampling, per-hop
//! subsampling, weight init, epoch shuffles) flows through ChaCha8 streams
//! created here, combined with the integer and float mappings below. The
//! exact algorithms are documented so that runs reproduce across platforms
//! and so that ports to other languages can match the streams bit for bit.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; used to derive well-separated stream seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Derives the seed for a per-focal-pair stream from a base seed and the
/// canonical (smaller, larger) endpoints: three chained SplitMix64 rounds.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ a) ^ b)
}

/// ChaCha8 stream seeded from a single u64.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform integer in [0, bound) by rejection: draw u64, reject values at or
/// above the largest multiple of `bound`, then reduce. Unbiased; consumes a
/// variable but seed-determined number of draws.
pub fn uniform_u64(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    assert!(bound > 0, "uniform_u64 bound must be positive");
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let x = rng.next_u64();
        if x < zone {
            return x % bound;
        }
    }
}

/// Uniform f64 in [0, 1) from the top 53 bits of one u64 draw.
pub fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// In-place Fisher-Yates shuffle: for i from len-1 down to 1, swap i with
/// uniform_u64(i+1).
pub fn shuffle<T>(rng: &mut ChaCha8Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = uniform_u64(rng, (i + 1) as u64) as usize;
        items.swap(i, j);
    }
}

/// Uniformly samples `k` distinct items (partial Fisher-Yates over a copy),
/// returning them sorted ascending. `k` must not exceed the pool size.
pub fn sample_sorted(rng: &mut ChaCha8Rng, pool: &[usize], k: usize) -> Vec<usize> {
    assert!(k <= pool.len());
    let mut items = pool.to_vec();
    for i in 0..k {
        let j = i + uniform_u64(rng, (items.len() - i) as u64) as usize;
        items.swap(i, j);
    }
    items.truncate(k);
    items.sort_unstable();
    items
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_reproduce() {
        let mut a = stream(7);
        let mut b = stream(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn uniform_respects_bound() {
        let mut rng = stream(1);
        for _ in 0..10_000 {
            assert!(uniform_u64(&mut rng, 13) < 13);
        }
    }

    #[test]
    fn unit_in_range() {
        let mut rng = stream(2);
        for _ in 0..10_000 {
            let x = unit_f64(&mut rng);
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn sample_sorted_distinct() {
        let mut rng = stream(3);
        let pool: Vec<usize> = (0..50).collect();
        let s = sample_sorted(&mut rng, &pool, 20);
        assert_eq!(s.len(), 20);
        for w in s.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn derive_seed_separates_pairs() {
        assert_ne!(derive_seed(0, 1, 2), derive_seed(0, 2, 3));
        assert_ne!(derive_seed(0, 1, 2), derive_seed(1, 1, 2));
    }
}
