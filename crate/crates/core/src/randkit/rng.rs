use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random stream.
///
/// Every stochastic routine in the crate takes an explicit `&mut RngState`;
/// nothing reads global or thread-local randomness, so an output is a pure
/// function of its inputs and the seed.
///
/// The stream is ChaCha8 keyed by `seed_from_u64(seed)`. Child streams made
/// with [`RngState::split`] are fresh ChaCha8 streams keyed by
/// [`sub_seed`]`(seed, index)`, which does not depend on how far the parent
/// has been advanced.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream number `index`.
    pub fn split(&self, index: u64) -> RngState {
        RngState::new(sub_seed(self.seed, index))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`; safe to take logs of.
    #[inline]
    pub fn open_uniform(&mut self) -> f64 {
        ((self.inner.next_u64() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
    }

    /// Uniform on `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index in `0..n`; `n` must be positive.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire multiply-shift; the bias is below 2^-64 * n.
        ((self.inner.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of child stream `index` of a stream seeded with `seed`:
/// `splitmix64(seed ^ splitmix64(index))`.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngState::new(7);
        let mut b = RngState::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn split_ignores_parent_position() {
        let a = RngState::new(11);
        let mut b = RngState::new(11);
        for _ in 0..10 {
            b.next_u64();
        }
        let mut ca = a.split(3);
        let mut cb = b.split(3);
        assert_eq!(ca.next_u64(), cb.next_u64());
        assert_eq!(ca.seed(), sub_seed(11, 3));
    }

    #[test]
    fn sub_seeds_distinct() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..10_000 {
            assert!(seen.insert(sub_seed(42, i)));
        }
        assert!(!seen.contains(&42));
    }

    #[test]
    fn open_uniform_bounds() {
        let mut r = RngState::new(1);
        for _ in 0..100_000 {
            let u = r.open_uniform();
            assert!(u > 0.0 && u < 1.0);
            let v = r.uniform();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn index_in_range() {
        let mut r = RngState::new(5);
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[r.index(3)] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 400.0);
        }
    }
}
