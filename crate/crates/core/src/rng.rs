//! Counter-based pseudo-random numbers ("flexrng-v1").
//!
//! Scenario files record the generator identity so sampled fleets stay
//! bit-reproducible across releases and platforms. The generator hashes a
//! (seed, stream, counter) triple through the SplitMix64 finalizer; separate
//! streams let each sampled system draw independently of list order.

/// Identity string stored in scenario files.
pub const RNG_ID: &str = "flexrng-v1";

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct FlexRng {
    key: u64,
    counter: u64,
}

impl FlexRng {
    pub fn new(seed: u64, stream: u64) -> FlexRng {
        let key = mix(seed ^ mix(stream.wrapping_mul(GOLDEN).wrapping_add(1)));
        FlexRng { key, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform draw in [lo, hi) with 53-bit resolution.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + (hi - lo) * u
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // 64-bit multiply-shift; bias is negligible for the small n used here
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_streams() {
        let mut a = FlexRng::new(7, 3);
        let mut b = FlexRng::new(7, 3);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = FlexRng::new(7, 0);
        let mut b = FlexRng::new(7, 1);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn uniform_in_range() {
        let mut r = FlexRng::new(1, 0);
        let mut lo_seen = f64::INFINITY;
        let mut hi_seen = f64::NEG_INFINITY;
        for _ in 0..10_000 {
            let v = r.uniform(-2.0, 3.0);
            assert!((-2.0..3.0).contains(&v));
            lo_seen = lo_seen.min(v);
            hi_seen = hi_seen.max(v);
        }
        // the sample should spread across most of the interval
        assert!(lo_seen < -1.8 && hi_seen > 2.8);
    }

    #[test]
    fn pinned_first_draws() {
        // frozen values: any change to the generator breaks stored scenarios
        let mut r = FlexRng::new(0, 0);
        assert_eq!(r.next_u64(), 0x4181_b152_fb77_616f);
        let mut r2 = FlexRng::new(12345, 6);
        assert_eq!(r2.next_u64(), 0x92fb_76dd_998c_a38d);
    }
}
