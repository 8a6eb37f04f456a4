//! Seedable, splittable pseudo-random generator.
//!
//! All randomness in the crate flows from a single 64-bit seed. Consumers
//! derive independent streams with [`SplitRng::derive`], keyed by a stream
//! index (dataset row, training epoch, ablation cell, ...). Because streams
//! are derived rather than shared, parallel generation produces identical
//! output regardless of thread count.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// SplitMix64 generator with deterministic stream derivation.
#[derive(Debug, Clone)]
pub struct SplitRng {
    state: u64,
}

impl SplitRng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Derive an independent child stream. `derive(i)` is a pure function of
    /// `(self.seed, i)`, so row `i` of a dataset sees the same stream no
    /// matter how work is scheduled.
    pub fn derive(&self, stream: u64) -> Self {
        Self {
            state: mix(self.state ^ GOLDEN.wrapping_mul(stream.wrapping_add(1))),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform draw from the open interval (0, 1).
    ///
    /// The raw 53-bit mantissa draw can produce exactly 0 but never 1;
    /// zeros are rejected so transformations with log/pow singularities at
    /// the endpoints stay finite.
    #[inline]
    pub fn open01(&mut self) -> f64 {
        loop {
            let u = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform draw from [lo, hi] (open at both ends unless lo == hi).
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.open01()
    }

    /// Unbiased integer draw in [0, n).
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }
}
