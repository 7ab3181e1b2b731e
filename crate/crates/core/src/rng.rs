//! Deterministic counter-based randomness.
//!
//! Simulation and solver restarts draw every random number from a
//! SplitMix64 stream keyed by a tuple of integers (seed, stage, role, ...).
//! Keyed streams make results independent of evaluation order, so parallel
//! and serial runs are bit-identical.

/// SplitMix64 generator with a single 64-bit state.
///
/// Not cryptographic; stable output across platforms.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Builds a generator keyed by a tuple, folding each part into the state.
    pub fn keyed(parts: &[u64]) -> Self {
        let mut rng = Self::new(0x243F_6A88_85A3_08D3);
        for &p in parts {
            rng.state ^= p.wrapping_mul(0x9E37_79B9_7F4A_7C15);
            rng.next_u64();
        }
        rng
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw from the half-open-from-below interval `(0, 1]`.
    ///
    /// This is the orientation the RAND mechanism expects: the draw can be 1
    /// but never 0, so a cumulative-probability comparison `cdf >= k` always
    /// selects an element.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// Uniform draw from `[lo, hi)`.
    #[inline]
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + ((self.next_u64() >> 11) as f64) * (1.0 / 9007199254740992.0) * (hi - lo)
    }
}

/// One keyed uniform draw in `(0, 1]` without carrying generator state.
pub fn unit_for(parts: &[u64]) -> f64 {
    SplitMix64::keyed(parts).next_unit()
}
