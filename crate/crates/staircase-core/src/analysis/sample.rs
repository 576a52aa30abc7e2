//! Deterministic sampling helpers.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::scalar::Scalar;

/// SplitMix64: tiny deterministic PRNG, identical on every platform.
#[derive(Clone, Debug)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Exact dyadic rational in `[0, 1)` with denominator `2^64`.
    pub fn unit_rational(&mut self) -> BigRational {
        let v = self.next_u64();
        BigRational::new(BigInt::from(v), BigInt::from(2u8).pow(64))
    }

    /// Exact dyadic scalar in `[0, 1)`.
    pub fn unit_scalar(&mut self) -> Scalar {
        Scalar::Exact(self.unit_rational())
    }

    /// Uniform index below `bound` (bound > 0), by rejection-free modulo of a
    /// wide draw (bias below 2^-64 per call, irrelevant for sampling).
    pub fn index(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        self.next_u64() % bound
    }
}
