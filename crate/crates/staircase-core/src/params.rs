//! Construction parameters and their validation.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::ParamsError;
use crate::scalar::NumCtx;

/// Arithmetic backend: exact big rationals or guarded dyadic floats.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Mode {
    Exact,
    Guarded,
}

/// Whether the standing largeness assumptions on `N` are enforced.
///
/// `Strict` demands `N > 100` and `N^(1-alpha) > 4`; `Relaxed` waives both so
/// that small-`N` oracle tests can run, and tags every downstream report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Strictness {
    Strict,
    Relaxed,
}

/// Global configuration every evaluation depends on.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstructionParams {
    /// Branching factor `N`: even, at least 4 (over 100 in strict mode).
    pub n_base: u32,
    /// Hölder exponent `alpha = alpha_num / alpha_den`, reduced, in (0, 1).
    pub alpha_num: u32,
    pub alpha_den: u32,
    pub mode: Mode,
    pub strictness: Strictness,
    /// Working precision for guarded floats.
    pub float_precision_bits: u32,
    /// Depth limit for whole-level child enumeration.
    pub max_enum_depth: u32,
    /// Limit on composed descent levels per evaluation.
    pub max_descent_levels: u32,
    /// Record budget for structure enumerations.
    pub enumeration_budget: usize,
}

impl ConstructionParams {
    /// Strict defaults: `N = 128`, `alpha = 1/2`, exact arithmetic.
    ///
    /// 128 is the smallest even power of two above 100, which keeps exact-mode
    /// denominators small.
    pub fn strict_default() -> Self {
        ConstructionParams {
            n_base: 128,
            alpha_num: 1,
            alpha_den: 2,
            mode: Mode::Exact,
            strictness: Strictness::Strict,
            float_precision_bits: 256,
            max_enum_depth: 12,
            max_descent_levels: 60,
            enumeration_budget: 10_000_000,
        }
    }

    /// Small-scale parameters for oracle tests: `N = 4`, `alpha = 1/2`.
    pub fn relaxed(n_base: u32, alpha_num: u32, alpha_den: u32, mode: Mode) -> Self {
        ConstructionParams {
            n_base,
            alpha_num,
            alpha_den,
            mode,
            strictness: Strictness::Relaxed,
            ..ConstructionParams::strict_default()
        }
    }

    pub fn alpha(&self) -> BigRational {
        BigRational::new(BigInt::from(self.alpha_num), BigInt::from(self.alpha_den))
    }

    pub fn num_ctx(&self) -> NumCtx {
        NumCtx { mode: self.mode, prec: self.float_precision_bits }
    }

    pub fn is_strict(&self) -> bool {
        self.strictness == Strictness::Strict
    }

    /// `1/alpha` as a reduced fraction `(alpha_den, alpha_num)`.
    pub fn inv_alpha(&self) -> (u32, u32) {
        (self.alpha_den, self.alpha_num)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        let n = self.n_base;
        if n < 4 {
            return Err(ParamsError::BaseTooSmall(n));
        }
        if n % 2 != 0 {
            return Err(ParamsError::OddBase(n));
        }
        if self.alpha_num == 0 || self.alpha_num >= self.alpha_den {
            return Err(ParamsError::AlphaOutOfRange);
        }
        let g = gcd(self.alpha_num, self.alpha_den);
        if g != 1 {
            // callers should pass reduced fractions; reduce-equivalent check
            return Err(ParamsError::AlphaOutOfRange);
        }
        if self.mode == Mode::Exact && self.alpha_num != 1 {
            return Err(ParamsError::ExactNeedsUnitFraction {
                alpha_num: self.alpha_num,
                alpha_den: self.alpha_den,
            });
        }
        if self.mode == Mode::Guarded && self.float_precision_bits < 64 {
            return Err(ParamsError::PrecisionTooSmall(self.float_precision_bits));
        }
        if self.is_strict() {
            if n <= 100 {
                return Err(ParamsError::StrictBaseTooSmall(n));
            }
            // N^(1-alpha) > 4  <=>  N^(den-num) > 4^den, exactly in integers
            let lhs = BigInt::from(n).pow(self.alpha_den - self.alpha_num);
            let rhs = BigInt::from(4u32).pow(self.alpha_den);
            if lhs <= rhs {
                return Err(ParamsError::StrictScaleCondition(n));
            }
        }
        Ok(())
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
