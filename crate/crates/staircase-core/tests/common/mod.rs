//! Shared helpers for the oracle tests.

use num_bigint::BigInt;
use num_rational::BigRational;
use staircase_core::scalar::Scalar;
use staircase_core::tower::EvalResult;

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn sc(n: i64, d: i64) -> Scalar {
    Scalar::Exact(rat(n, d))
}

/// Assert an evaluation is exact (zero error) and equals `expected`.
pub fn assert_exact(r: &EvalResult, expected: &BigRational) {
    assert!(r.err.is_zero(), "expected exact result, err = {}", r.err.to_text());
    assert_eq!(r.value.as_rational().expect("exact value"), expected);
}

/// Assert the enclosure `value ± err` contains `expected`.
pub fn assert_contains(r: &EvalResult, expected: &BigRational) {
    let (lo, hi) = r.bounds();
    assert!(
        &lo <= expected && expected <= &hi,
        "enclosure [{lo}, {hi}] misses {expected}"
    );
}
