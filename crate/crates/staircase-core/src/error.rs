//! Error types shared across the crate.

use alloc::string::String;
use core::fmt;

/// Errors from the numeric kernel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScalarError {
    /// A fractional power of a negative base was requested.
    NegativeBase,
    /// An exact result was demanded but the power is irrational.
    IrrationalInExactMode,
    /// Division by zero, or by an interval containing zero.
    DivisionByZero,
    /// `0^p` with negative `p`.
    ZeroToNegativePower,
}

impl fmt::Display for ScalarError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarError::NegativeBase => write!(f, "fractional power of a negative base"),
            ScalarError::IrrationalInExactMode => {
                write!(f, "result is irrational but exact output was demanded")
            }
            ScalarError::DivisionByZero => write!(f, "division by zero or a zero-straddling interval"),
            ScalarError::ZeroToNegativePower => write!(f, "zero raised to a negative power"),
        }
    }
}

/// Errors from construction-parameter validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParamsError {
    /// The branching factor must be even.
    OddBase(u32),
    /// The branching factor must be at least 4.
    BaseTooSmall(u32),
    /// `alpha` must lie strictly between 0 and 1.
    AlphaOutOfRange,
    /// Exact mode requires `1/alpha` to be a positive integer.
    ExactNeedsUnitFraction { alpha_num: u32, alpha_den: u32 },
    /// Strict mode requires `N > 100`.
    StrictBaseTooSmall(u32),
    /// Strict mode requires `N^(1-alpha) > 4`.
    StrictScaleCondition(u32),
    /// Guarded mode needs a sane working precision.
    PrecisionTooSmall(u32),
}

impl fmt::Display for ParamsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamsError::OddBase(n) => write!(f, "N = {n} must be even"),
            ParamsError::BaseTooSmall(n) => write!(f, "N = {n} must be at least 4"),
            ParamsError::AlphaOutOfRange => write!(f, "alpha must lie in (0, 1)"),
            ParamsError::ExactNeedsUnitFraction { alpha_num, alpha_den } => write!(
                f,
                "exact mode needs alpha = 1/q, got {alpha_num}/{alpha_den}"
            ),
            ParamsError::StrictBaseTooSmall(n) => write!(f, "strict mode needs N > 100, got {n}"),
            ParamsError::StrictScaleCondition(n) => {
                write!(f, "strict mode needs N^(1-alpha) > 4, violated by N = {n}")
            }
            ParamsError::PrecisionTooSmall(p) => {
                write!(f, "guarded precision must be at least 64 bits, got {p}")
            }
        }
    }
}

/// Errors from point evaluation and structure enumeration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalError {
    /// The query point lies outside `[0, 1]`.
    OutOfDomain,
    /// The descent hit its level limit before reaching the requested error.
    PrecisionUnreachable {
        /// Error radius actually achieved, as a decimal string.
        achieved: String,
    },
    /// A depth-limited enumeration was asked to go past its configured limit.
    DepthLimitExceeded { depth: u32, limit: u32 },
    /// An interval became too short for the working precision.
    DegenerateGap,
    /// An enumeration would produce more records than the configured budget.
    EnumerationBudgetExceeded { budget: usize },
    /// Arithmetic failure bubbled up from the numeric kernel.
    Scalar(ScalarError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::OutOfDomain => write!(f, "point outside [0, 1]"),
            EvalError::PrecisionUnreachable { achieved } => {
                write!(f, "requested error not reachable; achieved {achieved}")
            }
            EvalError::DepthLimitExceeded { depth, limit } => {
                write!(f, "depth {depth} exceeds configured limit {limit}")
            }
            EvalError::DegenerateGap => write!(f, "interval underflows the working precision"),
            EvalError::EnumerationBudgetExceeded { budget } => {
                write!(f, "enumeration exceeds budget of {budget} records")
            }
            EvalError::Scalar(e) => write!(f, "scalar error: {e}"),
        }
    }
}

impl From<ScalarError> for EvalError {
    fn from(e: ScalarError) -> Self {
        EvalError::Scalar(e)
    }
}

/// Errors from the analysis harness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnalysisError {
    /// A dimension fit needs at least 3 rows.
    InsufficientRows,
    /// Input larger than the configured cap for a quadratic search.
    CapExceeded { cap: usize, got: usize },
    /// A checked inequality failed; carries the witness description.
    AssertionFailed { check: String, detail: String },
    /// Bisection could not bracket the required mean-value root.
    RootNotBracketed { detail: String },
    /// The transfer requires a convex input restriction.
    NotConvex,
    /// Evaluation failure bubbled up from the construction.
    Eval(EvalError),
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::InsufficientRows => write!(f, "need at least 3 box-count rows"),
            AnalysisError::CapExceeded { cap, got } => {
                write!(f, "input of size {got} exceeds cap {cap}")
            }
            AnalysisError::AssertionFailed { check, detail } => {
                write!(f, "check '{check}' failed: {detail}")
            }
            AnalysisError::RootNotBracketed { detail } => {
                write!(f, "mean-value root not bracketed: {detail}")
            }
            AnalysisError::NotConvex => write!(f, "input restriction is not convex"),
            AnalysisError::Eval(e) => write!(f, "evaluation error: {e}"),
        }
    }
}

impl From<EvalError> for AnalysisError {
    fn from(e: EvalError) -> Self {
        AnalysisError::Eval(e)
    }
}

impl From<ScalarError> for AnalysisError {
    fn from(e: ScalarError) -> Self {
        AnalysisError::Eval(EvalError::Scalar(e))
    }
}

#[cfg(feature = "std")]
mod std_impls {
    use super::*;
    impl std::error::Error for ScalarError {}
    impl std::error::Error for ParamsError {}
    impl std::error::Error for EvalError {}
    impl std::error::Error for AnalysisError {}
}
