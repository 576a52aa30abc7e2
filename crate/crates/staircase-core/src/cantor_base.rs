//! The self-similar base set and the CDF of its natural measure.
//!
//! The base set is the attractor of `N` affine maps of ratio `N^(-1/alpha)`,
//! equally spaced so that the first copy starts at 0 and the last ends at 1.
//! With `ell = N^(-1/alpha)` the start-to-start spacing is
//! `s = (1 - ell)/(N - 1)` and every level-0 gap has length
//! `s - ell = (1 - N*ell)/(N - 1) < 1/(N-1)`.
//!
//! `phi0` is the CDF of the measure that splits mass `1/N` across the `N`
//! first-level copies, recursively: a devil's-staircase function, constant on
//! every gap and Hölder-`alpha` with constant 1 attained on child endpoints.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{EvalError, ParamsError, ScalarError};
use crate::params::{ConstructionParams, Mode};
use crate::scalar::{NumCtx, Scalar};
use crate::tower::{descend, EvalKind, EvalResult};

/// Interval classification within the construction hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum IntervalKind {
    /// A level-`depth` construction interval of the base set.
    Child,
    /// A contiguous interval of the base set's complement.
    Gap,
    /// One of the `N` constant blocks laid out inside a gap.
    Plateau,
    /// A slope-`±1` slot between plateau blocks.
    Transitional,
}

/// One node of the nested interval hierarchy.
#[derive(Clone, Debug)]
pub struct IntervalRec {
    pub a: Scalar,
    pub b: Scalar,
    pub kind: IntervalKind,
    pub depth: u32,
    /// Value of the governing level on this interval (gaps and plateaus).
    pub base_value: Option<Scalar>,
    /// Oscillation amplitude `delta` of the enclosing gap, when applicable.
    pub delta: Option<Scalar>,
}

impl IntervalRec {
    pub fn len(&self, ctx: &NumCtx) -> Scalar {
        self.b.sub(&self.a, ctx)
    }
}

/// Empirical bracket `[lower, upper]` for a measured constant.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bracket {
    /// Certified lower bound (max observed ratio, evaluation errors deducted).
    pub lower: f64,
    /// Working upper value (lower bound times a guard factor).
    pub upper: f64,
}

/// Constants that are measured, never derived: the Hölder constant of `phi0`,
/// the box-count ratio of the base set, and the two box-count constants of
/// the convex-restriction experiment.
#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasuredConstants {
    pub c_phi0: Bracket,
    pub c_f0_boxcount: f64,
    pub c_g1: f64,
    pub c_alpha: f64,
}

/// Validated parameters plus the precomputed geometry every evaluation uses.
#[derive(Clone, Debug)]
pub struct Construction {
    params: ConstructionParams,
    ctx: NumCtx,
    /// Child length ratio `N^(-1/alpha)`.
    ell: Scalar,
    /// Start-to-start spacing `(1 - ell)/(N - 1)`.
    spacing: Scalar,
    /// Level-0 gap length `spacing - ell`.
    gap0: Scalar,
}

impl Construction {
    pub fn new(params: ConstructionParams) -> Result<Self, ParamsError> {
        params.validate()?;
        let ctx = params.num_ctx();
        let n = Scalar::from_int(params.n_base as i64);
        let (inv_num, inv_den) = params.inv_alpha(); // 1/alpha = inv_num / inv_den
        let ell = n
            .pow_rational(-(inv_num as i64), inv_den, &ctx)
            .expect("N^(-1/alpha) is positive");
        let one = Scalar::one();
        let n_minus_1 = Scalar::from_int(params.n_base as i64 - 1);
        let spacing = one
            .sub(&ell, &ctx)
            .div(&n_minus_1, &ctx)
            .expect("N > 1");
        let gap0 = spacing.sub(&ell, &ctx);
        Ok(Construction { params, ctx, ell, spacing, gap0 })
    }

    pub fn params(&self) -> &ConstructionParams {
        &self.params
    }

    pub fn ctx(&self) -> &NumCtx {
        &self.ctx
    }

    pub fn n(&self) -> u32 {
        self.params.n_base
    }

    pub fn ell(&self) -> &Scalar {
        &self.ell
    }

    pub fn spacing(&self) -> &Scalar {
        &self.spacing
    }

    pub fn gap0_len(&self) -> &Scalar {
        &self.gap0
    }

    /// Mass `N^-depth` of a level-`depth` child (always an exact rational).
    pub fn mass(&self, depth: u32) -> Scalar {
        Scalar::Exact(BigRational::new(
            BigInt::from(1),
            BigInt::from(self.params.n_base).pow(depth),
        ))
    }

    /// Oscillation amplitude `delta = len^(2/alpha) / N^(2/alpha)` of a gap of
    /// length `len`.
    pub fn delta_of(&self, len: &Scalar) -> Result<Scalar, ScalarError> {
        let (p, q) = self.two_inv_alpha();
        let num = len.pow_rational(p, q, &self.ctx)?;
        let den = Scalar::from_int(self.params.n_base as i64).pow_rational(p, q, &self.ctx)?;
        num.div(&den, &self.ctx)
    }

    /// The exponent `2/alpha` as a fraction `(p, q)`.
    pub fn two_inv_alpha(&self) -> (i64, u32) {
        (2 * self.params.alpha_den as i64, self.params.alpha_num)
    }

    // -- scalar helpers bound to this construction's context ---------------

    pub(crate) fn add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a.add(b, &self.ctx)
    }

    pub(crate) fn sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a.sub(b, &self.ctx)
    }

    pub(crate) fn mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        a.mul(b, &self.ctx)
    }

    pub(crate) fn div(&self, a: &Scalar, b: &Scalar) -> Result<Scalar, ScalarError> {
        a.div(b, &self.ctx)
    }

    pub(crate) fn mul_int(&self, a: &Scalar, k: i64) -> Scalar {
        a.mul(&Scalar::from_int(k), &self.ctx)
    }

    // -- operations ---------------------------------------------------------

    /// The `N^d` level-`d` construction intervals, in increasing order.
    pub fn children_at_depth(&self, d: u32) -> Result<Vec<IntervalRec>, EvalError> {
        if d > self.params.max_enum_depth {
            return Err(EvalError::DepthLimitExceeded { depth: d, limit: self.params.max_enum_depth });
        }
        let count = (self.params.n_base as u128).checked_pow(d);
        match count {
            Some(c) if c <= self.params.enumeration_budget as u128 => {}
            _ => {
                return Err(EvalError::EnumerationBudgetExceeded {
                    budget: self.params.enumeration_budget,
                })
            }
        }
        let mut out = Vec::new();
        self.emit_children(&Scalar::zero(), &Scalar::one(), 0, d, &mut out);
        Ok(out)
    }

    fn emit_children(&self, a: &Scalar, len: &Scalar, depth: u32, target: u32, out: &mut Vec<IntervalRec>) {
        if depth == target {
            out.push(IntervalRec {
                a: a.clone(),
                b: self.add(a, len),
                kind: IntervalKind::Child,
                depth,
                base_value: None,
                delta: None,
            });
            return;
        }
        let step = self.mul(len, &self.spacing);
        let child_len = self.mul(len, &self.ell);
        for j in 0..self.params.n_base {
            let start = self.add(a, &self.mul_int(&step, j as i64));
            self.emit_children(&start, &child_len, depth + 1, target, out);
        }
    }

    /// The `N - 1` contiguous gaps between consecutive depth-1 children,
    /// carrying the CDF value on each.
    pub fn gaps_level0(&self) -> Vec<IntervalRec> {
        let mut out = Vec::with_capacity(self.params.n_base as usize - 1);
        let delta = self.delta_of(&self.gap0).ok();
        for j in 1..self.params.n_base {
            let start_next = self.mul_int(&self.spacing, j as i64);
            let a = self.sub(&start_next, &self.gap0);
            let base = Scalar::Exact(BigRational::new(
                BigInt::from(j),
                BigInt::from(self.params.n_base),
            ));
            out.push(IntervalRec {
                a,
                b: start_next,
                kind: IntervalKind::Gap,
                depth: 0,
                base_value: Some(base),
                delta: delta.clone(),
            });
        }
        out
    }

    /// CDF of the natural measure: mass `1/N` per level-1 child, recursively;
    /// constant on every gap.
    pub fn phi0_eval(&self, x: &Scalar) -> Result<EvalResult, EvalError> {
        // phi0 descends exactly; the zero tolerance only matters at the
        // depth limit, where the enclosure width becomes the error.
        descend(self, x, &Scalar::zero(), EvalKind::Phi(0))
    }

    /// True when the params allow fully exact construction arithmetic.
    pub fn is_exact(&self) -> bool {
        self.params.mode == Mode::Exact
    }
}
