//! Verified construction of a self-similar "staircase" derivative `g` and its
//! antiderivative `f`, together with the measurement harness used to probe
//! their finite-scale geometry.
//!
//! The construction stacks three layers:
//!
//! - [`cantor_base`]: a Cantor-type base set made of `N` affine copies of
//!   itself, and the CDF `phi0` of its natural measure (a devil's-staircase
//!   function that is Hölder-`alpha`).
//! - [`tower`]: inside every contiguous gap of the base set, an inductive
//!   tower of oscillating plateaus joined by slope-`±1` transitional slots.
//!   The plateau levels converge to `g1`; re-seeding the construction inside
//!   every transitional slot (an affine copy of the whole function) yields
//!   the restricted-self-similar limit `g`.
//! - [`integral`]: `f(x) = ∫₀ˣ g`, evaluated by exact partition sums along
//!   the interval hierarchy with a linear fixed point for `∫₀¹ g`.
//!
//! Every evaluation returns a value together with a rigorous error radius;
//! in exact mode (`1/alpha` integral) all construction endpoints and plateau
//! values are big rationals and most descents terminate with error zero.
//!
//! [`analysis`] holds the harness: grid box counts and dimension fits,
//! empirical Hölder constants, gap sums, longest convex / monotone
//! restriction search, oscillation checks, and the mean-value transfer from
//! convexity of `f` to monotonicity of `g`.
#![cfg_attr(all(not(feature = "std"), not(test)), no_std)]

extern crate alloc;

pub mod analysis;
pub mod cantor_base;
pub mod error;
pub mod integral;
pub mod params;
pub mod scalar;
pub mod tower;

pub use cantor_base::Construction;
pub use error::{AnalysisError, EvalError, ParamsError, ScalarError};
pub use integral::Integrator;
pub use params::{ConstructionParams, Mode, Strictness};
pub use scalar::{NumCtx, Ordering4, Scalar};
pub use tower::EvalResult;
