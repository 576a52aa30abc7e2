//! Measurement and verification harness: grid box counts and dimension
//! fits, empirical Hölder constants, gap sums, longest convex / monotone
//! restriction search, plateau oscillation checks, and the mean-value
//! transfer from convex `f`-restrictions to monotone `g`-restrictions.

mod boxdim;
mod experiment;
mod holder;
mod oscillation;
mod sample;
mod subsets;
mod transfer;

pub use boxdim::{box_count_points, box_count_set, dim_fit, BoxCountRow, DimFit, SetId};
pub use experiment::{
    convexity_dimension_experiment, measure_constants, ExperimentConfig, ExperimentReport,
};
pub use holder::{
    gap_sum, holder_estimate, measure_c_phi0, working_holder_upper, GapSum, HolderEstimate,
    PairSampler,
};
pub use oscillation::{oscillation_check, OscillationEntry, OscillationReport};
pub use sample::SplitMix64;
pub use subsets::{
    check_convex_restriction, longest_concave_subset, longest_convex_subset,
    longest_monotone_subset, ConvexityCheck, Verdict, DEFAULT_SUBSET_CAP,
};
pub use transfer::{mvt_transfer, MvtTransferReport};

use alloc::vec::Vec;

use crate::cantor_base::Construction;
use crate::error::EvalError;
use crate::integral::Integrator;
use crate::scalar::Scalar;
use crate::tower::{Address, EvalResult, TerminalKind};

/// One sampled point with its evaluation error radius.
#[derive(Clone, Debug)]
pub struct PointSample {
    pub x: Scalar,
    pub value: Scalar,
    pub err: Scalar,
}

impl PointSample {
    pub fn exact(x: Scalar, value: Scalar) -> Self {
        PointSample { x, value, err: Scalar::zero() }
    }
}

/// Anything that evaluates with a rigorous error bound.
pub trait Evaluable: Sync {
    fn eval(&self, x: &Scalar, eps: &Scalar) -> Result<EvalResult, EvalError>;
}

/// Adapter for closures (test integrands, analytic references).
pub struct FnEval<F>(pub F);

impl<F> Evaluable for FnEval<F>
where
    F: Fn(&Scalar, &Scalar) -> Result<EvalResult, EvalError> + Sync,
{
    fn eval(&self, x: &Scalar, eps: &Scalar) -> Result<EvalResult, EvalError> {
        (self.0)(x, eps)
    }
}

/// Evaluation target within the construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Phi0,
    Phi(u32),
    G1,
    G,
    F,
}

/// [`Evaluable`] view of a construction (plus integrator for `F`).
pub struct TargetEval<'a> {
    c: &'a Construction,
    integ: Option<&'a Integrator<'a>>,
    target: Target,
}

impl<'a> TargetEval<'a> {
    pub fn new(c: &'a Construction, target: Target) -> Self {
        assert!(target != Target::F, "the antiderivative needs an integrator");
        TargetEval { c, integ: None, target }
    }

    pub fn with_integrator(integ: &'a Integrator<'a>, target: Target) -> Self {
        TargetEval { c: integ.construction(), integ: Some(integ), target }
    }
}

impl Evaluable for TargetEval<'_> {
    fn eval(&self, x: &Scalar, eps: &Scalar) -> Result<EvalResult, EvalError> {
        match self.target {
            Target::Phi0 => self.c.phi0_eval(x),
            Target::Phi(n) => self.c.phi_n_eval(x, n),
            Target::G1 => self.c.g1_eval(x, eps),
            Target::G => self.c.g_eval(x, eps, None),
            Target::F => self.integ.expect("integrator present").f_eval(x, eps),
        }
    }
}

/// Exact-value result helper for analytic references in tests and oracles.
pub fn exact_result(value: Scalar) -> EvalResult {
    EvalResult {
        value,
        err: Scalar::zero(),
        address: Address { steps: Vec::new(), frames: Vec::new(), terminal_kind: TerminalKind::Truncated },
        warnings: Vec::new(),
    }
}
