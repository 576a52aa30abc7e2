//! Gap sums and empirical Hölder constants.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::cantor_base::{Bracket, Construction};
use crate::error::AnalysisError;
use crate::scalar::{NumCtx, Scalar};
use crate::tower::TransitionalComponent;

use super::sample::SplitMix64;
use super::{Evaluable, Target, TargetEval};

/// Partial sum `Σ len^alpha` over disjoint components.
#[derive(Clone, Debug)]
pub struct GapSum {
    pub alpha: (u32, u32),
    pub partial_sum: Scalar,
    pub components_counted: usize,
    pub min_len_cutoff: Scalar,
}

/// Sum `Σ (b - a)^alpha` over the components with length at least the
/// cutoff. Exact whenever every power is rational.
pub fn gap_sum(
    components: &[TransitionalComponent],
    alpha: (u32, u32),
    min_len_cutoff: &Scalar,
    ctx: &NumCtx,
) -> Result<GapSum, AnalysisError> {
    let relaxed = ctx.relax();
    let mut sum = Scalar::zero();
    let mut counted = 0usize;
    for comp in components {
        let len = comp.b.sub(&comp.a, ctx);
        if len.compare(min_len_cutoff).is_lt() {
            continue;
        }
        let powed = len.pow_rational(alpha.0 as i64, alpha.1, &relaxed)?;
        sum = sum.add(&powed, ctx);
        counted += 1;
    }
    Ok(GapSum {
        alpha,
        partial_sum: sum,
        components_counted: counted,
        min_len_cutoff: min_len_cutoff.clone(),
    })
}

/// Pair generation strategy for Hölder sampling.
#[derive(Clone, Copy, Debug)]
pub enum PairSampler {
    UniformRandom { seed: u64 },
    DyadicGrid,
    /// Construction-aware pairs: child endpoints across depths, where the
    /// CDF attains its extremal ratios.
    AdversarialEndpoints,
}

/// Certified lower bound for the best Hölder constant at the given exponent.
#[derive(Clone, Debug)]
pub struct HolderEstimate {
    pub exponent: (u32, u32),
    /// Max over pairs of `(|v(x)-v(y)| - errs) / |x-y|^alpha`, rounded down.
    pub lower_bound: Scalar,
    pub pairs_tested: usize,
    pub witness: (Scalar, Scalar),
}

fn pairs_for(
    sampler: PairSampler,
    n_pairs: usize,
    c: Option<&Construction>,
) -> Vec<(Scalar, Scalar)> {
    let mut out = Vec::with_capacity(n_pairs);
    match sampler {
        PairSampler::UniformRandom { seed } => {
            let mut rng = SplitMix64::new(seed);
            while out.len() < n_pairs {
                let x = rng.unit_scalar();
                let y = rng.unit_scalar();
                if x.compare(&y).is_lt() {
                    out.push((x, y));
                } else if y.compare(&x).is_lt() {
                    out.push((y, x));
                }
            }
        }
        PairSampler::DyadicGrid => {
            // finest grid whose pair count stays within budget
            let mut g = 1u32;
            while (1usize << (2 * (g + 1))) / 2 <= n_pairs && g < 12 {
                g += 1;
            }
            let cells = 1u64 << g;
            'outer: for i in 0..=cells {
                for j in (i + 1)..=cells {
                    if out.len() >= n_pairs {
                        break 'outer;
                    }
                    out.push((
                        Scalar::Exact(BigRational::new(BigInt::from(i), BigInt::from(cells))),
                        Scalar::Exact(BigRational::new(BigInt::from(j), BigInt::from(cells))),
                    ));
                }
            }
        }
        PairSampler::AdversarialEndpoints => {
            let c = c.expect("adversarial pairs need the construction");
            let ctx = *c.ctx();
            let zero = Scalar::zero();
            let one = Scalar::one();
            out.push((zero.clone(), one.clone()));
            let mut len = Scalar::one();
            for _ in 0..6 {
                len = len.mul(c.ell(), &ctx);
                // (0, ell^d): the ratio-1 witness of the CDF
                out.push((zero.clone(), len.clone()));
                out.push((one.sub(&len, &ctx), one.clone()));
                if out.len() >= n_pairs {
                    return out;
                }
            }
            // child spans and cross-gap pairs at shallow depths
            for depth in 1..=2u32 {
                if let Ok(children) = c.children_at_depth(depth) {
                    for w in children.windows(2) {
                        if out.len() + 3 > n_pairs {
                            return out;
                        }
                        out.push((w[0].a.clone(), w[0].b.clone()));
                        out.push((w[0].b.clone(), w[1].a.clone()));
                        out.push((w[0].a.clone(), w[1].b.clone()));
                    }
                }
            }
        }
    }
    out
}

/// Sampled lower bound `Λ̂` for the Hölder constant of an evaluable.
pub fn holder_estimate(
    eval: &dyn Evaluable,
    alpha: (u32, u32),
    n_pairs: usize,
    sampler: PairSampler,
    ctx: &NumCtx,
    eval_eps: &Scalar,
    construction: Option<&Construction>,
) -> Result<HolderEstimate, AnalysisError> {
    assert!(n_pairs >= 1);
    let relaxed = ctx.relax();
    let pairs = pairs_for(sampler, n_pairs, construction);
    let mut best = BigRational::zero();
    let mut witness = (Scalar::zero(), Scalar::zero());
    let mut tested = 0usize;
    for (x, y) in &pairs {
        let vx = eval.eval(x, eval_eps)?;
        let vy = eval.eval(y, eval_eps)?;
        tested += 1;
        // certified numerator lower bound
        let diff = vx.value.sub(&vy.value, ctx).abs();
        let errs = vx.err.add(&vy.err, ctx);
        let num = diff.lower_rational() - errs.upper_rational();
        if !num.is_positive() {
            continue;
        }
        let dist = y.sub(x, ctx);
        let den = dist.pow_rational(alpha.0 as i64, alpha.1, &relaxed)?;
        let den_hi = den.upper_rational();
        if den_hi.is_zero() {
            continue;
        }
        let ratio = num / den_hi;
        if ratio > best {
            best = ratio;
            witness = (x.clone(), y.clone());
        }
    }
    Ok(HolderEstimate {
        exponent: alpha,
        lower_bound: Scalar::Exact(best),
        pairs_tested: tested,
        witness,
    })
}

/// Measured bracket for the Hölder constant of the CDF: the certified
/// sampled supremum as the lower end, times a 1.05 guard as the working
/// upper end.
pub fn measure_c_phi0(
    c: &Construction,
    n_pairs: usize,
    seed: u64,
) -> Result<Bracket, AnalysisError> {
    let alpha = (c.params().alpha_num, c.params().alpha_den);
    let ctx = *c.ctx();
    let eval = TargetEval::new(c, Target::Phi0);
    let eps = Scalar::zero(); // the CDF descends exactly
    let budget_adv = n_pairs / 10 + 16;
    let budget_grid = n_pairs / 10 + 16;
    let budget_rand = n_pairs.saturating_sub(budget_adv + budget_grid).max(16);
    let mut best = BigRational::zero();
    for (sampler, budget) in [
        (PairSampler::AdversarialEndpoints, budget_adv),
        (PairSampler::DyadicGrid, budget_grid),
        (PairSampler::UniformRandom { seed }, budget_rand),
    ] {
        let est = holder_estimate(&eval, alpha, budget, sampler, &ctx, &eps, Some(c))?;
        let lb = est.lower_bound.mid_rational();
        if lb > best {
            best = lb;
        }
    }
    let lower = best.to_f64().unwrap_or(0.0);
    Ok(Bracket { lower, upper: lower * 1.05 })
}

/// Working Hölder upper constant: the measured bracket's upper end, lifted
/// above 2 in strict mode (the standing assumption used by the downstream
/// inequality thresholds; enlarging an upper constant is always sound).
pub fn working_holder_upper(bracket: &Bracket, strict: bool) -> f64 {
    if strict {
        bracket.upper.max(2.1)
    } else {
        bracket.upper
    }
}
